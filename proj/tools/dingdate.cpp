#include <iostream>

#include "dingdate/cli.hpp"

int main(int argc, char** argv) { return dingdate::cli::run(argc, argv, std::cout, std::cerr); }
