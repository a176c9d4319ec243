#pragma once
// Command-line entry point: synth, train, eval, infer, stats, gradcheck.
//
// Exit codes: 0 success, 1 runtime error, 2 usage error. Machine-readable
// results go to `out`, diagnostics to `err`. DINGDATE_LOG (error, warn, info,
// debug) sets diagnostic verbosity; the default is warn.

#include <iosfwd>

namespace dingdate::cli {

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dingdate::cli
