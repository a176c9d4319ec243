#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "dingdate/cli.hpp"
#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "dingdate");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = dingdate::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("dingdate_cli_" + std::to_string(::getpid()))) {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("usage errors exit 2") {
  CHECK(run({}).code == 2);
  const Result r = run({"stats", "--bogus"});
  CHECK(r.code == 2);
  CHECK(r.err.find("Usage") != std::string::npos);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"eval", "--split", "dev", "--ckpt", "x"}).code == 2);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("runtime errors exit 1") {
  TempDir dir;
  std::ofstream(dir / "bad.json") << "{ not json";
  std::ofstream(dir / "data.jsonl") << "";
  const Result r = run({"stats", "--data", dir / "data.jsonl", "--graph", dir / "bad.json"});
  CHECK(r.code == 1);
  CHECK(r.err.find("ParseError") != std::string::npos);
}

TEST_CASE("stats on a uniform 11-period set reports 3.459 bits") {
  TempDir dir;
  std::ofstream(dir / "uniform.json") << R"({"period_counts":[20,20,20,20,20,20,20,20,20,20,20],"seed":4})";
  REQUIRE(run({"synth", "--config", dir / "uniform.json", "--out", dir / "u.jsonl", "--no-split"}).code == 0);
  const Result r = run({"stats", "--data", dir / "u.jsonl", "--graph", dir / "u.schema.json"});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["entropy_bits"].get<double>() == doctest::Approx(3.459).epsilon(0.0003));
  CHECK(j["classes"] == 11);
  const Result text = run({"stats", "--data", dir / "u.jsonl", "--graph", dir / "u.schema.json", "--format", "text"});
  CHECK(text.code == 0);
  CHECK(text.out.find("3.459") != std::string::npos);
  const Result chars = run({"stats", "--data", dir / "u.jsonl", "--graph", dir / "u.schema.json", "--attribute",
                            "characteristic"});
  CHECK(chars.code == 0);
  CHECK(nlohmann::json::parse(chars.out)["information_gain_bits"].get<double>() >= 0.0);
}

TEST_CASE("gradcheck passes and exits 0") {
  const Result r = run({"gradcheck", "--seed", "7", "--instances", "3"});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["passed"] == true);
  CHECK(j["max_rel_error"].get<double>() <= 1e-4);
  CHECK(j["reports"].size() == 2);
}

TEST_CASE("synth, train, eval and infer are reproducible") {
  TempDir dir;
  std::ofstream(dir / "synth.json") << R"({"samples":400,"feature_dim":16})";
  std::ofstream(dir / "train.json") << R"({"epochs":4,"lr":0.001,"hidden_dim":8})";
  auto pipeline = [&](const std::string& tag, const std::string& threads) {
    const std::string data = dir / (tag + ".jsonl"), schema = dir / (tag + ".schema.json");
    const std::string ckpt = dir / (tag + ".ckpt.json"), metrics = dir / (tag + ".metrics.csv");
    REQUIRE(run({"synth", "--config", dir / "synth.json", "--out", data, "--seed", "21"}).code == 0);
    REQUIRE(run({"--threads", threads, "train", "--data", data, "--graph", schema, "--config", dir / "train.json",
                 "--out", ckpt, "--seed", "5"})
                .code == 0);
    REQUIRE(run({"eval", "--ckpt", ckpt, "--data", data, "--graph", schema, "--format", "csv", "--out", metrics})
                .code == 0);
    const Result inf = run({"infer", "--ckpt", ckpt, "--graph", schema, "--features", data});
    REQUIRE(inf.code == 0);
    return std::array<std::string, 5>{slurp(data), slurp(ckpt + ".history.csv"), slurp(ckpt), slurp(metrics), inf.out};
  };
  const auto a = pipeline("a", "1");
  const auto b = pipeline("b", "3");
  CHECK(a[0] == b[0]);
  CHECK(a[1] == b[1]);
  CHECK(a[2] == b[2]);
  CHECK(a[3] == b[3]);
  CHECK(a[4] == b[4]);
  CHECK(a[3].rfind("split,samples,dynasty_oa,period_oa,auprc_dynasty,auprc_period\ntest,200,", 0) == 0);

  // infer: one line per record, marginals of exclusive siblings sum to at most 1
  std::istringstream lines(a[4]);
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    const auto& m = j["marginals"];
    const double d = m["Shang"].get<double>() + m["Western Zhou"].get<double>() + m["Spring and Autumn"].get<double>() +
                     m["Warring States"].get<double>();
    CHECK(d <= 1.0 + 1e-12);
    CHECK(m["Early Shang"].get<double>() <= m["Shang"].get<double>() + 1e-12);
    ++n;
  }
  CHECK(n == 400);

  const Result json = run({"eval", "--ckpt", dir / "a.ckpt.json", "--data", dir / "a.jsonl", "--graph",
                           dir / "a.schema.json", "--split", "val", "--consistent"});
  REQUIRE(json.code == 0);
  const auto j = nlohmann::json::parse(json.out);
  CHECK(j["metrics"]["samples"] == 40);
  CHECK(j["dynasty_rule"] == "period-parent");
}
