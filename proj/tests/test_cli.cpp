#include <doctest.h>

#include "elliptica/core.hpp"
#include "elliptica/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <sys/wait.h>

using namespace elliptica;
namespace fs = std::filesystem;

namespace {

const std::set<std::string> kIds = {"solve",  "eig",        "freq",     "threeball", "doubling",     "harnack",
                                    "perron", "parametrix", "carleman", "cauchy",    "observability"};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  fs::path d = fs::temp_directory_path() / ("elliptica_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  fs::path p = dir / "config.json";
  std::ofstream(p, std::ios::binary) << text;
  return p;
}

// runs the CLI and returns its exit status; stdout and stderr land in dir
int cli(const std::string& args, const fs::path& dir) {
  std::string cmd = std::string(ELLIPTICA_CLI_PATH) + " " + args + " > " + (dir / "stdout.txt").string() + " 2> " +
                    (dir / "stderr.txt").string();
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("catalog lists every experiment with a reference and valid defaults") {
  std::set<std::string> ids;
  for (const auto& s : experiment_catalog()) {
    ids.insert(s.id);
    CHECK_FALSE(s.reference.empty());
    Json cfg = s.defaults;
    cfg["experiment"] = s.id;
    Json resolved = resolve_parameters(cfg);
    for (const auto& [k, v] : s.defaults.items()) CHECK(resolved[k] == v);
    if (s.stochastic) CHECK(s.defaults.contains("seed"));
  }
  CHECK(ids == kIds);
  std::string text = catalog_text();
  for (const auto& id : kIds) CHECK(text.find(id + "\n") != std::string::npos);
  CHECK(text.find("reproduces:") != std::string::npos);
}

TEST_CASE("config validation") {
  CHECK(code_of([] { parse_config("{not json"); }) == ErrorCode::ConfigParseError);
  CHECK(code_of([] { parse_config("[1, 2]"); }) == ErrorCode::ConfigParseError);
  CHECK(code_of([] { resolve_parameters(Json::object()); }) == ErrorCode::ConfigParseError);
  try {
    resolve_parameters(parse_config(R"({"experiment":"eigen"})"));
    FAIL("expected ConfigParseError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConfigParseError);
    for (const auto& id : kIds) CHECK(std::string(e.what()).find(id) != std::string::npos);
  }
  CHECK(code_of([] { resolve_parameters(parse_config(R"({"experiment":"eig","hh":0.1})")); }) ==
        ErrorCode::ConfigParseError);
  CHECK(code_of([] { resolve_parameters(parse_config(R"({"experiment":"eig","h":"small"})")); }) ==
        ErrorCode::ConfigParseError);
  CHECK(code_of([] { resolve_parameters(parse_config(R"({"experiment":"eig","k":2.5})")); }) ==
        ErrorCode::ConfigParseError);
  CHECK(code_of([] { resolve_parameters(parse_config(R"({"experiment":"eig","h":-0.1})")); }) ==
        ErrorCode::ConfigParseError);
  CHECK(code_of([] { resolve_parameters(parse_config(R"({"experiment":"cauchy","seed":-3})")); }) ==
        ErrorCode::ConfigParseError);
  CHECK(code_of([] { run_experiment(parse_config(R"({"experiment":"eig","domain":"torus"})")); }) ==
        ErrorCode::ConfigParseError);

  // the seed flag overrides the config seed of stochastic experiments
  auto p = resolve_parameters(parse_config(R"({"experiment":"cauchy","seed":3})"), 11);
  CHECK(p["seed"] == 11);
  auto q = resolve_parameters(parse_config(R"({"experiment":"eig"})"), 11);
  CHECK_FALSE(q.contains("seed"));
}

TEST_CASE("freq on a homogeneous cubic gives N = 3") {
  auto out = run_experiment(parse_config(R"({"experiment":"freq","u":"harmonic:deg3","center":[0,0]})"));
  CHECK(out.passed());
  const auto& r = out.report;
  CHECK(r["schema"] == "1");
  CHECK(r["experiment"] == "freq");
  REQUIRE(r["results"]["N"].size() == 20);
  for (const auto& N : r["results"]["N"]) CHECK(std::abs(N.get<double>() - 3.0) <= 1e-6);
  CHECK(r["assertions"].size() == 2);
  for (const auto& a : r["assertions"]) CHECK_FALSE(a["invariant"].get<std::string>().empty());
  REQUIRE(out.files.size() == 1);
  CHECK(out.files[0].first == "frequency.csv");
}

TEST_CASE("small experiments pass and are deterministic") {
  for (const char* cfg : {R"({"experiment":"doubling"})", R"({"experiment":"harnack"})",
                          R"({"experiment":"eig","domain":"interval","h":0.015625,"k":3})",
                          R"({"experiment":"solve","h":0.25,"refinements":2})",
                          R"({"experiment":"observability","h":0.01,"k":5})",
                          R"({"experiment":"freq","u":[[1,"re:2"],[0.3,"im:1"],[2,"const"]],"center":[0.1,0.2]})"}) {
    CAPTURE(cfg);
    auto a = run_experiment(parse_config(cfg));
    auto b = run_experiment(parse_config(cfg));
    CHECK(a.passed());
    CHECK(a.report.dump() == b.report.dump());
    for (size_t i = 0; i < a.files.size(); ++i) CHECK(a.files[i].second == b.files[i].second);
  }
}

TEST_CASE("CLI list, run and exit codes") {
  auto dir = scratch("list");
  REQUIRE(cli("list", dir) == 0);
  std::string listing = slurp(dir / "stdout.txt");
  for (const auto& id : kIds) CHECK(listing.find(id) != std::string::npos);

  // unknown id: exit 1 naming the valid ids
  auto bad = scratch("bad");
  auto cfg = write_config(bad, R"({"experiment":"nope"})");
  CHECK(cli("run --config " + cfg.string() + " --out " + (bad / "out").string(), bad) == 1);
  std::string diag = slurp(bad / "stderr.txt");
  CHECK(diag.find("ConfigParseError") != std::string::npos);
  for (const auto& id : kIds) CHECK(diag.find(id) != std::string::npos);

  CHECK(cli("run --config " + (bad / "missing.json").string(), bad) == 1);
  CHECK(cli("frobnicate", bad) == 1);

  // passing run: report, metadata and CSVs written; byte-identical report on rerun
  auto ok = scratch("ok");
  cfg = write_config(ok, R"({"experiment":"eig","domain":"unit_square","h":0.03125,"k":4})");
  REQUIRE(cli("run --config " + cfg.string() + " --out " + (ok / "a").string(), ok) == 0);
  REQUIRE(cli("run --config " + cfg.string() + " --out " + (ok / "b").string(), ok) == 0);
  std::string rep = slurp(ok / "a" / "report.json");
  CHECK(rep == slurp(ok / "b" / "report.json"));
  Json report = Json::parse(rep);
  CHECK(report["schema"] == "1");
  CHECK(report["passed"] == true);
  CHECK(std::abs(report["results"]["eigenvalues"][0].get<double>() / (2 * kPi * kPi) - 1) <= 0.01);
  Json meta = Json::parse(slurp(ok / "a" / "metadata.json"));
  CHECK(meta.contains("started_utc"));
  CHECK(meta.contains("elapsed_seconds"));
  CHECK_FALSE(report.contains("elapsed_seconds"));

  std::string csv = slurp(ok / "a" / "eigenvalues.csv");
  CHECK(csv.rfind("index,computed,exact,relative_error,residual\n", 0) == 0);
  CHECK(csv.find('\r') == std::string::npos);
  CHECK(csv.back() == '\n');
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);

  // failing assertion: exit 2 with the report still written
  auto fail = scratch("fail");
  cfg = write_config(fail, R"({"experiment":"eig","h":0.25,"k":4})");
  CHECK(cli("run --config " + cfg.string() + " --out " + (fail / "out").string(), fail) == 2);
  Json failed = Json::parse(slurp(fail / "out" / "report.json"));
  CHECK(failed["passed"] == false);
  CHECK(slurp(fail / "stdout.txt").find("FAIL ") != std::string::npos);

  // seed lands in metadata, not in the deterministic report of a seedless experiment
  auto seeded = scratch("seeded");
  cfg = write_config(seeded, R"({"experiment":"harnack"})");
  CHECK(cli("run --config " + cfg.string() + " --out " + (seeded / "out").string() + " --seed 7", seeded) == 0);
  CHECK(Json::parse(slurp(seeded / "out" / "metadata.json"))["seed"] == 7);
}
