#include <filesystem>
#include <fstream>
#include <string>

#include <catch2/catch_amalgamated.hpp>

#include "smdiag/scenario.hpp"

using namespace smdiag;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const char* tag)
      : path(std::filesystem::temp_directory_path() / tag) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

const char* kTinyCrossing =
    "scenario = crossing-lt\n"
    "master_seed = 7\n"
    "replicates = 24\n"
    "horizon = 0.5\n"
    "steps = 400\n"
    "delta = 0.08\n"
    "bandwidth = 0.1\n"
    "tol.window_lo = 0.0\n"
    "tol.window_hi = 10.0\n";

}  // namespace

TEST_CASE("the scenario registry lists every workload") {
  const auto& reg = scenario_registry();
  REQUIRE(reg.size() == 8);
  for (const char* name :
       {"bm-dc", "integrated-bm", "integrated-fbm", "crossing-lt", "rogers-prep",
        "rogers-pvar", "flow-median", "lamperti-check"})
    REQUIRE(reg.count(name) == 1);
}

TEST_CASE("unknown scenario names are rejected before any work") {
  Config cfg = Config::from_string("scenario = no-such-thing\nmaster_seed = 1\n");
  RunContext ctx;
  REQUIRE_THROWS_AS(run_scenario(cfg, ctx), UnknownScenarioError);
}

TEST_CASE("misspelled keys fail loudly") {
  Config cfg = Config::from_string(std::string(kTinyCrossing) + "tol.wndow_lo = 0\n");
  TempDir tmp("smdiag_scn_badkey");
  RunContext ctx;
  ctx.out_dir = tmp.path.string();
  REQUIRE_THROWS_AS(run_scenario(cfg, ctx), std::invalid_argument);
}

TEST_CASE("frozen coefficient leaves every diagnostic at zero") {
  Config cfg = Config::from_string(
      "scenario = flow-median\n"
      "master_seed = 5\n"
      "sigma = zero\n"
      "horizon = 0.5\n"
      "tail.steps = 400\n"
      "spaceqv.steps = 400\n"
      "spaceqv.dx = 0.01\n"
      "zeroenergy.seeds = 2\n"
      "zeroenergy.steps = 256\n"
      "zeroenergy.dx = 0.01\n"
      "zeroenergy.strides = 64, 16, 4\n"
      "tv.steps = 400\n"
      "tv.grids = 2\n"
      "tv.coarse_dx = 0.01\n");
  TempDir tmp("smdiag_scn_zero");
  RunContext ctx;
  ctx.out_dir = tmp.path.string();
  ScenarioResult res = run_scenario(cfg, ctx);
  REQUIRE(res.checks.size() == 4);
  for (const auto& c : res.checks) {
    INFO(c.name);
    REQUIRE(c.pass);
    REQUIRE(c.value == 0.0);
  }
  REQUIRE(res.all_pass());
  std::string summary = render_summary(res);
  REQUIRE(summary.find("RESULT PASS") != std::string::npos);
  REQUIRE(summary.find("CHECK tail-residual PASS") != std::string::npos);
  auto file = write_summary(res, ctx);
  REQUIRE(slurp(file) == summary);
}

TEST_CASE("invalid coefficient mode is rejected") {
  Config cfg = Config::from_string(
      "scenario = flow-median\nmaster_seed = 5\nsigma = tentish\n");
  TempDir tmp("smdiag_scn_badsigma");
  RunContext ctx;
  ctx.out_dir = tmp.path.string();
  REQUIRE_THROWS_AS(run_scenario(cfg, ctx), std::invalid_argument);
}

TEST_CASE("identical settings reproduce identical bytes at any thread count") {
  auto run_once = [&](const char* tag, int threads) {
    TempDir tmp(tag);
    Config cfg = Config::from_string(kTinyCrossing);
    RunContext ctx;
    ctx.out_dir = tmp.path.string();
    ctx.threads = threads;
    ScenarioResult res = run_scenario(cfg, ctx);
    write_summary(res, ctx);
    return std::make_pair(render_summary(res),
                          slurp(tmp.path / "crossing-lt" / "estimates.csv"));
  };
  auto [sum1, csv1] = run_once("smdiag_scn_det1", 1);
  auto [sum2, csv2] = run_once("smdiag_scn_det2", 1);
  auto [sum3, csv3] = run_once("smdiag_scn_det3", 3);
  REQUIRE(sum1 == sum2);
  REQUIRE(sum1 == sum3);
  REQUIRE(csv1 == csv2);
  REQUIRE(csv1 == csv3);
  REQUIRE(sum1.find("CHECK tanaka-mean PASS") != std::string::npos);
}

TEST_CASE("summaries refuse to render without checks") {
  ScenarioResult res;
  res.name = "empty";
  REQUIRE_THROWS(render_summary(res));
}
