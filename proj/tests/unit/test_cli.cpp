#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "stackmf/cli.hpp"

using namespace stackmf;
using namespace stackmf::cli;

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("stackmf_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool mentions(const std::vector<std::string>& v, const std::string& needle) {
  for (const auto& s : v) {
    if (s.find(needle) != std::string::npos) return true;
  }
  return false;
}

// A fast version of the degenerate-delay preset.
ScenarioConfig quick_config() {
  auto c = find_preset("degenerate-delay-n1-1").config;
  c.experiment.Ns = {4, 8, 16};
  c.experiment.reps = 50;
  c.experiment.K = 128;
  c.model.T = 0.5;
  return c;
}

}  // namespace

TEST_CASE("configs round-trip through JSON") {
  for (const auto& p : presets()) {
    CAPTURE(p.name);
    CHECK(validate(p.config).empty());
    CHECK(parse_config(to_json(p.config)) == p.config);
  }
  auto c = find_preset("epsilon-nash").config;
  c.experiment.kappa = std::numeric_limits<double>::infinity();
  c.policy.deviator = dynamics::LinearFeedback{0.1, 0.2, 0.3, 0.4, 0.5};
  const auto path = scratch("roundtrip.json");
  save_config(c, path);
  CHECK(load_config(path) == c);
  fs::remove(path);
}

TEST_CASE("preset library covers every regime") {
  std::set<std::string> regimes, kinds;
  for (const auto& p : presets()) {
    regimes.insert(p.config.experiment.regime);
    kinds.insert(p.config.experiment.kind);
    if (p.config.delay.kind == "discrete") CHECK(p.config.delay.atoms.size() == 2);
  }
  for (const char* r : {"degenerate_delta", "discrete_delta", "general", "sigma0_control_free",
                        "linear_in_measure"}) {
    CHECK(regimes.count(r) == 1);
  }
  CHECK(kinds.count("epsilon_nash") == 1);
  CHECK(find_preset("uniform-delay").config.delay.kind == "uniform");
  CHECK_THROWS_AS(find_preset("nope"), ValidationError);
}

TEST_CASE("validation reports every violation") {
  auto c = find_preset("discrete-two-atom").config;
  c.model.q = 3.0;
  c.model.h = 0.03;
  c.model.b = 0.1;
  c.delay.atoms = {0.05, 0.1};
  c.experiment.reps = 10;
  const auto v = validate(c);
  CHECK(mentions(v, "model.q"));
  CHECK(mentions(v, "does not divide b"));
  CHECK(mentions(v, "experiment.reps"));
  CHECK(v.size() >= 3);
  try {
    parse_config(to_json(c));
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(e.violations() == v);
  }

  // q <= 4 is fine once rate assertions are off.
  auto q2 = find_preset("discrete-two-atom").config;
  q2.model.q = 2.0;
  q2.experiment.assert_rate = false;
  CHECK(validate(q2).empty());
  q2.model.q = 1.5;
  CHECK(mentions(validate(q2), "model.q"));

  auto dims = q2;
  dims.model.q = 6.0;
  dims.model.d1 = 2;
  dims.delay.probs = {0.5, 0.6};
  dims.model.family = "cubic";
  const auto dv = validate(dims);
  CHECK(mentions(dv, "model.d1"));
  CHECK(mentions(dv, "delay"));
  CHECK(mentions(dv, "model.family"));
}

TEST_CASE("parse errors carry a position") {
  try {
    parse_config("{\n  \"name\": ,\n}");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
    CHECK(e.column() == 11);
  }
  try {
    parse_config(R"({"name": "x", "colour": 1, "model": {"T": "long"}})");
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(mentions(e.violations(), "colour: unknown field"));
    CHECK(mentions(e.violations(), "model.T: wrong type"));
  }
  // Missing fields take their defaults.
  const auto d = parse_config(R"({"name": "defaults"})");
  CHECK(d.experiment.kind == "state_gap");
}

TEST_CASE("runs write deterministic artifacts") {
  const auto dir1 = scratch("run1"), dir2 = scratch("run2");
  std::ostringstream log;
  auto cfg = quick_config();
  RunOptions o;
  o.output_dir = dir1.string();
  const auto a = run_experiment(cfg, o, log);
  CHECK((a.exit_code == exit_ok || a.exit_code == exit_assertion));
  CHECK((a.verdict == "pass" || a.verdict == "fail"));
  for (const char* f : {"results.csv", "report.json", "manifest.json"}) {
    CHECK(fs::exists(dir1 / f));
  }
  const auto csv = slurp(dir1 / "results.csv");
  CHECK(csv.rfind("scenario,N,reps,gap_mean,gap_stderr,quantity,slope,slope_stderr,"
                  "predicted_exponent,verdict\n",
                  0) == 0);
  CHECK(csv == a.csv);
  CHECK(slurp(dir1 / "manifest.json").find("config_hash") != std::string::npos);

  o.output_dir = dir2.string();
  o.threads = 3;
  const auto b = run_experiment(cfg, o, log);
  CHECK(slurp(dir2 / "results.csv") == csv);
  CHECK(slurp(dir2 / "report.json") == slurp(dir1 / "report.json"));

  // A different seed changes the numbers.
  o.seed = 99;
  const auto c = run_experiment(cfg, o, log);
  CHECK(c.csv != csv);
  fs::remove_all(dir1);
  fs::remove_all(dir2);
}

TEST_CASE("dry runs write nothing") {
  const auto dir = scratch("dry");
  std::ostringstream log;
  RunOptions o;
  o.output_dir = dir.string();
  o.dry_run = true;
  const auto r = run_experiment(find_preset("linear-in-measure").config, o, log);
  CHECK(r.exit_code == exit_ok);
  CHECK(r.verdict == "dry-run");
  CHECK_FALSE(fs::exists(dir));
  CHECK(log.str().find("config hash") != std::string::npos);
}

TEST_CASE("invalid experiments exit with a reason") {
  auto cfg = quick_config();
  cfg.model.family = "linear_quadratic";
  cfg.model.params = {};
  cfg.model.params.a1 = 1e308;
  cfg.model.L = 1e308;
  cfg.model.follower_initial = "dirac";
  cfg.model.follower_center = 1.0;
  const auto dir = scratch("invalid");
  std::ostringstream log;
  RunOptions o;
  o.output_dir = dir.string();
  const auto r = run_experiment(cfg, o, log);
  CHECK(r.exit_code == exit_invalid);
  CHECK(r.reason == "explosions");
  CHECK(slurp(dir / "report.json").find("\"reason\": \"explosions\"") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("failed assertions exit with code 2") {
  auto cfg = quick_config();
  cfg.experiment.slope_tolerance = 1e-9;
  const auto dir = scratch("assert");
  std::ostringstream log;
  RunOptions o;
  o.output_dir = dir.string();
  const auto r = run_experiment(cfg, o, log);
  CHECK(r.verdict == "fail");
  CHECK(r.exit_code == exit_assertion);
  fs::remove_all(dir);
}
