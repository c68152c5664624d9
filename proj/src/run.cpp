#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include <json.hpp>

#include "stackmf/cli.hpp"

namespace stackmf::cli {

using nlohmann::json;

namespace {

const char* kCsvHeader =
    "scenario,N,reps,gap_mean,gap_stderr,quantity,slope,slope_stderr,predicted_exponent,verdict\n";

// Shortest text that reads back to the same double; empty for NaN.
std::string fmt(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_row(const std::string& scenario, const std::string& N, std::size_t reps,
                    double mean, double se, const std::string& quantity, double slope,
                    double slope_se, double predicted, const std::string& verdict) {
  return scenario + "," + N + "," + std::to_string(reps) + "," + fmt(mean) + "," + fmt(se) +
         "," + quantity + "," + fmt(slope) + "," + fmt(slope_se) + "," + fmt(predicted) + "," +
         verdict + "\n";
}

json estimate_json(const rates::Estimate& e) {
  return {{"mean", e.mean}, {"se", e.se}, {"count", e.count}};
}

// NaN is not valid JSON; write it as null.
json number(double v) { return std::isnan(v) ? json(nullptr) : json(v); }

struct Outcome {
  std::string verdict = "unchecked";
  std::string csv = kCsvHeader;
  json report;
};

Outcome gap_outcome(const rates::GapReport& r, const std::string& kind) {
  Outcome o;
  o.verdict = r.verdict;
  json points = json::array();
  for (const auto& p : r.points) {
    o.csv += csv_row(r.scenario, std::to_string(p.N), p.reps, p.gap.mean, p.gap.se, r.quantity,
                     r.slope, r.slope_stderr, r.predicted_slope, r.verdict);
    points.push_back({{"N", p.N},
                      {"reps", p.reps},
                      {"leader", estimate_json(p.leader)},
                      {"follower", estimate_json(p.follower)},
                      {"w2", estimate_json(p.w2)},
                      {"gap", estimate_json(p.gap)}});
  }
  o.report = {{"scenario", r.scenario},
              {"kind", kind},
              {"quantity", r.quantity},
              {"reps", r.reps},
              {"points", points},
              {"slope_defined", r.slope_defined},
              {"slope", number(r.slope)},
              {"slope_stderr", number(r.slope_stderr)},
              {"r2", number(r.r2)},
              {"predicted_slope", number(r.predicted_slope)},
              {"predicted_rate", r.predicted_rate},
              {"verdict", r.verdict},
              {"fixed_point_failures", r.fixed_point_failures},
              {"explosions", r.explosions},
              {"coupling_violations", r.coupling_violations}};
  return o;
}

Outcome run_kind(const ScenarioConfig& cfg, std::size_t threads) {
  const auto& e = cfg.experiment;
  const auto model = build_model(cfg);
  const auto law = build_delay_law(cfg);
  const auto policies = build_policies(cfg);

  rates::ExperimentOptions o;
  o.reps = e.reps;
  o.seed = cfg.seed;
  o.threads = threads;
  o.fixed_point.K = e.K;
  o.fixed_point.tol = e.tol;
  o.fixed_point.max_iter = e.max_iter;
  o.fixed_point.damping = e.damping;
  o.partition_level = e.partition_level;
  o.regime = rates::regime_from_string(e.regime);
  o.assert_rate = e.assert_rate;
  o.slope_tolerance = e.slope_tolerance;
  o.upper_bound_only = e.upper_bound_only;
  o.scenario = cfg.name;

  if (e.kind == "state_gap") {
    return gap_outcome(rates::state_gap_experiment(model, policies, law, e.Ns, o), e.kind);
  }
  if (e.kind == "cost_gap") {
    return gap_outcome(rates::cost_gap_experiment(model, policies, law, e.Ns, o), e.kind);
  }
  if (e.kind == "w2_gap") {
    return gap_outcome(rates::wasserstein_gap_curve(model, policies, law, e.Ns, o), e.kind);
  }
  if (e.kind == "empirical_rate") {
    auto r = rates::empirical_rate_curve(static_cast<int>(model.n1), e.Ns, e.reps, cfg.seed,
                                         threads);
    r.scenario = cfg.name;
    if (e.assert_rate) rates::judge(r, e.slope_tolerance, e.upper_bound_only);
    return gap_outcome(r, e.kind);
  }

  Outcome out;
  if (e.kind == "eta") {
    const std::size_t step = e.step < 0 ? model.grid.steps() : static_cast<std::size_t>(e.step);
    const auto r = rates::eta_orthogonality(model, policies, law, e.N, step, o);
    if (e.assert_rate) {
      out.verdict = std::abs(r.ratio - 1.0) <= e.slope_tolerance ? "pass" : "fail";
    }
    const std::string N = std::to_string(r.N);
    out.csv += csv_row(cfg.name, N, e.reps, r.mean_square.mean, r.mean_square.se,
                       "eta_mean_square", NAN, NAN, NAN, out.verdict);
    out.csv += csv_row(cfg.name, N, e.reps, r.scaled_single.mean, r.scaled_single.se,
                       "eta_scaled_single", NAN, NAN, NAN, out.verdict);
    out.csv += csv_row(cfg.name, N, e.reps, r.ratio, NAN, "eta_ratio", NAN, NAN, 1.0, out.verdict);
    out.report = {{"scenario", cfg.name},
                  {"kind", e.kind},
                  {"N", r.N},
                  {"step", r.step},
                  {"reps", e.reps},
                  {"mean_square", estimate_json(r.mean_square)},
                  {"scaled_single", estimate_json(r.scaled_single)},
                  {"ratio", r.ratio},
                  {"fixed_point_failures", r.fixed_point_failures},
                  {"verdict", out.verdict}};
    return out;
  }
  if (e.kind == "holder") {
    const auto partition = rates::flow_partition(law, model, e.partition_level, 64);
    const auto r = meanfield::holder_exponent_estimate(model, policies, partition, e.deltas,
                                                       e.reps, cfg.seed, o.fixed_point);
    if (e.assert_rate) {
      out.verdict = r.flagged ? "undefined"
                    : std::abs(r.exponent - e.expected_exponent) <= e.slope_tolerance ? "pass"
                                                                                       : "fail";
    }
    for (std::size_t k = 0; k < r.gaps.size(); ++k) {
      out.csv += csv_row(cfg.name, "", e.reps, r.gaps[k], NAN,
                         "delay_gap@" + fmt(r.spacings[k]), r.exponent, r.exponent_stderr,
                         e.expected_exponent, out.verdict);
    }
    out.report = {{"scenario", cfg.name},
                  {"kind", e.kind},
                  {"reps", e.reps},
                  {"flagged", r.flagged},
                  {"exponent", r.exponent},
                  {"exponent_stderr", r.exponent_stderr},
                  {"constant", r.constant},
                  {"spacings", r.spacings},
                  {"gaps", r.gaps},
                  {"expected_exponent", e.expected_exponent},
                  {"verdict", out.verdict}};
    return out;
  }
  // epsilon_nash
  std::vector<dynamics::PolicySet> devs, leads;
  for (const auto& v : e.deviation_library) {
    dynamics::PolicySet p;
    p.follower = v;
    devs.push_back(p);
  }
  for (const auto& v : e.leader_library) {
    dynamics::PolicySet p;
    p.leader = v;
    leads.push_back(p);
  }
  rates::CertifyOptions co;
  co.reps = e.reps;
  co.seed = cfg.seed;
  co.threads = threads;
  co.kappa = e.kappa;
  co.gamma = e.gamma;
  const auto r = rates::epsilon_nash_certify(model, policies, devs, leads, law, e.N, co);
  if (e.assert_rate) {
    out.verdict = r.epsilon <= e.epsilon_tolerance && r.leader_epsilon <= e.epsilon_tolerance
                      ? "pass"
                      : "fail";
  }
  const std::string N = std::to_string(r.N);
  auto arms = [&](const std::vector<rates::DeviationOutcome>& list, const std::string& who) {
    json a = json::array();
    for (std::size_t k = 0; k < list.size(); ++k) {
      const auto& d = list[k];
      out.csv += csv_row(cfg.name, N, r.reps, d.advantage.mean, d.advantage.se,
                         who + "_advantage_" + std::to_string(k), NAN, NAN, NAN, out.verdict);
      a.push_back({{"cost", estimate_json(d.cost)},
                   {"advantage", estimate_json(d.advantage)},
                   {"l2_norm", d.l2_norm}});
    }
    return a;
  };
  const auto followers = arms(r.deviations, "follower");
  const auto leaders = arms(r.leader_deviations, "leader");
  out.csv += csv_row(cfg.name, N, r.reps, r.epsilon, NAN, "epsilon", NAN, NAN, NAN, out.verdict);
  out.csv += csv_row(cfg.name, N, r.reps, r.leader_epsilon, NAN, "leader_epsilon", NAN, NAN, NAN,
                     out.verdict);
  out.report = {{"scenario", cfg.name},
                {"kind", e.kind},
                {"N", r.N},
                {"reps", r.reps},
                {"profile_cost", estimate_json(r.profile_cost)},
                {"leader_profile_cost", estimate_json(r.leader_profile_cost)},
                {"deviations", followers},
                {"leader_deviations", leaders},
                {"epsilon", r.epsilon},
                {"leader_epsilon", r.leader_epsilon},
                {"common_random_numbers", r.common_random_numbers},
                {"profile_holder_constant", r.profile_holder_constant},
                {"verdict", out.verdict}};
  return out;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + p.string());
  out << text;
}

std::string hex(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

}  // namespace

RunResult run_experiment(const ScenarioConfig& input, const RunOptions& options,
                         std::ostream& log) {
  ScenarioConfig cfg = input;
  if (options.seed) cfg.seed = *options.seed;
  if (options.output_dir) cfg.output_dir = *options.output_dir;
  RunResult res;
  res.output_dir = cfg.output_dir;
  if (const auto errors = validate(cfg); !errors.empty()) throw ConfigError(errors);

  const auto& e = cfg.experiment;
  if (options.dry_run) {
    log << "scenario    " << cfg.name << "\n"
        << "experiment  " << e.kind << " (regime " << e.regime << ")\n";
    if (e.kind == "eta" || e.kind == "epsilon_nash") {
      log << "N           " << e.N << "\n";
    } else if (e.kind != "holder") {
      log << "Ns         ";
      for (auto n : e.Ns) log << " " << n;
      log << "\n";
    }
    log << "reps        " << e.reps << "\n"
        << "particles   " << e.K << " per delay atom\n"
        << "seed        " << cfg.seed << "\n"
        << "threads     " << options.threads << "\n"
        << "assertions  " << (e.assert_rate ? "on" : "off") << "\n"
        << "output      " << cfg.output_dir << "\n"
        << "config hash " << hex(config_hash(cfg)) << "\n";
    res.verdict = "dry-run";
    return res;
  }

  std::filesystem::create_directories(res.output_dir);
  json manifest = {{"config_hash", hex(config_hash(cfg))},
                   {"seed", cfg.seed},
                   {"stackmf_version", STACKMF_VERSION},
                   {"json_version", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                        std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                        std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                   {"compiler", __VERSION__},
                   {"cplusplus", __cplusplus},
                   {"config", json::parse(to_json(cfg))}};
  try {
    auto out = run_kind(cfg, options.threads);
    res.verdict = out.verdict;
    res.csv = std::move(out.csv);
    out.report["status"] = "valid";
    res.report = out.report.dump(2) + "\n";
    res.exit_code = e.assert_rate && res.verdict != "pass" ? exit_assertion : exit_ok;
  } catch (const ExperimentInvalid& err) {
    res.verdict = "invalid";
    res.reason = err.reason();
    res.exit_code = exit_invalid;
    res.csv = kCsvHeader;
    res.report = json({{"scenario", cfg.name},
                       {"kind", e.kind},
                       {"status", "invalid"},
                       {"reason", err.reason()},
                       {"message", err.what()}})
                     .dump(2) +
                 "\n";
  } catch (const SimulationDiverged& err) {
    res.verdict = "invalid";
    res.reason = "explosions";
    res.exit_code = exit_invalid;
    res.csv = kCsvHeader;
    res.report = json({{"scenario", cfg.name},
                       {"kind", e.kind},
                       {"status", "invalid"},
                       {"reason", "explosions"},
                       {"message", err.what()}})
                     .dump(2) +
                 "\n";
  }
  manifest["verdict"] = res.verdict;
  manifest["exit_code"] = res.exit_code;
  write_file(res.output_dir / "results.csv", res.csv);
  write_file(res.output_dir / "report.json", res.report);
  write_file(res.output_dir / "manifest.json", manifest.dump(2) + "\n");
  log << cfg.name << ": " << res.verdict;
  if (!res.reason.empty()) log << " (" << res.reason << ")";
  log << ", results in " << res.output_dir.string() << "\n";
  return res;
}

}  // namespace stackmf::cli
