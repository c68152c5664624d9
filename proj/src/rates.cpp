#include "stackmf/rates.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>

#include "stackmf/errors.hpp"
#include "stackmf/parallel.hpp"

namespace stackmf::rates {

using dynamics::DelayLaw;
using dynamics::ModelSpec;
using dynamics::NoiseRecord;
using dynamics::PolicySet;
using dynamics::TrajectoryBundle;
using meanfield::ConditionalLawFlow;
using meanfield::DelayAtom;

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s;
}

Estimate to_estimate(const stats::RunningStats& s) {
  return {s.mean(), s.stderr_of_mean(), s.count()};
}

std::string fraction(double num, double den) {
  return std::to_string(static_cast<long>(num)) + "/" + std::to_string(static_cast<long>(den));
}

void check_grid(std::span<const std::size_t> Ns, std::size_t reps, std::size_t min_N) {
  if (Ns.size() < 3) throw ParameterError("rate experiments need at least 3 values of N");
  if (Ns.front() < min_N) {
    throw ParameterError("rate experiments need N >= " + std::to_string(min_N));
  }
  for (std::size_t j = 1; j < Ns.size(); ++j) {
    if (Ns[j] <= Ns[j - 1]) throw ParameterError("N values must be strictly increasing");
  }
  if (reps < 50) throw ParameterError("rate experiments need at least 50 replications");
}

bool same_partition(const std::vector<DelayAtom>& a, const std::vector<DelayAtom>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k].delay != b[k].delay || a[k].weight != b[k].weight) return false;
  }
  return true;
}

// Flows of one replication, shared between values of N with the same partition.
class FlowCache {
 public:
  FlowCache(const ModelSpec& model, const PolicySet& policies, NoiseRecord noise,
            const meanfield::FixedPointOptions& options)
      : model_(model), policies_(policies), noise_(noise), options_(options) {}

  const ConditionalLawFlow& get(const std::vector<DelayAtom>& partition) {
    for (const auto& [p, flow] : flows_) {
      if (same_partition(p, partition)) return flow;
    }
    auto [flow, report] =
        meanfield::solve_conditional_law(model_, policies_, partition, noise_, options_);
    if (!report.converged) ++failures_;
    flows_.emplace_back(partition, std::move(flow));
    return flows_.back().second;
  }
  std::size_t failures() const noexcept { return failures_; }
  std::size_t solved() const noexcept { return flows_.size(); }

 private:
  const ModelSpec& model_;
  const PolicySet& policies_;
  NoiseRecord noise_;
  meanfield::FixedPointOptions options_;
  std::vector<std::pair<std::vector<DelayAtom>, ConditionalLawFlow>> flows_;
  std::size_t failures_ = 0;
};

// Mean over followers sharing a snapped delay, keyed by the delay in steps.
using Grouped = std::map<std::size_t, double>;

Grouped group_by_delay(const TrajectoryBundle& b, const std::vector<double>& values) {
  std::map<std::size_t, std::pair<double, std::size_t>> acc;
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto& slot = acc[b.grid.delay_steps(b.delays[i])];
    slot.first += values[i];
    ++slot.second;
  }
  Grouped out;
  for (const auto& [key, v] : acc) out[key] = v.first / static_cast<double>(v.second);
  return out;
}

struct RepOutcome {
  bool exploded = false;
  std::size_t flows = 0;
  std::size_t fp_failures = 0;
  std::size_t violations = 0;
  std::vector<double> leader;
  std::vector<Grouped> follower;
  std::vector<double> w2;
};

enum class Mode { state, cost, w2 };

std::vector<double> replication_delays(const DelayLaw& law, const ModelSpec& model, std::size_t n,
                                       const ExperimentOptions& o, std::uint32_t r) {
  return dynamics::snap_delays_to_grid(dynamics::sample_delays(law, n, o.seed, r), model.grid);
}

measures::DiscreteMeasure follower_cloud(const TrajectoryBundle& b, std::size_t s,
                                         std::size_t first, std::size_t cap) {
  const std::size_t n = b.N - first, n1 = b.n1;
  const std::size_t kept = std::min(n, cap);
  std::vector<double> coords;
  coords.reserve(kept * n1);
  for (std::size_t j = 0; j < kept; ++j) {
    const auto x = b.follower(first + j * n / kept, s);
    coords.insert(coords.end(), x.begin(), x.end());
  }
  return measures::DiscreteMeasure::uniform(n1, std::move(coords));
}

// Synchronous coupling and leave-one-out inequalities at the terminal step.
std::size_t coupling_checks(const TrajectoryBundle& y, const TrajectoryBundle& x) {
  const std::size_t s = y.grid.steps(), N = y.N;
  const auto ey = follower_cloud(y, s, 0, N);
  const auto ex = follower_cloud(x, s, 0, N);
  double path = 0.0;
  for (std::size_t i = 0; i < N; ++i) path += sq_dist(y.follower(i, s), x.follower(i, s));
  path /= static_cast<double>(N);
  std::size_t bad = 0;
  try {
    if (measures::w2_squared(ey, ex) > path + 1e-10) ++bad;
    const auto loo = follower_cloud(x, s, 1, N);
    double dirac = 0.0;
    for (std::size_t j = 1; j < N; ++j) dirac += sq_dist(x.follower(0, s), x.follower(j, s));
    dirac /= static_cast<double>(N - 1);
    if (measures::w2_squared(ex, loo) > dirac / static_cast<double>(N) + 1e-10) ++bad;
  } catch (const CapacityError&) {
  }
  return bad > 0 ? 1 : 0;
}

RepOutcome run_replication(const ModelSpec& model, const PolicySet& policies, const DelayLaw& law,
                           std::span<const std::size_t> Ns, const ExperimentOptions& o,
                           std::uint32_t r, Mode mode) {
  RepOutcome out;
  const NoiseRecord noise{o.seed, r};
  FlowCache cache(model, policies, noise, o.fixed_point);
  const auto delays = replication_delays(law, model, Ns.back(), o, r);
  const std::size_t nt = model.grid.steps();
  // Full z in one dimension; per-step measures are reused across N.
  std::map<const ConditionalLawFlow*, std::vector<measures::DiscreteMeasure>> z_cache;
  try {
    for (const std::size_t N : Ns) {
      const auto& flow = cache.get(flow_partition(law, model, o.partition_level, N));
      if (mode == Mode::w2) {
        const std::span<const double> d(delays.data(), N - 1);
        const auto x = meanfield::simulate_limit_pair(model, policies, flow, noise, d);
        auto& zs = z_cache[&flow];
        if (zs.empty()) {
          for (std::size_t s = 0; s < nt; ++s) {
            zs.push_back(model.n1 == 1 ? flow.measure_at(s)
                                       : flow.subsampled_measure_at(s, o.w2_subsample));
          }
        }
        double integral = 0.0;
        for (std::size_t s = 0; s < nt; ++s) {
          const auto emp = follower_cloud(x, s, 0, model.n1 == 1 ? x.N : o.w2_subsample);
          integral += model.grid.h() * measures::w2_squared(emp, zs[s]);
        }
        out.w2.push_back(integral);
        continue;
      }
      const std::span<const double> d(delays.data(), N);
      const auto y = dynamics::simulate_nplayer_with_delays(model, policies, d, noise);
      const auto x = meanfield::simulate_limit_pair(model, policies, flow, noise, d);
      std::vector<double> per_follower(N, 0.0);
      if (mode == Mode::state) {
        double lead = 0.0;
        for (std::size_t s = 0; s <= nt; ++s) {
          lead = std::max(lead, sq_dist(y.leader_forward(s), x.leader_forward(s)));
          for (std::size_t i = 0; i < N; ++i) {
            per_follower[i] = std::max(per_follower[i], sq_dist(y.follower(i, s), x.follower(i, s)));
          }
        }
        out.leader.push_back(lead);
        if (o.check_coupling) out.violations += coupling_checks(y, x);
      } else {
        const auto cy = dynamics::evaluate_costs_nplayer(y, model);
        const auto cx = meanfield::evaluate_costs_limit(x, model, flow);
        out.leader.push_back(std::abs(cy.leader - cx.leader));
        for (std::size_t i = 0; i < N; ++i) {
          per_follower[i] = std::abs(cy.followers[i] - cx.followers[i]);
        }
      }
      out.follower.push_back(group_by_delay(y, per_follower));
    }
  } catch (const SimulationDiverged&) {
    out.exploded = true;
  }
  out.flows = cache.solved();
  out.fp_failures = cache.failures();
  return out;
}

double predicted_slope_for(const ModelSpec& model, const ExperimentOptions& o, Mode mode,
                           std::string& rate) {
  const int n1 = static_cast<int>(model.n1);
  if (mode == Mode::w2) {
    rate = "f(N-1)";
    return -f_order(n1);
  }
  try {
    const auto p = predicted_exponent(n1, model.q, o.regime,
                                      mode == Mode::state ? Quantity::squared_state_gap
                                                          : Quantity::cost_gap);
    rate = p.rate;
    return -p.n_exponent;
  } catch (const ParameterError&) {
    rate = "none";
    return std::numeric_limits<double>::quiet_NaN();
  }
}

GapReport run_experiment(const ModelSpec& model, const PolicySet& policies, const DelayLaw& law,
                         std::span<const std::size_t> Ns, const ExperimentOptions& o, Mode mode) {
  model.validate();
  // The W2 curve also accepts N = 2: one follower against z.
  check_grid(Ns, o.reps, mode == Mode::w2 ? 2 : 4);
  std::vector<RepOutcome> outcomes(o.reps);
  parallel_for(o.reps, o.threads, [&](std::size_t r) {
    outcomes[r] = run_replication(model, policies, law, Ns, o, static_cast<std::uint32_t>(r), mode);
  });

  GapReport report;
  report.scenario = o.scenario;
  report.quantity = mode == Mode::state ? "squared_state_gap"
                    : mode == Mode::cost ? "cost_gap"
                                         : "w2_gap";
  report.reps = o.reps;
  std::size_t flows = 0;
  for (const auto& rep : outcomes) {
    flows += rep.flows;
    report.fixed_point_failures += rep.fp_failures;
    report.coupling_violations += rep.violations;
    if (rep.exploded) ++report.explosions;
  }
  if (static_cast<double>(report.explosions) > 0.001 * static_cast<double>(o.reps)) {
    throw ExperimentInvalid("explosions", std::to_string(report.explosions) +
                                              " replications diverged");
  }
  if (static_cast<double>(report.fixed_point_failures) > 0.05 * static_cast<double>(flows)) {
    throw ExperimentInvalid("fixed_point_failures",
                            std::to_string(report.fixed_point_failures) + " of " +
                                std::to_string(flows) + " conditional-law solves did not converge");
  }

  for (std::size_t j = 0; j < Ns.size(); ++j) {
    GapPoint pt;
    pt.N = Ns[j];
    stats::RunningStats lead, w2;
    std::map<std::size_t, stats::RunningStats> groups;
    for (const auto& rep : outcomes) {
      if (rep.exploded) continue;
      ++pt.reps;
      if (mode == Mode::w2) {
        w2.add(rep.w2[j]);
        continue;
      }
      lead.add(rep.leader[j]);
      for (const auto& [key, v] : rep.follower[j]) groups[key].add(v);
    }
    if (mode == Mode::w2) {
      pt.w2 = to_estimate(w2);
      pt.gap = pt.w2;
    } else {
      pt.leader = to_estimate(lead);
      for (const auto& [key, g] : groups) {
        if (pt.follower.count == 0 || g.mean() > pt.follower.mean) pt.follower = to_estimate(g);
      }
      pt.gap.mean = pt.leader.mean + pt.follower.mean;
      pt.gap.se = std::hypot(pt.leader.se, pt.follower.se);
      pt.gap.count = pt.reps;
    }
    report.points.push_back(pt);
  }

  std::vector<double> xs, ys;
  bool positive = true;
  for (const auto& pt : report.points) {
    xs.push_back(static_cast<double>(pt.N));
    ys.push_back(pt.gap.mean);
    positive = positive && pt.gap.mean > 1e-300;
  }
  if (positive) {
    const auto fit = fit_slope(xs, ys);
    report.slope_defined = true;
    report.slope = fit.slope;
    report.slope_stderr = fit.slope_stderr;
    report.r2 = fit.r2;
  }
  report.predicted_slope = predicted_slope_for(model, o, mode, report.predicted_rate);
  if (o.assert_rate) judge(report, o.slope_tolerance, o.upper_bound_only);
  return report;
}

}  // namespace

std::string to_string(Regime r) {
  switch (r) {
    case Regime::general: return "general";
    case Regime::sigma0_control_free: return "sigma0_control_free";
    case Regime::discrete_delta: return "discrete_delta";
    case Regime::degenerate_delta: return "degenerate_delta";
    case Regime::linear_in_measure: return "linear_in_measure";
  }
  throw ParameterError("unknown regime");
}

std::string to_string(Quantity q) {
  switch (q) {
    case Quantity::squared_state_gap: return "squared_state_gap";
    case Quantity::cost_gap: return "cost_gap";
  }
  throw ParameterError("unknown quantity");
}

Regime regime_from_string(const std::string& s) {
  for (Regime r : {Regime::general, Regime::sigma0_control_free, Regime::discrete_delta,
                   Regime::degenerate_delta, Regime::linear_in_measure}) {
    if (to_string(r) == s) return r;
  }
  throw ParameterError("unknown regime '" + s + "'");
}

double f_order(int n1) {
  if (n1 < 1) throw ParameterError("dimension n1 must be >= 1");
  return n1 <= 4 ? 0.5 : 2.0 / n1;
}

PredictedRate predicted_exponent(int n1, double q, Regime regime, Quantity quantity) {
  const double fo = f_order(n1);
  const bool cost = quantity == Quantity::cost_gap;
  if (quantity != Quantity::squared_state_gap && !cost) {
    throw ParameterError("unknown quantity");
  }
  PredictedRate p;
  switch (regime) {
    case Regime::general:
      if (!(q > 4.0)) throw ParameterError("the general-delay rate needs q > 4");
      p.exponent = cost ? (q - 2.0) / (3.0 * q - 4.0) : (2.0 * q - 4.0) / (3.0 * q - 4.0);
      p.rate = "f(N-1)^(" + (cost ? fraction(q - 2, 3 * q - 4) : fraction(2 * q - 4, 3 * q - 4)) + ")";
      if (q != std::floor(q)) p.rate = "f(N-1)^" + std::to_string(p.exponent);
      break;
    case Regime::sigma0_control_free:
      p.exponent = cost ? 1.0 / 3.0 : 2.0 / 3.0;
      p.rate = cost ? "f(N-1)^(1/3)" : "f(N-1)^(2/3)";
      break;
    case Regime::discrete_delta:
    case Regime::degenerate_delta:
      p.exponent = cost ? 0.5 : 1.0;
      p.rate = cost ? "f(N-1)^(1/2)" : "f(N-1)";
      break;
    case Regime::linear_in_measure:
      p.on_f = false;
      p.exponent = cost ? 0.5 : 1.0;
      p.rate = cost ? "N^(-1/2)" : "N^(-1)";
      p.n_exponent = p.exponent;
      return p;
    default:
      throw ParameterError("unknown regime");
  }
  p.n_exponent = p.exponent * fo;
  return p;
}

stats::LinearFit fit_slope(std::span<const double> Ns, std::span<const double> values) {
  if (Ns.size() != values.size()) throw DimensionError("fit_slope: lengths differ");
  if (Ns.size() < 3) throw ParameterError("fit_slope needs at least 3 points");
  std::vector<double> lx, ly;
  for (std::size_t j = 0; j < Ns.size(); ++j) {
    if (!(values[j] > 0.0) || !std::isfinite(values[j])) {
      throw ValidationError("fit_slope needs positive finite values");
    }
    if (!(Ns[j] > 0.0)) throw ValidationError("fit_slope needs positive N");
    lx.push_back(std::log(Ns[j]));
    ly.push_back(std::log(values[j]));
  }
  return stats::ols(lx, ly);
}

void judge(GapReport& report, double tolerance, bool upper_bound_only) {
  if (!report.slope_defined || std::isnan(report.predicted_slope)) {
    report.verdict = "undefined";
    return;
  }
  const bool ok = upper_bound_only
                      ? report.slope <= report.predicted_slope + tolerance
                      : std::abs(report.slope - report.predicted_slope) <= tolerance;
  report.verdict = ok ? "pass" : "fail";
}

std::vector<DelayAtom> flow_partition(const DelayLaw& law, const ModelSpec& model,
                                      std::size_t level, std::size_t N) {
  switch (law.kind()) {
    case DelayLaw::Kind::degenerate:
      return meanfield::snap_partition({{law.lower(), 1.0}}, model.grid);
    case DelayLaw::Kind::discrete: {
      std::vector<DelayAtom> atoms;
      for (std::size_t k = 0; k < law.atoms().size(); ++k) {
        if (law.probs()[k] > 0.0) atoms.push_back({law.atoms()[k], law.probs()[k]});
      }
      return meanfield::snap_partition(atoms, model.grid);
    }
    default: {
      const std::size_t n =
          level > 0 ? level
                    : meanfield::balanced_partition_level(static_cast<int>(model.n1), model.q,
                                                          std::max<std::size_t>(N, 3));
      return meanfield::snap_partition(meanfield::partition_delay_law(law, n), model.grid);
    }
  }
}

GapReport state_gap_experiment(const ModelSpec& model, const PolicySet& policies,
                               const DelayLaw& delay_law, std::span<const std::size_t> Ns,
                               const ExperimentOptions& options) {
  return run_experiment(model, policies, delay_law, Ns, options, Mode::state);
}

GapReport cost_gap_experiment(const ModelSpec& model, const PolicySet& policies,
                              const DelayLaw& delay_law, std::span<const std::size_t> Ns,
                              const ExperimentOptions& options) {
  return run_experiment(model, policies, delay_law, Ns, options, Mode::cost);
}

GapReport wasserstein_gap_curve(const ModelSpec& model, const PolicySet& policies,
                                const DelayLaw& delay_law, std::span<const std::size_t> Ns,
                                const ExperimentOptions& options) {
  return run_experiment(model, policies, delay_law, Ns, options, Mode::w2);
}

GapReport empirical_rate_curve(int n1, std::span<const std::size_t> Ns, std::size_t reps,
                               std::uint64_t seed, std::size_t threads) {
  if (n1 < 1) throw DimensionError("dimension n1 must be >= 1");
  if (Ns.size() < 3 || reps < 2) throw ParameterError("empirical rate needs 3 values of N and reps");
  for (std::size_t j = 0; j < Ns.size(); ++j) {
    if (Ns[j] < 2 || (j > 0 && Ns[j] <= Ns[j - 1])) {
      throw ParameterError("N values must be >= 2 and strictly increasing");
    }
  }
  const std::size_t dim = static_cast<std::size_t>(n1), nmax = Ns.back();
  std::vector<std::vector<double>> values(reps);
  parallel_for(reps, threads, [&](std::size_t r) {
    std::vector<double> a(nmax * dim), b(nmax * dim);
    const auto rep = static_cast<std::uint32_t>(r);
    for (std::size_t i = 0; i < nmax; ++i) {
      const auto entity = static_cast<std::uint32_t>(i);
      rng::Stream(seed, rng::Domain::sample, rep, entity, 0).fill_normals(0, {a.data() + i * dim, dim});
      rng::Stream(seed, rng::Domain::sample, rep, entity, 1).fill_normals(0, {b.data() + i * dim, dim});
    }
    for (const std::size_t N : Ns) {
      const auto mu = measures::DiscreteMeasure::uniform(dim, {a.begin(), a.begin() + N * dim});
      const auto nu = measures::DiscreteMeasure::uniform(dim, {b.begin(), b.begin() + N * dim});
      values[r].push_back(measures::w2_squared(mu, nu));
    }
  });
  GapReport report;
  report.scenario = "gaussian-n1-" + std::to_string(n1);
  report.quantity = n1 == 4 ? "empirical_w2_over_logN" : "empirical_w2";
  report.reps = reps;
  std::vector<double> xs, ys;
  for (std::size_t j = 0; j < Ns.size(); ++j) {
    stats::RunningStats st;
    for (const auto& v : values) st.add(v[j]);
    GapPoint pt;
    pt.N = Ns[j];
    pt.reps = reps;
    pt.w2 = to_estimate(st);
    pt.gap = pt.w2;
    if (n1 == 4) {
      const double l = std::log(static_cast<double>(Ns[j]));
      pt.gap.mean /= l;
      pt.gap.se /= l;
    }
    xs.push_back(static_cast<double>(Ns[j]));
    ys.push_back(pt.gap.mean);
    report.points.push_back(pt);
  }
  const auto fit = fit_slope(xs, ys);
  report.slope_defined = true;
  report.slope = fit.slope;
  report.slope_stderr = fit.slope_stderr;
  report.r2 = fit.r2;
  report.predicted_slope = -f_order(n1);
  report.predicted_rate = n1 < 4 ? "N^(-1/2)" : n1 == 4 ? "N^(-1/2) log N" : "N^(-2/" + std::to_string(n1) + ")";
  return report;
}

EtaReport eta_orthogonality(const ModelSpec& model, const PolicySet& policies,
                            const DelayLaw& delay_law, std::size_t N, std::size_t step,
                            const ExperimentOptions& o) {
  model.validate();
  if (N < 3) throw ParameterError("eta check needs N >= 3");
  if (step > model.grid.steps()) throw ParameterError("eta check step is past the horizon");
  if (o.reps < 2) throw ParameterError("eta check needs replications");
  const std::size_t n1 = model.n1, M = N - 1;
  struct Sample {
    double lhs = 0.0, rhs = 0.0;
    bool failed = false;
  };
  std::vector<Sample> samples(o.reps);
  const auto partition = flow_partition(delay_law, model, o.partition_level, N);
  parallel_for(o.reps, o.threads, [&](std::size_t r) {
    const NoiseRecord noise{o.seed, static_cast<std::uint32_t>(r)};
    const auto [flow, rep] =
        meanfield::solve_conditional_law(model, policies, partition, noise, o.fixed_point);
    const auto delays = replication_delays(delay_law, model, M, o, noise.replication);
    const auto x = meanfield::simulate_limit_pair(model, policies, flow, noise, delays);
    const auto& gz = flow.features[step].kernel;
    std::vector<double> avg(n1, 0.0);
    double single = 0.0;
    for (std::size_t j = 0; j < M; ++j) {
      const auto xj = x.follower(j, step);
      for (std::size_t c = 0; c < n1; ++c) {
        const double eta = gz[c] - std::tanh(xj[c]);
        avg[c] += eta;
        single += eta * eta;
      }
    }
    double lhs = 0.0;
    for (double a : avg) lhs += (a / static_cast<double>(M)) * (a / static_cast<double>(M));
    samples[r] = {lhs, single / static_cast<double>(M) / static_cast<double>(M), !rep.converged};
  });
  EtaReport out;
  out.N = N;
  out.step = step;
  stats::RunningStats lhs, rhs;
  for (const auto& s : samples) {
    lhs.add(s.lhs);
    rhs.add(s.rhs);
    if (s.failed) ++out.fixed_point_failures;
  }
  if (static_cast<double>(out.fixed_point_failures) > 0.05 * static_cast<double>(o.reps)) {
    throw ExperimentInvalid("fixed_point_failures", "too many conditional-law solves failed");
  }
  out.mean_square = to_estimate(lhs);
  out.scaled_single = to_estimate(rhs);
  out.ratio = rhs.mean() > 0.0 ? lhs.mean() / rhs.mean() : 0.0;
  return out;
}

namespace {

double control_energy(const TrajectoryBundle& b, bool leader) {
  double e = 0.0;
  for (std::size_t s = 0; s < b.grid.steps(); ++s) {
    const auto v = leader ? b.leader_control(s) : b.follower_control(0, s);
    for (double c : v) e += b.grid.h() * c * c;
  }
  return e;
}

struct ArmStats {
  stats::RunningStats cost, advantage;
  std::map<std::size_t, stats::RunningStats> energy;

  DeviationOutcome outcome() const {
    DeviationOutcome d;
    d.cost = to_estimate(cost);
    d.advantage = to_estimate(advantage);
    for (const auto& [key, e] : energy) d.l2_norm = std::max(d.l2_norm, e.mean());
    return d;
  }
};

}  // namespace

EpsilonReport epsilon_nash_certify(const ModelSpec& model, const PolicySet& profile,
                                   const std::vector<PolicySet>& deviation_library,
                                   const std::vector<PolicySet>& leader_library,
                                   const DelayLaw& delay_law, std::size_t N,
                                   const CertifyOptions& o) {
  model.validate();
  if (N < 2 || N > 64) throw ParameterError("certification runs the full game: 2 <= N <= 64");
  if (deviation_library.empty()) throw ValidationError("deviation library is empty");
  if (o.reps < 2) throw ParameterError("certification needs at least 2 replications");
  const std::size_t D = deviation_library.size();

  std::vector<PolicySet> arms;
  for (const auto& dev : deviation_library) {
    PolicySet p = profile;
    p.deviator = dev.deviator.value_or(dev.follower);
    arms.push_back(std::move(p));
  }
  for (const auto& dev : leader_library) {
    PolicySet p = profile;
    p.leader = dev.leader;
    p.leader_custom = dev.leader_custom;
    arms.push_back(std::move(p));
  }

  struct RepCosts {
    double follower = 0.0, leader = 0.0;
    std::size_t delay_key = 0;
    std::vector<double> arm_cost, arm_energy;
  };
  std::vector<RepCosts> reps(o.reps);
  parallel_for(o.reps, o.threads, [&](std::size_t r) {
    const NoiseRecord noise{o.seed, static_cast<std::uint32_t>(r)};
    const auto delays = dynamics::snap_delays_to_grid(
        dynamics::sample_delays(delay_law, N, o.seed, noise.replication), model.grid);
    const auto base = dynamics::simulate_nplayer_with_delays(model, profile, delays, noise);
    const auto cb = dynamics::evaluate_costs_nplayer(base, model);
    RepCosts rc;
    rc.follower = cb.followers[0];
    rc.leader = cb.leader;
    rc.delay_key = model.grid.delay_steps(delays[0]);
    for (std::size_t a = 0; a < arms.size(); ++a) {
      const bool leader_arm = a >= D;
      const auto b = dynamics::simulate_nplayer_with_delays(model, arms[a], delays, noise);
      const auto c = dynamics::evaluate_costs_nplayer(b, model);
      rc.arm_cost.push_back(leader_arm ? c.leader : c.followers[0]);
      rc.arm_energy.push_back(control_energy(b, leader_arm));
    }
    reps[r] = std::move(rc);
  });

  EpsilonReport out;
  out.N = N;
  out.reps = o.reps;
  stats::RunningStats pf, pl;
  std::vector<ArmStats> stats_by_arm(arms.size());
  for (const auto& rc : reps) {
    pf.add(rc.follower);
    pl.add(rc.leader);
    for (std::size_t a = 0; a < arms.size(); ++a) {
      const bool leader_arm = a >= D;
      auto& s = stats_by_arm[a];
      s.cost.add(rc.arm_cost[a]);
      s.advantage.add((leader_arm ? rc.leader : rc.follower) - rc.arm_cost[a]);
      s.energy[leader_arm ? 0 : rc.delay_key].add(rc.arm_energy[a]);
    }
  }
  out.profile_cost = to_estimate(pf);
  out.leader_profile_cost = to_estimate(pl);
  for (std::size_t a = 0; a < arms.size(); ++a) {
    const auto d = stats_by_arm[a].outcome();
    if (a < D) {
      if (d.l2_norm > o.kappa) {
        throw ValidationError("follower deviation " + std::to_string(a) +
                              " exceeds the admissible L2 cap (" + std::to_string(d.l2_norm) +
                              " > " + std::to_string(o.kappa) + ")");
      }
      out.deviations.push_back(d);
      out.epsilon = std::max(out.epsilon, d.advantage.mean);
    } else {
      if (d.l2_norm > o.gamma) {
        throw ValidationError("leader deviation " + std::to_string(a - D) +
                              " exceeds the admissible L2 cap (" + std::to_string(d.l2_norm) +
                              " > " + std::to_string(o.gamma) + ")");
      }
      out.leader_deviations.push_back(d);
      out.leader_epsilon = std::max(out.leader_epsilon, d.advantage.mean);
    }
  }
  out.profile_holder_constant = dynamics::policy_holder_probe(
      model.coefficients, profile, model.n0, model.n1, delay_law.lower(), delay_law.upper(), 0.5,
      200, o.seed);
  return out;
}

}  // namespace stackmf::rates
