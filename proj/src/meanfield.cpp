#include "stackmf/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "stackmf/errors.hpp"
#include "stackmf/stats.hpp"

namespace stackmf::meanfield {

using dynamics::FeatureSums;
using dynamics::MeasureFeatures;
using dynamics::ModelSpec;
using dynamics::NoiseRecord;
using dynamics::PolicySet;
using dynamics::TrajectoryBundle;

namespace {

void check_finite(std::span<const double> x, std::size_t step, const char* who) {
  for (double v : x) {
    if (!std::isfinite(v)) {
      throw SimulationDiverged(std::string(who) + " state became non-finite",
                               static_cast<long>(step));
    }
  }
}

// Particle indices kept by subsampling: an even stride through 0..K-1.
std::size_t stride_index(std::size_t j, std::size_t kept, std::size_t K) {
  return j * K / kept;
}

std::vector<MeasureFeatures> mixture_features(const std::vector<double>& particles,
                                              std::size_t steps, const std::vector<DelayAtom>& atoms,
                                              std::size_t K, std::size_t n1) {
  std::vector<MeasureFeatures> out;
  out.reserve(steps + 1);
  for (std::size_t s = 0; s <= steps; ++s) {
    MeasureFeatures f(n1);
    for (std::size_t a = 0; a < atoms.size(); ++a) {
      FeatureSums sums(n1);
      for (std::size_t k = 0; k < K; ++k) {
        sums.add({particles.data() + ((s * atoms.size() + a) * K + k) * n1, n1});
      }
      const auto fa = sums.average(static_cast<double>(K));
      for (std::size_t c = 0; c < n1; ++c) {
        f.mean[c] += atoms[a].weight * fa.mean[c];
        f.kernel[c] += atoms[a].weight * fa.kernel[c];
      }
      f.second_moment += atoms[a].weight * fa.second_moment;
    }
    out.push_back(std::move(f));
  }
  return out;
}

// Leader path on the full grid with z read from `features`.
std::vector<double> simulate_limit_leader(const ModelSpec& model, const PolicySet& policies,
                                          const std::vector<MeasureFeatures>& features,
                                          const NoiseRecord& noise,
                                          std::vector<double>* controls) {
  const auto& grid = model.grid;
  const auto& coef = model.coefficients;
  const std::size_t n0 = model.n0, nb = grid.history_steps(), nt = grid.steps();
  const double h = grid.h(), sqrt_h = std::sqrt(h);
  auto leader = dynamics::sample_initial_leader_path(grid, n0, model.leader_initial, noise.seed,
                                                     noise.replication);
  leader.resize((nb + nt + 1) * n0);
  if (controls) controls->assign(nt * n0, 0.0);
  std::vector<double> v0(n0), drift(n0), diff(n0), z(n0);
  for (std::size_t s = 0; s < nt; ++s) {
    const std::span<const double> x0(leader.data() + (nb + s) * n0, n0);
    policies.leader_control(coef, {grid.time(s), x0, features[s]}, v0);
    coef.leader_drift(x0, features[s], v0, drift);
    coef.leader_diffusion(x0, features[s], v0, diff);
    dynamics::fill_leader_noise(noise, s, z);
    std::span<double> next(leader.data() + (nb + s + 1) * n0, n0);
    for (std::size_t k = 0; k < n0; ++k) next[k] = x0[k] + drift[k] * h + diff[k] * sqrt_h * z[k];
    check_finite(next, s + 1, "limit leader");
    if (controls) std::copy(v0.begin(), v0.end(), controls->begin() + s * n0);
  }
  return leader;
}

// One limit follower path (steps + 1 points) and its controls.
void simulate_limit_follower(const ModelSpec& model, const PolicySet& policies,
                             const std::vector<MeasureFeatures>& features,
                             const std::vector<double>& leader, const rng::Stream& noise,
                             std::size_t lag, double delay, bool is_deviator, double* path,
                             double* controls) {
  const auto& grid = model.grid;
  const auto& coef = model.coefficients;
  const std::size_t n0 = model.n0, n1 = model.n1, nb = grid.history_steps(), nt = grid.steps();
  const double h = grid.h(), sqrt_h = std::sqrt(h);
  std::vector<double> v1(n1), drift(n1), diff(n1), z(n1);
  for (std::size_t s = 0; s < nt; ++s) {
    const std::span<const double> x1(path + s * n1, n1);
    const std::span<const double> x0d(leader.data() + (nb + s - lag) * n0, n0);
    policies.follower_control(coef, {grid.time(s), x1, features[s], x0d, delay}, is_deviator, v1);
    coef.follower_drift(x1, features[s], x0d, v1, drift);
    coef.follower_diffusion(x1, features[s], x0d, v1, diff);
    noise.fill_normals(static_cast<std::uint32_t>(s), z);
    double* next = path + (s + 1) * n1;
    for (std::size_t k = 0; k < n1; ++k) next[k] = x1[k] + drift[k] * h + diff[k] * sqrt_h * z[k];
    check_finite({next, n1}, s + 1, "limit follower");
    if (controls) std::copy(v1.begin(), v1.end(), controls + s * n1);
  }
}

measures::SortedAtoms1d sorted_mixture_1d(const std::vector<double>& particles, std::size_t s,
                                          const std::vector<DelayAtom>& atoms, std::size_t K) {
  const std::size_t A = atoms.size();
  measures::SortedAtoms1d v(A * K);
  for (std::size_t a = 0; a < A; ++a) {
    const double w = atoms[a].weight / static_cast<double>(K);
    for (std::size_t k = 0; k < K; ++k) v[a * K + k] = {particles[(s * A + a) * K + k], w};
  }
  std::sort(v.begin(), v.end());
  return v;
}

// sup over probe steps of W2 between the current flow and `next`. In one
// dimension the sorted mixtures of the previous iterate are kept in `cache`.
double flow_discrepancy(const ConditionalLawFlow& a, const std::vector<double>& next,
                        const std::vector<std::size_t>& probe_steps, std::size_t cap,
                        std::vector<measures::SortedAtoms1d>& cache) {
  double worst = 0.0;
  if (a.n1 == 1) {
    if (cache.size() != probe_steps.size()) {
      cache.clear();
      for (std::size_t s : probe_steps) cache.push_back(sorted_mixture_1d(a.particles, s, a.atoms, a.K));
    }
    for (std::size_t j = 0; j < probe_steps.size(); ++j) {
      auto fresh = sorted_mixture_1d(next, probe_steps[j], a.atoms, a.K);
      worst = std::max(worst, std::sqrt(std::max(0.0, measures::w2_squared_sorted_1d(cache[j], fresh))));
      cache[j] = std::move(fresh);
    }
    return worst;
  }
  ConditionalLawFlow b;
  b.grid = a.grid;
  b.n0 = a.n0;
  b.n1 = a.n1;
  b.K = a.K;
  b.atoms = a.atoms;
  b.particles = next;
  for (std::size_t s : probe_steps) {
    const double w2sq =
        measures::w2_squared(a.subsampled_measure_at(s, cap), b.subsampled_measure_at(s, cap));
    worst = std::max(worst, std::sqrt(std::max(0.0, w2sq)));
  }
  return worst;
}

}  // namespace

measures::DiscreteMeasure ConditionalLawFlow::atom_measure(std::size_t step,
                                                           std::size_t atom) const {
  const double* begin = particles.data() + (step * atoms.size() + atom) * K * n1;
  return measures::DiscreteMeasure::uniform(n1, std::vector<double>(begin, begin + K * n1));
}

measures::DiscreteMeasure ConditionalLawFlow::measure_at(std::size_t step) const {
  const double* begin = particles.data() + step * atoms.size() * K * n1;
  std::vector<double> coords(begin, begin + atoms.size() * K * n1);
  std::vector<double> weights;
  weights.reserve(atoms.size() * K);
  for (const auto& atom : atoms) weights.insert(weights.end(), K, atom.weight / double(K));
  return measures::DiscreteMeasure(n1, std::move(coords), std::move(weights));
}

measures::DiscreteMeasure ConditionalLawFlow::subsampled_measure_at(std::size_t step,
                                                                    std::size_t cap) const {
  const std::size_t kept = std::clamp<std::size_t>(cap / atoms.size(), 1, K);
  std::vector<double> coords, weights;
  coords.reserve(atoms.size() * kept * n1);
  for (std::size_t a = 0; a < atoms.size(); ++a) {
    for (std::size_t j = 0; j < kept; ++j) {
      const auto p = particle(step, a, stride_index(j, kept, K));
      coords.insert(coords.end(), p.begin(), p.end());
      weights.push_back(atoms[a].weight / double(kept));
    }
  }
  return measures::DiscreteMeasure(n1, std::move(coords), std::move(weights));
}

std::pair<ConditionalLawFlow, FixedPointReport> solve_conditional_law(
    const ModelSpec& model, const PolicySet& policies,
    const std::vector<DelayAtom>& delay_partition, const NoiseRecord& leader_noise,
    const FixedPointOptions& options) {
  model.validate();
  if (options.K < 100) throw ParameterError("the conditional law needs K >= 100 particles");
  if (!(options.damping > 0.0) || options.damping > 1.0) {
    throw ParameterError("damping must lie in (0, 1]");
  }
  if (delay_partition.empty()) throw ValidationError("delay partition is empty");
  double total = 0.0;
  for (const auto& a : delay_partition) {
    if (!(a.weight >= 0.0)) throw ValidationError("delay partition weights must be >= 0");
    total += a.weight;
  }
  if (std::abs(total - 1.0) > 1e-10) throw ValidationError("delay partition weights must sum to 1");

  const auto& grid = model.grid;
  const std::size_t n1 = model.n1, nt = grid.steps(), K = options.K;
  ConditionalLawFlow flow;
  flow.grid = grid;
  flow.n0 = model.n0;
  flow.n1 = n1;
  flow.K = K;
  flow.atoms = delay_partition;
  for (auto& a : flow.atoms) a.weight /= total;
  flow.noise = leader_noise;
  const std::size_t A = flow.atoms.size();
  std::vector<std::size_t> lags(A);
  for (std::size_t a = 0; a < A; ++a) lags[a] = grid.delay_steps(flow.atoms[a].delay);

  // Initial positions and per-particle noise streams, fixed across iterations.
  const std::size_t block = A * K * n1;
  std::vector<double> initial(block);
  std::vector<rng::Stream> streams;
  streams.reserve(A * K);
  for (std::size_t a = 0; a < A; ++a) {
    for (std::size_t k = 0; k < K; ++k) {
      const auto entity = static_cast<std::uint32_t>(k);
      const auto sub = static_cast<std::uint32_t>(a);
      const rng::Stream init(leader_noise.seed, rng::Domain::particle_initial,
                             leader_noise.replication, entity, sub);
      dynamics::sample_follower_initial(model.follower_initial, init,
                                        {initial.data() + (a * K + k) * n1, n1});
      streams.emplace_back(leader_noise.seed, rng::Domain::particle_noise,
                           leader_noise.replication, entity, sub);
    }
  }
  flow.particles.resize((nt + 1) * block);
  for (std::size_t s = 0; s <= nt; ++s) {
    std::copy(initial.begin(), initial.end(), flow.particles.begin() + s * block);
  }
  flow.features = mixture_features(flow.particles, nt, flow.atoms, K, n1);

  std::vector<std::size_t> probes;
  const std::size_t P = std::max<std::size_t>(1, std::min(options.probe_times, nt));
  for (std::size_t j = 1; j <= P; ++j) {
    const std::size_t s = (j * nt + P - 1) / P;
    if (probes.empty() || probes.back() != s) probes.push_back(s);
  }

  FixedPointReport report;
  report.tolerance = options.tol;
  const auto& coef = model.coefficients;
  const double h = grid.h(), sqrt_h = std::sqrt(h), theta = options.damping;
  const std::size_t n0 = model.n0, nb = grid.history_steps();
  std::vector<double> next(flow.particles.size());
  std::vector<double> v1(n1), drift(n1), diff(n1), z(n1);
  std::vector<measures::SortedAtoms1d> sorted_cache;
  for (std::size_t m = 0; m < options.max_iter; ++m) {
    const auto leader = simulate_limit_leader(model, policies, flow.features, leader_noise, nullptr);
    std::copy(initial.begin(), initial.end(), next.begin());
    for (std::size_t s = 0; s < nt; ++s) {
      const auto& f = flow.features[s];
      const double t = grid.time(s);
      for (std::size_t a = 0; a < A; ++a) {
        const std::span<const double> x0d(leader.data() + (nb + s - lags[a]) * n0, n0);
        for (std::size_t k = 0; k < K; ++k) {
          const std::size_t idx = (s * A + a) * K + k;
          const std::span<const double> x1(next.data() + idx * n1, n1);
          policies.follower_control(coef, {t, x1, f, x0d, flow.atoms[a].delay}, false, v1);
          coef.follower_drift(x1, f, x0d, v1, drift);
          coef.follower_diffusion(x1, f, x0d, v1, diff);
          streams[a * K + k].fill_normals(static_cast<std::uint32_t>(s), z);
          double* out = next.data() + (idx + A * K) * n1;
          for (std::size_t c = 0; c < n1; ++c) {
            out[c] = x1[c] + drift[c] * h + diff[c] * sqrt_h * z[c];
          }
          check_finite({out, n1}, s + 1, "particle");
        }
      }
    }
    if (theta < 1.0) {
      for (std::size_t i = block; i < next.size(); ++i) {
        next[i] = theta * next[i] + (1.0 - theta) * flow.particles[i];
      }
    }
    const double d = flow_discrepancy(flow, next, probes, options.subsample, sorted_cache);
    report.discrepancies.push_back(d);
    flow.particles.swap(next);
    flow.features = mixture_features(flow.particles, nt, flow.atoms, K, n1);
    if (d <= options.tol) {
      report.converged = true;
      report.iterations = m;
      break;
    }
    report.iterations = m + 1;
  }
  flow.leader = simulate_limit_leader(model, policies, flow.features, leader_noise, nullptr);
  return {std::move(flow), std::move(report)};
}

std::vector<DelayAtom> partition_delay_law(const dynamics::DelayLaw& law, std::size_t n) {
  if (n == 0) throw ParameterError("partition level must be >= 1");
  const double a = law.lower(), b = law.upper();
  if (b <= a) return {{a, 1.0}};
  std::vector<DelayAtom> out;
  const double width = (b - a) / static_cast<double>(n);
  double covered = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double left = a + width * static_cast<double>(k);
    const double right = k + 1 == n ? b : a + width * static_cast<double>(k + 1);
    const double upper_mass = k + 1 == n ? 1.0 : law.cdf_left(right);
    const double w = upper_mass - law.cdf_left(left);
    covered += w;
    if (w > 0.0) out.push_back({left, w});
  }
  // CDF differences telescope to 1 up to rounding; fix the residual.
  if (!out.empty()) out.back().weight += 1.0 - covered;
  return out;
}

std::vector<DelayAtom> snap_partition(const std::vector<DelayAtom>& atoms,
                                      const dynamics::TimeGrid& grid) {
  std::vector<DelayAtom> out;
  for (const auto& atom : atoms) {
    const double snapped = static_cast<double>(grid.delay_steps(atom.delay)) * grid.h();
    if (!out.empty() && out.back().delay == snapped) {
      out.back().weight += atom.weight;
    } else {
      out.push_back({snapped, atom.weight});
    }
  }
  return out;
}

std::size_t balanced_partition_level(int n1, double q, std::size_t N) {
  if (!(q > 4.0)) throw ParameterError("balanced partition level needs q > 4");
  if (N < 3) throw ParameterError("balanced partition level needs N >= 3");
  const double f = measures::rate_f(n1, static_cast<double>(N - 1));
  const double n = std::ceil(std::pow(f, -2.0 * q / (3.0 * q - 4.0)) - 1e-12);
  return static_cast<std::size_t>(std::clamp(n, 1.0, 1e4));
}

TrajectoryBundle simulate_limit_pair(const ModelSpec& model, const PolicySet& policies,
                                     const ConditionalLawFlow& zflow, const NoiseRecord& noise,
                                     std::span<const double> delays) {
  if (!(zflow.noise == noise)) {
    throw ValidationError("the flow was solved for a different leader noise");
  }
  model.validate();
  const auto& grid = model.grid;
  const std::size_t N = delays.size(), n0 = model.n0, n1 = model.n1, nt = grid.steps();
  if (N == 0) throw ValidationError("at least one limit follower is required");
  if (zflow.features.size() != nt + 1 || zflow.n1 != n1) {
    throw DimensionError("flow does not match the model grid or dimension");
  }
  TrajectoryBundle out;
  out.grid = grid;
  out.n0 = n0;
  out.n1 = n1;
  out.N = N;
  out.noise = noise;
  out.delays.assign(delays.begin(), delays.end());
  out.leader = simulate_limit_leader(model, policies, zflow.features, noise, &out.leader_controls);
  out.followers.assign(N * (nt + 1) * n1, 0.0);
  out.follower_controls.assign(N * nt * n1, 0.0);
  for (std::size_t i = 0; i < N; ++i) {
    const auto entity = static_cast<std::uint32_t>(i);
    const rng::Stream init(noise.seed, rng::Domain::follower_initial, noise.replication, entity);
    double* path = out.followers.data() + i * (nt + 1) * n1;
    dynamics::sample_follower_initial(model.follower_initial, init, {path, n1});
    const rng::Stream stream(noise.seed, rng::Domain::follower_noise, noise.replication, entity);
    simulate_limit_follower(model, policies, zflow.features, out.leader, stream,
                            grid.delay_steps(delays[i]), delays[i], i == 0, path,
                            out.follower_controls.data() + i * nt * n1);
  }
  return out;
}

dynamics::CostValues evaluate_costs_limit(const TrajectoryBundle& limit, const ModelSpec& model,
                                          const ConditionalLawFlow& zflow) {
  const auto& coef = model.coefficients;
  const std::size_t N = limit.N, nt = limit.grid.steps();
  const double h = limit.grid.h();
  dynamics::CostValues out;
  out.followers.assign(N, 0.0);
  for (std::size_t s = 0; s <= nt; ++s) {
    const auto& f = zflow.features[s];
    if (s < nt) {
      out.leader += h * coef.leader_running_cost(limit.leader_forward(s), f, limit.leader_control(s));
    } else {
      out.leader += coef.leader_terminal_cost(limit.leader_forward(s), f);
    }
    for (std::size_t i = 0; i < N; ++i) {
      out.followers[i] += s < nt ? h * coef.follower_running_cost(limit.follower(i, s), f,
                                                                  limit.follower_control(i, s))
                                 : coef.follower_terminal_cost(limit.follower(i, s), f);
    }
  }
  return out;
}

HolderReport holder_exponent_estimate(const ModelSpec& model, const PolicySet& policies,
                                      const std::vector<DelayAtom>& partition,
                                      const std::vector<double>& deltas, std::size_t reps,
                                      std::uint64_t seed, const FixedPointOptions& options) {
  if (deltas.size() < 4) throw ParameterError("Hoelder estimate needs at least 4 delays");
  if (reps < 100) throw ParameterError("Hoelder estimate needs at least 100 replications");
  const auto& grid = model.grid;
  const std::size_t n1 = model.n1, nt = grid.steps(), D = deltas.size();
  const auto snapped = dynamics::snap_delays_to_grid(deltas, grid);
  // mean over replications of |x^delta(t) - x^gamma(t)|^2, per delay and step
  std::vector<double> sum_sq((D - 1) * (nt + 1), 0.0);
  std::vector<double> paths(D * (nt + 1) * n1);
  for (std::size_t r = 0; r < reps; ++r) {
    const NoiseRecord noise{seed, static_cast<std::uint32_t>(r)};
    const auto [flow, report] = solve_conditional_law(model, policies, partition, noise, options);
    const rng::Stream init(seed, rng::Domain::follower_initial, noise.replication, 0);
    const rng::Stream stream(seed, rng::Domain::follower_noise, noise.replication, 0);
    for (std::size_t d = 0; d < D; ++d) {
      double* path = paths.data() + d * (nt + 1) * n1;
      dynamics::sample_follower_initial(model.follower_initial, init, {path, n1});
      simulate_limit_follower(model, policies, flow.features, flow.leader, stream,
                              grid.delay_steps(snapped[d]), snapped[d], false, path, nullptr);
    }
    for (std::size_t d = 1; d < D; ++d) {
      for (std::size_t s = 0; s <= nt; ++s) {
        double g = 0.0;
        for (std::size_t c = 0; c < n1; ++c) {
          const double diff = paths[(d * (nt + 1) + s) * n1 + c] - paths[s * n1 + c];
          g += diff * diff;
        }
        sum_sq[(d - 1) * (nt + 1) + s] += g;
      }
    }
  }
  HolderReport out;
  double largest = 0.0;
  for (std::size_t d = 1; d < D; ++d) {
    double sup = 0.0;
    for (std::size_t s = 0; s <= nt; ++s) {
      sup = std::max(sup, sum_sq[(d - 1) * (nt + 1) + s] / static_cast<double>(reps));
    }
    out.spacings.push_back(std::abs(snapped[d] - snapped[0]));
    out.gaps.push_back(sup);
    largest = std::max(largest, sup);
  }
  bool fittable = largest > 1e-24;
  std::vector<double> lx, ly;
  for (std::size_t j = 0; j < out.gaps.size(); ++j) {
    if (out.spacings[j] <= 0.0 || out.gaps[j] <= 0.0) {
      fittable = false;
      break;
    }
    lx.push_back(std::log(out.spacings[j]));
    ly.push_back(std::log(out.gaps[j]));
  }
  if (!fittable) {
    out.flagged = true;
    return out;
  }
  const auto fit = stats::ols(lx, ly);
  out.exponent = fit.slope;
  out.exponent_stderr = fit.slope_stderr;
  out.constant = std::exp(fit.intercept);
  return out;
}

}  // namespace stackmf::meanfield
