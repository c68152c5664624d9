#include "stackmf/dynamics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>

#include "stackmf/errors.hpp"

namespace stackmf::dynamics {
namespace {

std::size_t whole_steps(double length, double h, const char* what) {
  const double ratio = length / h;
  const double rounded = std::round(ratio);
  if (std::abs(ratio - rounded) > 1e-12 * std::max(1.0, ratio)) {
    throw ValidationError(std::string("step h does not divide ") + what);
  }
  return static_cast<std::size_t>(rounded);
}

double sq(double x) { return x * x; }

}  // namespace

// ---------------------------------------------------------------------------
// TimeGrid

TimeGrid::TimeGrid(double b, double T, double h) : b_(b), T_(T), h_(h) {
  if (!(h > 0.0) || !std::isfinite(h)) throw ParameterError("step h must be positive");
  if (!(T > 0.0) || !std::isfinite(T)) throw ParameterError("horizon T must be positive");
  if (!(b >= 0.0) || !std::isfinite(b)) throw ParameterError("history length b must be >= 0");
  nb_ = whole_steps(b, h, "b");
  nt_ = whole_steps(T, h, "T");
}

std::size_t TimeGrid::delay_steps(double delta) const {
  if (delta < 0.0) throw ParameterError("delays must be nonnegative");
  const auto s = static_cast<std::size_t>(std::llround(delta / h_));
  if (s > nb_) throw ParameterError("delay exceeds the history window b");
  return s;
}

// ---------------------------------------------------------------------------
// DelayLaw

DelayLaw DelayLaw::degenerate(double a) {
  if (!(a >= 0.0) || !std::isfinite(a)) throw ValidationError("delay must be finite and >= 0");
  DelayLaw law;
  law.kind_ = Kind::degenerate;
  law.a_ = law.b_ = a;
  law.atoms_ = {a};
  law.probs_ = {1.0};
  return law;
}

DelayLaw DelayLaw::discrete(std::vector<double> atoms, std::vector<double> probs) {
  if (atoms.empty() || atoms.size() != probs.size()) {
    throw ValidationError("discrete delay law needs one probability per atom");
  }
  double s = 0.0;
  for (std::size_t k = 0; k < atoms.size(); ++k) {
    if (!(atoms[k] >= 0.0) || !std::isfinite(atoms[k])) {
      throw ValidationError("delay atoms must be finite and >= 0");
    }
    if (k > 0 && !(atoms[k] > atoms[k - 1])) {
      throw ValidationError("delay atoms must be strictly increasing");
    }
    if (!(probs[k] >= 0.0)) throw ValidationError("delay probabilities must be >= 0");
    s += probs[k];
  }
  if (std::abs(s - 1.0) > 1e-12) throw ValidationError("delay probabilities must sum to 1");
  DelayLaw law;
  law.kind_ = Kind::discrete;
  law.a_ = atoms.front();
  law.b_ = atoms.back();
  law.atoms_ = std::move(atoms);
  law.probs_ = std::move(probs);
  return law;
}

DelayLaw DelayLaw::uniform(double a, double b) {
  if (!(a >= 0.0) || !(b > a) || !std::isfinite(b)) {
    throw ValidationError("uniform delay law needs 0 <= a < b");
  }
  DelayLaw law;
  law.kind_ = Kind::uniform;
  law.a_ = a;
  law.b_ = b;
  return law;
}

DelayLaw DelayLaw::truncated_exponential(double rate, double a, double b) {
  if (!(rate > 0.0) || !(a >= 0.0) || !(b > a) || !std::isfinite(b)) {
    throw ValidationError("truncated exponential delay law needs rate > 0 and 0 <= a < b");
  }
  DelayLaw law;
  law.kind_ = Kind::truncated_exponential;
  law.a_ = a;
  law.b_ = b;
  law.rate_ = rate;
  return law;
}

double DelayLaw::cdf(double x) const {
  switch (kind_) {
    case Kind::degenerate:
    case Kind::discrete: {
      double s = 0.0;
      for (std::size_t k = 0; k < atoms_.size(); ++k) {
        if (atoms_[k] <= x) s += probs_[k];
      }
      return std::min(1.0, s);
    }
    case Kind::uniform:
      return std::clamp((x - a_) / (b_ - a_), 0.0, 1.0);
    case Kind::truncated_exponential: {
      if (x <= a_) return 0.0;
      if (x >= b_) return 1.0;
      return -std::expm1(-rate_ * (x - a_)) / -std::expm1(-rate_ * (b_ - a_));
    }
  }
  return 0.0;
}

double DelayLaw::cdf_left(double x) const {
  if (kind_ == Kind::degenerate || kind_ == Kind::discrete) {
    double s = 0.0;
    for (std::size_t k = 0; k < atoms_.size(); ++k) {
      if (atoms_[k] < x) s += probs_[k];
    }
    return std::min(1.0, s);
  }
  return cdf(x);
}

double DelayLaw::quantile(double u) const {
  switch (kind_) {
    case Kind::degenerate:
    case Kind::discrete: {
      double s = 0.0;
      for (std::size_t k = 0; k < atoms_.size(); ++k) {
        s += probs_[k];
        if (u <= s) return atoms_[k];
      }
      return atoms_.back();
    }
    case Kind::uniform:
      return a_ + u * (b_ - a_);
    case Kind::truncated_exponential:
      return a_ - std::log1p(u * std::expm1(-rate_ * (b_ - a_))) / rate_;
  }
  return a_;
}

std::vector<double> sample_delays(const DelayLaw& law, std::size_t N, std::uint64_t seed,
                                  std::uint32_t replication) {
  std::vector<double> out(N);
  for (std::size_t i = 0; i < N; ++i) {
    const rng::Stream s(seed, rng::Domain::delay, replication, static_cast<std::uint32_t>(i));
    out[i] = law.quantile(s.uniform(0));
  }
  return out;
}

std::vector<double> snap_delays_to_grid(std::span<const double> delays, const TimeGrid& grid) {
  std::vector<double> out(delays.size());
  for (std::size_t i = 0; i < delays.size(); ++i) {
    out[i] = static_cast<double>(std::llround(delays[i] / grid.h())) * grid.h();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Initial laws

std::vector<double> sample_initial_leader_path(const TimeGrid& grid, std::size_t n0,
                                               const LeaderInitialLaw& law, std::uint64_t seed,
                                               std::uint32_t replication) {
  if (n0 == 0) throw DimensionError("leader dimension must be >= 1");
  if (!(law.sigma >= 0.0) || !std::isfinite(law.value)) {
    throw ValidationError("leader initial law: sigma must be >= 0 and value finite");
  }
  if (law.family == LeaderInitialLaw::Family::ou_path && !(law.theta > 0.0)) {
    throw ValidationError("ou_path needs theta > 0");
  }
  const std::size_t nb = grid.history_steps();
  std::vector<double> path((nb + 1) * n0, law.value);
  if (law.family == LeaderInitialLaw::Family::constant) return path;
  const rng::Stream stream(seed, rng::Domain::leader_initial, replication, 0);
  std::vector<double> z(n0);
  const double h = grid.h();
  double decay = 1.0, scale = law.sigma * std::sqrt(h);
  if (law.family == LeaderInitialLaw::Family::ou_path) {
    decay = std::exp(-law.theta * h);
    scale = law.sigma * std::sqrt(-std::expm1(-2.0 * law.theta * h) / (2.0 * law.theta));
  }
  for (std::size_t s = 0; s < nb; ++s) {
    stream.fill_normals(static_cast<std::uint32_t>(s), z);
    for (std::size_t k = 0; k < n0; ++k) {
      path[(s + 1) * n0 + k] = decay * path[s * n0 + k] + scale * z[k];
    }
  }
  return path;
}

void sample_follower_initial(const FollowerInitialLaw& law, const rng::Stream& stream,
                             std::span<double> out) {
  using F = FollowerInitialLaw::Family;
  std::size_t block = 0;
  std::array<double, 4> z{}, u{};
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (k % 4 == 0) {
      z = stream.normals(static_cast<std::uint32_t>(2 * block));
      u = stream.uniforms(static_cast<std::uint32_t>(2 * block + 1));
      ++block;
    }
    switch (law.family) {
      case F::dirac:
        out[k] = law.center;
        break;
      case F::gaussian:
        out[k] = law.center + law.spread * z[k % 4];
        break;
      case F::bimodal:
        // The mode is shared by all components of one follower.
        out[k] = (stream.uniform(0xFFFFFFu) < 0.5 ? -law.center : law.center) +
                 law.spread * z[k % 4];
        break;
      case F::uniform:
        out[k] = law.center + law.spread * (2.0 * u[k % 4] - 1.0);
        break;
    }
  }
}

// ---------------------------------------------------------------------------
// Features

MeasureFeatures MeasureFeatures::of(const measures::DiscreteMeasure& z) {
  MeasureFeatures f(z.dim());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const auto y = z.point(i);
    const double w = z.weight(i);
    for (std::size_t k = 0; k < y.size(); ++k) {
      f.mean[k] += w * y[k];
      f.kernel[k] += w * std::tanh(y[k]);
      f.second_moment += w * y[k] * y[k];
    }
  }
  return f;
}

void FeatureSums::add(std::span<const double> y) {
  for (std::size_t k = 0; k < y.size(); ++k) {
    mean[k] += y[k];
    kernel[k] += std::tanh(y[k]);
    second_moment += y[k] * y[k];
  }
}

MeasureFeatures FeatureSums::average(double count) const {
  MeasureFeatures f(mean.size());
  for (std::size_t k = 0; k < mean.size(); ++k) {
    f.mean[k] = mean[k] / count;
    f.kernel[k] = kernel[k] / count;
  }
  f.second_moment = second_moment / count;
  return f;
}

MeasureFeatures FeatureSums::leave_one_out(std::span<const double> y, double count) const {
  MeasureFeatures f(mean.size());
  double m2 = second_moment;
  for (std::size_t k = 0; k < mean.size(); ++k) {
    f.mean[k] = (mean[k] - y[k]) / (count - 1.0);
    f.kernel[k] = (kernel[k] - std::tanh(y[k])) / (count - 1.0);
    m2 -= y[k] * y[k];
  }
  f.second_moment = m2 / (count - 1.0);
  return f;
}

// ---------------------------------------------------------------------------
// Coefficients

CoefficientSet::CoefficientSet(Family family, Params params, double lipschitz_L)
    : family_(family), p_(params), L_(lipschitz_L) {
  const double values[] = {p_.a0, p_.c0, p_.b0, p_.s0, p_.cs0, p_.a1, p_.c1, p_.k1,
                           p_.b1, p_.w1, p_.beta, p_.s1, p_.e1, p_.cs1};
  for (double v : values) {
    if (!std::isfinite(v)) throw ValidationError("coefficient parameters must be finite");
  }
  if (family_ != Family::smooth_nonlinear && p_.w1 != 0.0) {
    throw ValidationError("w1 is reserved for the smooth_nonlinear family");
  }
  if (!(L_ > 0.0) || !std::isfinite(L_)) throw ValidationError("Lipschitz constant must be > 0");
  const double bounds[] = {
      std::abs(p_.a0) + std::abs(p_.c0) + std::abs(p_.b0),
      std::abs(p_.cs0),
      std::abs(p_.a1) + std::abs(p_.c1) + std::abs(p_.k1) + std::abs(p_.b1) +
          std::abs(p_.w1 * p_.beta),
      std::abs(p_.e1) + std::abs(p_.cs1),
  };
  for (double b : bounds) {
    if (b > L_ * (1.0 + 1e-12)) {
      throw ValidationError("declared Lipschitz constant is below the coefficient bound " +
                            std::to_string(b));
    }
  }
}

bool CoefficientSet::reads_measure() const noexcept {
  return p_.c0 != 0.0 || p_.cs0 != 0.0 || p_.c1 != 0.0 || p_.cs1 != 0.0;
}

double CoefficientSet::drift_feature(const MeasureFeatures& z, std::size_t k) const {
  const std::size_t j = k % z.mean.size();
  return family_ == Family::linear_quadratic ? z.mean[j] : z.kernel[j];
}

void CoefficientSet::leader_drift(std::span<const double> x0, const MeasureFeatures& z,
                                  std::span<const double> v0, std::span<double> out) const {
  for (std::size_t k = 0; k < x0.size(); ++k) {
    out[k] = p_.a0 * x0[k] + p_.c0 * drift_feature(z, k) + p_.b0 * v0[k];
  }
}

void CoefficientSet::leader_diffusion(std::span<const double> x0, const MeasureFeatures& z,
                                      std::span<const double>, std::span<double> out) const {
  for (std::size_t k = 0; k < x0.size(); ++k) {
    out[k] = p_.s0 + p_.cs0 * z.kernel[k % z.kernel.size()];
  }
}

void CoefficientSet::follower_drift(std::span<const double> x1, const MeasureFeatures& z,
                                    std::span<const double> x0d, std::span<const double> v1,
                                    std::span<double> out) const {
  for (std::size_t k = 0; k < x1.size(); ++k) {
    double g = p_.a1 * x1[k] + p_.c1 * drift_feature(z, k) + p_.k1 * x0d[k % x0d.size()] +
               p_.b1 * v1[k];
    if (p_.w1 != 0.0) g += p_.w1 * std::tanh(p_.beta * x1[k]);
    out[k] = g;
  }
}

void CoefficientSet::follower_diffusion(std::span<const double> x1, const MeasureFeatures& z,
                                        std::span<const double> x0d, std::span<const double>,
                                        std::span<double> out) const {
  for (std::size_t k = 0; k < x1.size(); ++k) {
    out[k] = p_.s1 + p_.e1 * x0d[k % x0d.size()] + p_.cs1 * z.kernel[k % z.kernel.size()];
  }
}

double CoefficientSet::leader_running_cost(std::span<const double> x0, const MeasureFeatures& z,
                                           std::span<const double> v0) const {
  double c = p_.cost0_const;
  for (std::size_t k = 0; k < x0.size(); ++k) {
    c += p_.q0 * sq(x0[k]) + p_.r0 * sq(v0[k]) + p_.m0 * sq(x0[k] - drift_feature(z, k));
  }
  return c;
}

double CoefficientSet::leader_terminal_cost(std::span<const double> x0,
                                            const MeasureFeatures& z) const {
  double c = 0.0;
  for (std::size_t k = 0; k < x0.size(); ++k) {
    c += p_.qT0 * sq(x0[k]) + p_.mT0 * sq(x0[k] - drift_feature(z, k));
  }
  return c;
}

double CoefficientSet::follower_running_cost(std::span<const double> x1,
                                             const MeasureFeatures& z,
                                             std::span<const double> v1) const {
  double c = p_.cost1_const;
  for (std::size_t k = 0; k < x1.size(); ++k) {
    c += p_.q1 * sq(x1[k]) + p_.r1 * sq(v1[k]) + p_.m1 * sq(x1[k] - drift_feature(z, k));
  }
  return c;
}

double CoefficientSet::follower_terminal_cost(std::span<const double> x1,
                                              const MeasureFeatures& z) const {
  double c = 0.0;
  for (std::size_t k = 0; k < x1.size(); ++k) {
    c += p_.qT1 * sq(x1[k]) + p_.mT1 * sq(x1[k] - drift_feature(z, k));
  }
  return c;
}

// ---------------------------------------------------------------------------
// Policies

void PolicySet::leader_control(const CoefficientSet& c, const LeaderContext& ctx,
                               std::span<double> out) const {
  if (leader_custom) {
    leader_custom(ctx, out);
    return;
  }
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = leader.px * ctx.x0[k] + leader.pz * c.drift_feature(ctx.z, k) + leader.pc;
  }
}

void PolicySet::follower_control(const CoefficientSet& c, const FollowerContext& ctx,
                                 bool is_deviator, std::span<double> out) const {
  if (is_deviator && deviator) {
    const auto& p = *deviator;
    for (std::size_t k = 0; k < out.size(); ++k) {
      out[k] = p.px * ctx.x1[k] + p.pz * c.drift_feature(ctx.z, k) +
               p.pd * ctx.x0_delayed[k % ctx.x0_delayed.size()] + p.pc + p.pdelta * ctx.delta;
    }
    return;
  }
  if (follower_custom) {
    follower_custom(ctx, out);
    return;
  }
  const auto& p = follower;
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = p.px * ctx.x1[k] + p.pz * c.drift_feature(ctx.z, k) +
             p.pd * ctx.x0_delayed[k % ctx.x0_delayed.size()] + p.pc + p.pdelta * ctx.delta;
  }
}

bool PolicySet::reads_measure() const noexcept {
  return leader.pz != 0.0 || follower.pz != 0.0 || (deviator && deviator->pz != 0.0) ||
         static_cast<bool>(leader_custom) || static_cast<bool>(follower_custom);
}

void ModelSpec::validate() const {
  if (n0 == 0 || n1 == 0) throw DimensionError("state dimensions must be >= 1");
  if (!(q >= 2.0)) throw ParameterError("moment order q must be >= 2");
}

// ---------------------------------------------------------------------------
// N-player simulation

void fill_leader_noise(const NoiseRecord& noise, std::size_t step, std::span<double> out) {
  const std::uint32_t sub = step >= noise.leader_fork_step ? 1u : 0u;
  const rng::Stream stream(noise.seed, rng::Domain::leader_noise, noise.replication, 0, sub);
  stream.fill_normals(static_cast<std::uint32_t>(step), out);
}

namespace {

void check_finite(std::span<const double> x, std::size_t step, const char* who) {
  for (double v : x) {
    if (!std::isfinite(v)) {
      throw SimulationDiverged(std::string(who) + " state became non-finite",
                               static_cast<long>(step));
    }
  }
}

}  // namespace

TrajectoryBundle simulate_nplayer_relabelled(const ModelSpec& model, const PolicySet& policies,
                                             std::span<const double> delays,
                                             const NoiseRecord& noise,
                                             const FollowerStreams& streams) {
  model.validate();
  const std::size_t N = delays.size();
  if (N < 2) throw ValidationError("the N-player system needs N >= 2");
  if (!streams.entity.empty() && streams.entity.size() != N) {
    throw DimensionError("one stream entity per follower required");
  }
  const auto& grid = model.grid;
  const auto& coef = model.coefficients;
  const std::size_t n0 = model.n0, n1 = model.n1, nb = grid.history_steps(),
                    nt = grid.steps();
  const double h = grid.h(), sqrt_h = std::sqrt(h);

  std::vector<std::uint32_t> entity(N);
  for (std::size_t i = 0; i < N; ++i) {
    entity[i] = streams.entity.empty() ? static_cast<std::uint32_t>(i) : streams.entity[i];
  }
  // Sums run over followers in stream order so that relabelling cannot
  // change rounding.
  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t x, std::size_t y) { return entity[x] < entity[y]; });

  TrajectoryBundle out;
  out.grid = grid;
  out.n0 = n0;
  out.n1 = n1;
  out.N = N;
  out.noise = noise;
  out.delays.assign(delays.begin(), delays.end());
  out.entities = entity;
  std::vector<std::size_t> lag(N);
  for (std::size_t i = 0; i < N; ++i) lag[i] = grid.delay_steps(delays[i]);

  out.leader = sample_initial_leader_path(grid, n0, model.leader_initial, noise.seed,
                                          noise.replication);
  out.leader.resize((nb + nt + 1) * n0);
  out.followers.assign(N * (nt + 1) * n1, 0.0);
  out.leader_controls.assign(nt * n0, 0.0);
  out.follower_controls.assign(N * nt * n1, 0.0);

  std::vector<rng::Stream> follower_noise;
  follower_noise.reserve(N);
  for (std::size_t i = 0; i < N; ++i) {
    const rng::Stream init(noise.seed, rng::Domain::follower_initial, noise.replication,
                           entity[i]);
    sample_follower_initial(model.follower_initial, init,
                            {out.followers.data() + i * (nt + 1) * n1, n1});
    follower_noise.emplace_back(noise.seed, rng::Domain::follower_noise, noise.replication,
                                entity[i]);
  }

  std::vector<double> drift0(n0), diff0(n0), z0(n0), drift1(n1), diff1(n1), z1(n1);
  const double Nd = static_cast<double>(N);
  for (std::size_t s = 0; s < nt; ++s) {
    const double t = grid.time(s);
    FeatureSums sums(n1);
    for (std::size_t i : order) sums.add(out.follower(i, s));
    const MeasureFeatures full = sums.average(Nd);

    const std::span<const double> x0(out.leader.data() + (nb + s) * n0, n0);
    std::span<double> v0(out.leader_controls.data() + s * n0, n0);
    policies.leader_control(coef, {t, x0, full}, v0);
    coef.leader_drift(x0, full, v0, drift0);
    coef.leader_diffusion(x0, full, v0, diff0);
    fill_leader_noise(noise, s, z0);
    std::span<double> x0_next(out.leader.data() + (nb + s + 1) * n0, n0);
    for (std::size_t k = 0; k < n0; ++k) {
      x0_next[k] = x0[k] + drift0[k] * h + diff0[k] * sqrt_h * z0[k];
    }
    check_finite(x0_next, s + 1, "leader");

    for (std::size_t i = 0; i < N; ++i) {
      const auto x1 = out.follower(i, s);
      const MeasureFeatures loo = sums.leave_one_out(x1, Nd);
      const std::span<const double> x0d(out.leader.data() + (nb + s - lag[i]) * n0, n0);
      std::span<double> v1(out.follower_controls.data() + (i * nt + s) * n1, n1);
      policies.follower_control(coef, {t, x1, loo, x0d, out.delays[i]}, i == 0, v1);
      coef.follower_drift(x1, loo, x0d, v1, drift1);
      coef.follower_diffusion(x1, loo, x0d, v1, diff1);
      follower_noise[i].fill_normals(static_cast<std::uint32_t>(s), z1);
      std::span<double> next(out.followers.data() + (i * (nt + 1) + s + 1) * n1, n1);
      for (std::size_t k = 0; k < n1; ++k) {
        next[k] = x1[k] + drift1[k] * h + diff1[k] * sqrt_h * z1[k];
      }
      check_finite(next, s + 1, "follower");
    }
  }
  return out;
}

TrajectoryBundle simulate_nplayer_with_delays(const ModelSpec& model, const PolicySet& policies,
                                              std::span<const double> delays,
                                              const NoiseRecord& noise) {
  return simulate_nplayer_relabelled(model, policies, delays, noise, {});
}

TrajectoryBundle simulate_nplayer(const ModelSpec& model, const PolicySet& policies,
                                  std::size_t N, const DelayLaw& delay_law,
                                  const NoiseRecord& noise) {
  if (N < 2) throw ValidationError("the N-player system needs N >= 2");
  const auto raw = sample_delays(delay_law, N, noise.seed, noise.replication);
  const auto snapped = snap_delays_to_grid(raw, model.grid);
  return simulate_nplayer_with_delays(model, policies, snapped, noise);
}

CostValues evaluate_costs_nplayer(const TrajectoryBundle& bundle, const ModelSpec& model) {
  const auto& coef = model.coefficients;
  const std::size_t N = bundle.N, nt = bundle.grid.steps(), n1 = bundle.n1;
  const double h = bundle.grid.h(), Nd = static_cast<double>(N);
  CostValues out;
  out.followers.assign(N, 0.0);
  // Same summation order as the simulation.
  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), 0);
  if (bundle.entities.size() == N) {
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
      return bundle.entities[x] < bundle.entities[y];
    });
  }
  for (std::size_t s = 0; s <= nt; ++s) {
    FeatureSums sums(n1);
    for (std::size_t i : order) sums.add(bundle.follower(i, s));
    const MeasureFeatures full = sums.average(Nd);
    if (s < nt) {
      out.leader += h * coef.leader_running_cost(bundle.leader_forward(s), full,
                                                 bundle.leader_control(s));
    } else {
      out.leader += coef.leader_terminal_cost(bundle.leader_forward(s), full);
    }
    for (std::size_t i = 0; i < N; ++i) {
      const auto x1 = bundle.follower(i, s);
      const MeasureFeatures loo = sums.leave_one_out(x1, Nd);
      out.followers[i] += s < nt
                              ? h * coef.follower_running_cost(x1, loo, bundle.follower_control(i, s))
                              : coef.follower_terminal_cost(x1, loo);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Probes

namespace {

measures::DiscreteMeasure random_measure(std::mt19937_64& gen, std::size_t dim, double radius) {
  std::uniform_real_distribution<double> u(-radius, radius), w(0.1, 1.0);
  const std::size_t n = 1 + gen() % 6;
  std::vector<double> coords(n * dim), weights(n);
  for (double& c : coords) c = u(gen);
  double total = 0.0;
  for (double& x : weights) total += (x = w(gen));
  for (double& x : weights) x /= total;
  double head = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) head += weights[i];
  weights.back() = 1.0 - head;
  return measures::DiscreteMeasure(dim, std::move(coords), std::move(weights));
}

double norm_diff(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += sq(a[k] - b[k]);
  return std::sqrt(s);
}

}  // namespace

double lipschitz_probe(const CoefficientSet& coefficients, std::size_t n0, std::size_t n1,
                       std::size_t trials, double radius, std::uint64_t seed) {
  if (trials == 0) throw ParameterError("lipschitz_probe needs at least one trial");
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-radius, radius);
  auto draw = [&](std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = u(gen);
    return v;
  };
  // Each trial perturbs one argument group at random (or all of them) so
  // that single-argument slopes are reached exactly.
  double worst = 0.0;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    const auto x0 = draw(n0), x1 = draw(n1), v0 = draw(n0), v1 = draw(n1), x0d = draw(n0);
    const auto z = random_measure(gen, n1, radius);
    auto x0b = x0, x1b = x1, v0b = v0, v1b = v1, x0db = x0d;
    auto zb = z;
    const int which = static_cast<int>(gen() % 5);
    if (which == 0 || which == 4) x0b = draw(n0), x1b = draw(n1);
    if (which == 1 || which == 4) zb = random_measure(gen, n1, radius);
    if (which == 2 || which == 4) v0b = draw(n0), v1b = draw(n1);
    if (which == 3 || which == 4) x0db = draw(n0);
    const double w2 = zb == z ? 0.0 : measures::w2_exact_lp(z, zb).first;
    const auto fz = MeasureFeatures::of(z), fzb = MeasureFeatures::of(zb);

    std::vector<double> a0(n0), b0(n0), a1(n1), b1(n1);
    auto ratio = [&](std::span<const double> a, std::span<const double> b, double denom) {
      const double num = norm_diff(a, b);
      if (denom <= 0.0) return 0.0;
      return num / denom;
    };
    const double d_leader = norm_diff(x0, x0b) + w2 + norm_diff(v0, v0b);
    coefficients.leader_drift(x0, fz, v0, a0);
    coefficients.leader_drift(x0b, fzb, v0b, b0);
    worst = std::max(worst, ratio(a0, b0, d_leader));
    coefficients.leader_diffusion(x0, fz, v0, a0);
    coefficients.leader_diffusion(x0b, fzb, v0b, b0);
    worst = std::max(worst, ratio(a0, b0, d_leader));
    const double d_follower =
        norm_diff(x1, x1b) + w2 + norm_diff(v1, v1b) + norm_diff(x0d, x0db);
    coefficients.follower_drift(x1, fz, x0d, v1, a1);
    coefficients.follower_drift(x1b, fzb, x0db, v1b, b1);
    worst = std::max(worst, ratio(a1, b1, d_follower));
    coefficients.follower_diffusion(x1, fz, x0d, v1, a1);
    coefficients.follower_diffusion(x1b, fzb, x0db, v1b, b1);
    worst = std::max(worst, ratio(a1, b1, d_follower));
  }
  return worst;
}

double policy_holder_probe(const CoefficientSet& coefficients, const PolicySet& policies,
                           std::size_t n0, std::size_t n1, double a, double b, double exponent,
                           std::size_t trials, std::uint64_t seed) {
  if (!(b > a)) return 0.0;
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-2.0, 2.0), d(a, b);
  double worst = 0.0;
  std::vector<double> x1(n1), x0d(n0), va(n1), vb(n1);
  for (std::size_t trial = 0; trial < trials; ++trial) {
    for (double& x : x1) x = u(gen);
    for (double& x : x0d) x = u(gen);
    const auto z = MeasureFeatures::of(random_measure(gen, n1, 2.0));
    const double da = d(gen), db = d(gen);
    if (da == db) continue;
    policies.follower_control(coefficients, {0.0, x1, z, x0d, da}, false, va);
    policies.follower_control(coefficients, {0.0, x1, z, x0d, db}, false, vb);
    worst = std::max(worst, norm_diff(va, vb) / std::pow(std::abs(da - db), exponent));
  }
  return worst;
}

}  // namespace stackmf::dynamics
