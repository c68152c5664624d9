#pragma once

// Euler-Maruyama engine for the delayed leader/follower system.
//
// The leader state lives in R^n0 on [-b, T], followers in R^n1 on [0, T].
// Noise is diagonal (one Brownian motion per state component) and controls
// have the dimension of the state they act on. Whenever a leader component
// reads a follower quantity (or vice versa) and the dimensions differ,
// component k reads component k mod n of the other side.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stackmf/measures.hpp"
#include "stackmf/rng.hpp"

namespace stackmf::dynamics {

class TimeGrid {
 public:
  TimeGrid() = default;
  /// Uniform grid on [-b, T] with step h; h must divide b and T (to 1e-12
  /// relative) and b may be 0.
  TimeGrid(double b, double T, double h);

  double b() const noexcept { return b_; }
  double T() const noexcept { return T_; }
  double h() const noexcept { return h_; }
  /// Steps on [-b, 0] and on [0, T].
  std::size_t history_steps() const noexcept { return nb_; }
  std::size_t steps() const noexcept { return nt_; }
  std::size_t total_steps() const noexcept { return nb_ + nt_; }
  /// Time of forward step s in [0, nt].
  double time(std::size_t s) const noexcept { return static_cast<double>(s) * h_; }
  /// Delay rounded to the nearest multiple of h, in steps.
  std::size_t delay_steps(double delta) const;

 private:
  double b_ = 0.0, T_ = 1.0, h_ = 0.1;
  std::size_t nb_ = 0, nt_ = 10;
};

/// Distribution of follower response delays on [a, b].
class DelayLaw {
 public:
  enum class Kind { degenerate, discrete, uniform, truncated_exponential };

  static DelayLaw degenerate(double a);
  static DelayLaw discrete(std::vector<double> atoms, std::vector<double> probs);
  static DelayLaw uniform(double a, double b);
  /// Exponential(rate) conditioned on [a, b].
  static DelayLaw truncated_exponential(double rate, double a, double b);

  Kind kind() const noexcept { return kind_; }
  double lower() const noexcept { return a_; }
  double upper() const noexcept { return b_; }
  const std::vector<double>& atoms() const noexcept { return atoms_; }
  const std::vector<double>& probs() const noexcept { return probs_; }
  double rate() const noexcept { return rate_; }

  /// P(Delta <= x).
  double cdf(double x) const;
  /// P(Delta < x).
  double cdf_left(double x) const;
  /// Inverse-CDF draw from a uniform in (0, 1).
  double quantile(double u) const;

 private:
  Kind kind_ = Kind::degenerate;
  double a_ = 0.0, b_ = 0.0, rate_ = 0.0;
  std::vector<double> atoms_, probs_;
};

std::vector<double> sample_delays(const DelayLaw& law, std::size_t N, std::uint64_t seed,
                                  std::uint32_t replication = 0);
std::vector<double> snap_delays_to_grid(std::span<const double> delays, const TimeGrid& grid);

struct LeaderInitialLaw {
  enum class Family { constant, ou_path, scaled_brownian };
  Family family = Family::constant;
  double value = 0.0;   ///< constant level, or the starting value at -b
  double sigma = 0.0;   ///< volatility for ou_path / scaled_brownian
  double theta = 1.0;   ///< mean reversion for ou_path

  /// Mean-square Hoelder exponent of the path increments.
  double increment_exponent() const noexcept { return 1.0; }
};

/// Path on the history grid [-b, 0] (history_steps + 1 points, n0 each).
std::vector<double> sample_initial_leader_path(const TimeGrid& grid, std::size_t n0,
                                               const LeaderInitialLaw& law, std::uint64_t seed,
                                               std::uint32_t replication = 0);

struct FollowerInitialLaw {
  enum class Family { dirac, gaussian, bimodal, uniform };
  Family family = Family::dirac;
  double center = 0.0;  ///< dirac point, gaussian mean, or +-center for bimodal
  double spread = 0.0;  ///< gaussian / bimodal standard deviation, uniform half width
};

/// One initial follower state; `entity` selects the random stream.
void sample_follower_initial(const FollowerInitialLaw& law, const rng::Stream& stream,
                             std::span<double> out);

/// Summary statistics of a follower population through which coefficients,
/// costs and policies see the measure argument.
struct MeasureFeatures {
  std::vector<double> mean;    ///< int y dz
  std::vector<double> kernel;  ///< int tanh(y) dz, componentwise
  double second_moment = 0.0;  ///< int |y|^2 dz

  explicit MeasureFeatures(std::size_t n1 = 1) : mean(n1, 0.0), kernel(n1, 0.0) {}
  static MeasureFeatures of(const measures::DiscreteMeasure& z);
};

/// Running sums of the per-particle feature contributions; dividing by the
/// count gives MeasureFeatures. Leave-one-out features are (S - phi_i)/(N-1).
struct FeatureSums {
  std::vector<double> mean, kernel;
  double second_moment = 0.0;
  explicit FeatureSums(std::size_t n1 = 1) : mean(n1, 0.0), kernel(n1, 0.0) {}
  void add(std::span<const double> y);
  MeasureFeatures average(double count) const;
  MeasureFeatures leave_one_out(std::span<const double> y, double count) const;
};

/// Coefficients and costs. All maps act componentwise:
///
///   leader drift      a0 x0 + c0 F(z) + b0 v0
///   leader diffusion  s0 + cs0 G(z)
///   follower drift    a1 x1 + c1 F(z) + k1 x0(t - delta) + b1 v1 + w1 tanh(beta x1)
///   follower diffusion s1 + e1 x0(t - delta) + cs1 G(z)
///
/// F(z) = mean of z for linear_quadratic, and the tanh-kernel average for the
/// other families; G(z) is always the tanh-kernel average. w1 is only used by
/// smooth_nonlinear. Costs are
///
///   f0 = cost0_const + q0 |x0|^2 + r0 |v0|^2 + m0 |x0 - F(z)|^2
///   h0 = qT0 |x0|^2 + mT0 |x0 - F(z)|^2
///   f1 = cost1_const + q1 |x1|^2 + r1 |v1|^2 + m1 |x1 - F(z)|^2
///   h1 = qT1 |x1|^2 + mT1 |x1 - F(z)|^2
class CoefficientSet {
 public:
  enum class Family { linear_quadratic, linear_in_measure, smooth_nonlinear };

  struct Params {
    double a0 = 0, c0 = 0, b0 = 0, s0 = 0, cs0 = 0;
    double a1 = 0, c1 = 0, k1 = 0, b1 = 0, w1 = 0, beta = 1, s1 = 0, e1 = 0, cs1 = 0;
    double cost0_const = 0, q0 = 0, r0 = 0, m0 = 0, qT0 = 0, mT0 = 0;
    double cost1_const = 0, q1 = 0, r1 = 0, m1 = 0, qT1 = 0, mT1 = 0;
    friend bool operator==(const Params&, const Params&) = default;
  };

  CoefficientSet() = default;
  /// Validates that the declared Lipschitz constant dominates the sum of the
  /// absolute coefficients of every map (a sufficient bound).
  CoefficientSet(Family family, Params params, double lipschitz_L);

  Family family() const noexcept { return family_; }
  const Params& params() const noexcept { return p_; }
  double lipschitz() const noexcept { return L_; }
  /// True when any dynamics or policy-free map reads the measure argument.
  bool reads_measure() const noexcept;

  void leader_drift(std::span<const double> x0, const MeasureFeatures& z,
                    std::span<const double> v0, std::span<double> out) const;
  void leader_diffusion(std::span<const double> x0, const MeasureFeatures& z,
                        std::span<const double> v0, std::span<double> out) const;
  void follower_drift(std::span<const double> x1, const MeasureFeatures& z,
                      std::span<const double> x0_delayed, std::span<const double> v1,
                      std::span<double> out) const;
  void follower_diffusion(std::span<const double> x1, const MeasureFeatures& z,
                          std::span<const double> x0_delayed, std::span<const double> v1,
                          std::span<double> out) const;

  double leader_running_cost(std::span<const double> x0, const MeasureFeatures& z,
                             std::span<const double> v0) const;
  double leader_terminal_cost(std::span<const double> x0, const MeasureFeatures& z) const;
  double follower_running_cost(std::span<const double> x1, const MeasureFeatures& z,
                               std::span<const double> v1) const;
  double follower_terminal_cost(std::span<const double> x1, const MeasureFeatures& z) const;

  /// F(z) component k.
  double drift_feature(const MeasureFeatures& z, std::size_t k) const;

 private:
  Family family_ = Family::linear_quadratic;
  Params p_;
  double L_ = 1.0;
};

/// Inputs available to the leader's feedback.
struct LeaderContext {
  double t;
  std::span<const double> x0;
  const MeasureFeatures& z;
};

/// Inputs available to a follower's feedback.
struct FollowerContext {
  double t;
  std::span<const double> x1;
  const MeasureFeatures& z;
  std::span<const double> x0_delayed;
  double delta;
};

/// Linear feedback v = px * x + pz * F(z) + pd * x0(t - delta) + pc + pdelta * delta.
struct LinearFeedback {
  double px = 0, pz = 0, pd = 0, pc = 0, pdelta = 0;
  friend bool operator==(const LinearFeedback&, const LinearFeedback&) = default;
};

/// Prescribed strategies. A custom callable, when present, replaces the
/// linear feedback. `deviator`, when set, is used by follower 0 only.
struct PolicySet {
  LinearFeedback leader;
  LinearFeedback follower;
  std::optional<LinearFeedback> deviator;
  std::function<void(const LeaderContext&, std::span<double>)> leader_custom;
  std::function<void(const FollowerContext&, std::span<double>)> follower_custom;
  double holder_l = 0.0;  ///< declared Hoelder constant in delta

  void leader_control(const CoefficientSet& c, const LeaderContext& ctx,
                      std::span<double> out) const;
  void follower_control(const CoefficientSet& c, const FollowerContext& ctx, bool is_deviator,
                        std::span<double> out) const;
  /// True when any policy reads the measure argument.
  bool reads_measure() const noexcept;
};

struct ModelSpec {
  std::size_t n0 = 1, n1 = 1;
  TimeGrid grid;
  CoefficientSet coefficients;
  LeaderInitialLaw leader_initial;
  FollowerInitialLaw follower_initial;
  double q = 6.0;  ///< moment order of the initial laws

  /// Throws on inconsistent dimensions.
  void validate() const;
};

/// Identifies every random stream of one replication.
struct NoiseRecord {
  std::uint64_t seed = 0;
  std::uint32_t replication = 0;
  /// Forward steps at or after this index draw leader noise from an
  /// independent stream. Used to check that nothing looks ahead.
  std::uint32_t leader_fork_step = 0xFFFFFFFFu;
  friend bool operator==(const NoiseRecord&, const NoiseRecord&) = default;
};

/// Leader Brownian increments (standard normals) for forward step `step`.
void fill_leader_noise(const NoiseRecord& noise, std::size_t step, std::span<double> out);

struct TrajectoryBundle {
  TimeGrid grid;
  std::size_t n0 = 1, n1 = 1, N = 0;
  /// (history_steps + steps + 1) x n0; index history_steps is t = 0.
  std::vector<double> leader;
  /// N x (steps + 1) x n1.
  std::vector<double> followers;
  /// Snapped delays, one per follower.
  std::vector<double> delays;
  /// Random stream entity of each follower; empty means follower i uses i.
  std::vector<std::uint32_t> entities;
  NoiseRecord noise;
  /// steps x n0 and N x steps x n1.
  std::vector<double> leader_controls;
  std::vector<double> follower_controls;

  std::span<const double> leader_at(std::size_t grid_index) const {
    return {leader.data() + grid_index * n0, n0};
  }
  /// Leader at forward step s (t = s h).
  std::span<const double> leader_forward(std::size_t s) const {
    return leader_at(grid.history_steps() + s);
  }
  std::span<const double> follower(std::size_t i, std::size_t s) const {
    return {followers.data() + (i * (grid.steps() + 1) + s) * n1, n1};
  }
  std::span<const double> follower_control(std::size_t i, std::size_t s) const {
    return {follower_controls.data() + (i * grid.steps() + s) * n1, n1};
  }
  std::span<const double> leader_control(std::size_t s) const {
    return {leader_controls.data() + s * n0, n0};
  }
};

/// Simulates the N-player system with delays drawn from `delay_law` and
/// snapped to the grid. Deterministic in (model, policies, N, law, noise).
TrajectoryBundle simulate_nplayer(const ModelSpec& model, const PolicySet& policies,
                                  std::size_t N, const DelayLaw& delay_law,
                                  const NoiseRecord& noise);

/// Same, with explicit (already snapped) delays.
TrajectoryBundle simulate_nplayer_with_delays(const ModelSpec& model, const PolicySet& policies,
                                              std::span<const double> delays,
                                              const NoiseRecord& noise);

/// Follower i's stream entity; relabelling followers means permuting these.
struct FollowerStreams {
  std::vector<std::uint32_t> entity;  ///< empty means entity i for follower i
};

TrajectoryBundle simulate_nplayer_relabelled(const ModelSpec& model, const PolicySet& policies,
                                             std::span<const double> delays,
                                             const NoiseRecord& noise,
                                             const FollowerStreams& streams);

struct CostValues {
  double leader = 0.0;
  std::vector<double> followers;
};

/// Left rectangle rule for the running costs plus terminal costs, with the
/// full empirical measure for the leader and the leave-one-out empirical
/// measure for each follower.
CostValues evaluate_costs_nplayer(const TrajectoryBundle& bundle, const ModelSpec& model);

/// Largest |Delta output| / (|Delta x| + W2(z, z') + |Delta v| + |Delta x0(t - delta)|)
/// over random argument pairs of all four coefficient maps. Measures are
/// random discrete measures with at most 6 atoms inside the given radius.
double lipschitz_probe(const CoefficientSet& coefficients, std::size_t n0, std::size_t n1,
                       std::size_t trials, double radius, std::uint64_t seed);

/// Largest |v(delta) - v(gamma)| / |delta - gamma|^exponent of the follower
/// feedback over random arguments and delay pairs in [a, b].
double policy_holder_probe(const CoefficientSet& coefficients, const PolicySet& policies,
                           std::size_t n0, std::size_t n1, double a, double b, double exponent,
                           std::size_t trials, std::uint64_t seed);

}  // namespace stackmf::dynamics
