#pragma once

// Experiment harness: gaps between the N-player system and its limit,
// empirical Wasserstein rates, slope fits against the predicted exponents,
// and equilibrium certification against finite deviation libraries.

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "stackmf/dynamics.hpp"
#include "stackmf/meanfield.hpp"
#include "stackmf/stats.hpp"

namespace stackmf::rates {

enum class Regime { general, sigma0_control_free, discrete_delta, degenerate_delta, linear_in_measure };
enum class Quantity { squared_state_gap, cost_gap };

std::string to_string(Regime r);
std::string to_string(Quantity q);
Regime regime_from_string(const std::string& s);

struct PredictedRate {
  /// Exponent on f(N-1), or on 1/N when `on_f` is false.
  double exponent = 0.0;
  bool on_f = true;
  /// Combined decay N^(-n_exponent) for the given n1 (log factors dropped).
  double n_exponent = 0.0;
  std::string rate;
};

PredictedRate predicted_exponent(int n1, double q, Regime regime, Quantity quantity);

/// Decay order of f(N) itself: 1/2 for n1 <= 4, 2/n1 above.
double f_order(int n1);

/// OLS of log value on log N. Needs >= 3 points and positive values.
stats::LinearFit fit_slope(std::span<const double> Ns, std::span<const double> values);

struct Estimate {
  double mean = 0.0;
  double se = 0.0;  ///< standard error of the mean
  std::size_t count = 0;
};

struct GapPoint {
  std::size_t N = 0;
  std::size_t reps = 0;
  Estimate leader;    ///< squared S^2 leader gap, or leader cost gap
  Estimate follower;  ///< sup over delay atoms of the follower gap
  Estimate w2;        ///< time-integrated W2^2 of the empirical law against z
  Estimate gap;       ///< the fitted quantity
};

struct GapReport {
  std::string scenario;
  std::string quantity;  ///< squared_state_gap, cost_gap or w2_gap
  std::vector<GapPoint> points;
  std::size_t reps = 0;
  bool slope_defined = false;
  double slope = std::numeric_limits<double>::quiet_NaN();
  double slope_stderr = std::numeric_limits<double>::quiet_NaN();
  double r2 = std::numeric_limits<double>::quiet_NaN();
  /// Predicted log-log slope (negative), NaN when no prediction applies.
  double predicted_slope = std::numeric_limits<double>::quiet_NaN();
  std::string predicted_rate;
  /// pass, fail, undefined (no slope) or unchecked.
  std::string verdict = "unchecked";
  std::size_t fixed_point_failures = 0;
  std::size_t explosions = 0;
  /// Replications where a coupling inequality failed beyond 1e-10.
  std::size_t coupling_violations = 0;
};

struct ExperimentOptions {
  std::size_t reps = 100;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  meanfield::FixedPointOptions fixed_point;  ///< K lives here
  /// Level of the uniform partition for continuous delay laws; 0 selects
  /// the balanced level for each N.
  std::size_t partition_level = 0;
  /// Support cap for W2 evaluations against z when n1 > 1.
  std::size_t w2_subsample = 512;
  /// Regime used for the predicted slope.
  Regime regime = Regime::general;
  bool assert_rate = false;
  double slope_tolerance = 0.25;
  /// Only require slope <= predicted + tolerance.
  bool upper_bound_only = false;
  /// Check the synchronous-coupling and leave-one-out inequalities.
  bool check_coupling = true;
  std::string scenario = "scenario";
};

/// Squared S^2 gaps between an N-player run and its synchronously coupled
/// limit pair, leader and sup over delay atoms of the followers.
GapReport state_gap_experiment(const dynamics::ModelSpec& model,
                               const dynamics::PolicySet& policies,
                               const dynamics::DelayLaw& delay_law, std::span<const std::size_t> Ns,
                               const ExperimentOptions& options);

/// |J^N - J| for the leader and followers on coupled trajectories.
GapReport cost_gap_experiment(const dynamics::ModelSpec& model, const dynamics::PolicySet& policies,
                              const dynamics::DelayLaw& delay_law, std::span<const std::size_t> Ns,
                              const ExperimentOptions& options);

/// E int_0^T W2^2(empirical law of N-1 iid limit followers, z(t)) dt.
GapReport wasserstein_gap_curve(const dynamics::ModelSpec& model,
                                const dynamics::PolicySet& policies,
                                const dynamics::DelayLaw& delay_law,
                                std::span<const std::size_t> Ns, const ExperimentOptions& options);

/// E W2^2 between two independent empirical measures of N standard
/// Gaussian samples in R^n1. For n1 = 4 the fitted values are divided by
/// log N. Predicted slope is -f_order(n1).
GapReport empirical_rate_curve(int n1, std::span<const std::size_t> Ns, std::size_t reps,
                               std::uint64_t seed, std::size_t threads = 1);

/// Sets report.verdict from the fitted slope.
void judge(GapReport& report, double tolerance, bool upper_bound_only);

/// Delay partition used for the conditional law: the atoms themselves for
/// point and discrete laws, the (snapped) uniform partition otherwise.
std::vector<meanfield::DelayAtom> flow_partition(const dynamics::DelayLaw& law,
                                                 const dynamics::ModelSpec& model,
                                                 std::size_t level, std::size_t N);

struct EtaReport {
  std::size_t N = 0;
  std::size_t step = 0;
  Estimate mean_square;     ///< E|(1/(N-1)) sum_j eta_j|^2
  Estimate scaled_single;   ///< (1/(N-1)) E|eta_j|^2
  double ratio = 0.0;
  std::size_t fixed_point_failures = 0;
};

/// Zero-mean fluctuations eta_j = int tanh dz(s) - tanh(x_j(s)) of N-1
/// limit followers sharing one leader path; compares the mean square of
/// their average with the single-term prediction.
EtaReport eta_orthogonality(const dynamics::ModelSpec& model, const dynamics::PolicySet& policies,
                            const dynamics::DelayLaw& delay_law, std::size_t N, std::size_t step,
                            const ExperimentOptions& options);

struct DeviationOutcome {
  Estimate cost;       ///< deviating player's cost
  Estimate advantage;  ///< J(profile) - J(deviation), paired over replications
  double l2_norm = 0.0;  ///< largest over delay groups of E int |v|^2 dt
};

struct EpsilonReport {
  std::size_t N = 0;
  std::size_t reps = 0;
  Estimate profile_cost;         ///< follower 0
  Estimate leader_profile_cost;
  std::vector<DeviationOutcome> deviations;
  std::vector<DeviationOutcome> leader_deviations;
  double epsilon = 0.0;          ///< floored at 0
  double leader_epsilon = 0.0;
  bool common_random_numbers = true;
  /// Probed Hoelder-1/2 constant of the profile's follower feedback in delta.
  double profile_holder_constant = 0.0;
};

struct CertifyOptions {
  std::size_t reps = 200;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  double kappa = std::numeric_limits<double>::infinity();  ///< follower L2 cap
  double gamma = std::numeric_limits<double>::infinity();  ///< leader L2 cap
};

/// Follower 0 deviates to each library entry (its `deviator` if set,
/// otherwise its `follower` feedback); the leader deviates to each leader
/// library entry's `leader` feedback. All arms share the noise of each
/// replication.
EpsilonReport epsilon_nash_certify(const dynamics::ModelSpec& model,
                                   const dynamics::PolicySet& profile,
                                   const std::vector<dynamics::PolicySet>& deviation_library,
                                   const std::vector<dynamics::PolicySet>& leader_library,
                                   const dynamics::DelayLaw& delay_law, std::size_t N,
                                   const CertifyOptions& options);

}  // namespace stackmf::rates
