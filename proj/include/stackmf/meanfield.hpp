#pragma once

// Particle approximation of the limiting system: the conditional law flow of
// the followers given one leader noise path, found by Picard iteration, and
// limit trajectories driven by the same noise as an N-player run.

#include <cstdint>
#include <utility>
#include <vector>

#include "stackmf/dynamics.hpp"
#include "stackmf/measures.hpp"

namespace stackmf::meanfield {

struct DelayAtom {
  double delay;
  double weight;
};

/// Conditional law z(t) on the forward grid, stored as K particles per
/// delay atom plus the atom weights.
struct ConditionalLawFlow {
  dynamics::TimeGrid grid;
  std::size_t n0 = 1, n1 = 1, K = 0;
  std::vector<DelayAtom> atoms;
  /// (steps + 1) x atoms x K x n1
  std::vector<double> particles;
  /// Features of the mixture at every forward step.
  std::vector<dynamics::MeasureFeatures> features;
  /// Leader path under the final flow, (history_steps + steps + 1) x n0.
  std::vector<double> leader;
  /// Leader noise the flow is conditioned on.
  dynamics::NoiseRecord noise;

  std::span<const double> particle(std::size_t step, std::size_t atom, std::size_t k) const {
    return {particles.data() + ((step * atoms.size() + atom) * K + k) * n1, n1};
  }
  /// Law of atom `atom` at `step`: K uniform points.
  measures::DiscreteMeasure atom_measure(std::size_t step, std::size_t atom) const;
  /// Mixture over atoms at `step`.
  measures::DiscreteMeasure measure_at(std::size_t step) const;
  /// Mixture restricted to at most `cap` points (a fixed, seeded subset of
  /// particle indices per atom).
  measures::DiscreteMeasure subsampled_measure_at(std::size_t step, std::size_t cap) const;
};

struct FixedPointReport {
  std::size_t iterations = 0;
  /// d_m = sup over probe times of W2(z^(m+1)(t), z^(m)(t)).
  std::vector<double> discrepancies;
  bool converged = false;
  double tolerance = 0.0;
};

struct FixedPointOptions {
  std::size_t K = 1024;        ///< particles per delay atom
  double tol = 1e-3;
  std::size_t max_iter = 25;
  double damping = 1.0;        ///< theta in (0, 1]
  std::size_t probe_times = 16;
  std::size_t subsample = 512;
};

/// Damped Picard iteration for the fixed point of the conditional law. The
/// starting flow keeps every particle at its initial position. Particle
/// initial values and noise are drawn once and reused in every iteration.
std::pair<ConditionalLawFlow, FixedPointReport> solve_conditional_law(
    const dynamics::ModelSpec& model, const dynamics::PolicySet& policies,
    const std::vector<DelayAtom>& delay_partition, const dynamics::NoiseRecord& leader_noise,
    const FixedPointOptions& options = {});

/// Level-n uniform partition of [a, b]: atoms are the left endpoints, weights
/// the law's mass of [a_{k-1}, a_k) (last cell closed). Zero-weight cells are
/// dropped, so a point law always yields one atom.
std::vector<DelayAtom> partition_delay_law(const dynamics::DelayLaw& law, std::size_t n);

/// Atoms snapped to the grid, merging atoms that land on the same point.
std::vector<DelayAtom> snap_partition(const std::vector<DelayAtom>& atoms,
                                      const dynamics::TimeGrid& grid);

/// ceil(f(N-1)^(-2q/(3q-4))) clamped to [1, 10^4]; q > 4.
std::size_t balanced_partition_level(int n1, double q, std::size_t N);

/// Limit leader and followers driven by the noise of `noise` (must equal the
/// flow's conditioning noise) with the given snapped delays. The result has
/// the layout of an N-player bundle.
dynamics::TrajectoryBundle simulate_limit_pair(const dynamics::ModelSpec& model,
                                               const dynamics::PolicySet& policies,
                                               const ConditionalLawFlow& zflow,
                                               const dynamics::NoiseRecord& noise,
                                               std::span<const double> delays);

/// Costs of limit trajectories, with z(t) in place of the empirical measure.
dynamics::CostValues evaluate_costs_limit(const dynamics::TrajectoryBundle& limit,
                                          const dynamics::ModelSpec& model,
                                          const ConditionalLawFlow& zflow);

struct HolderReport {
  bool flagged = false;   ///< gaps vanish: no delay dependence to fit
  double exponent = 0.0;  ///< fitted slope
  double exponent_stderr = 0.0;
  double constant = 0.0;  ///< exp(intercept)
  std::vector<double> spacings;  ///< |delta - gamma|
  std::vector<double> gaps;      ///< sup_t E|x1^delta(t) - x1^gamma(t)|^2
};

/// Fits sup_t E|x1^delta - x1^gamma|^2 ~ C |delta - gamma|^alpha with gamma
/// the first entry of `deltas` and common noise across delays. Each
/// replication solves its own flow from `partition`.
HolderReport holder_exponent_estimate(const dynamics::ModelSpec& model,
                                      const dynamics::PolicySet& policies,
                                      const std::vector<DelayAtom>& partition,
                                      const std::vector<double>& deltas, std::size_t reps,
                                      std::uint64_t seed, const FixedPointOptions& options = {});

}  // namespace stackmf::meanfield
