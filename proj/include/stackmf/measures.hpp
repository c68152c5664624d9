#pragma once

// Finitely supported probability measures on R^d and exact quadratic
// Wasserstein distances between them.

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace stackmf::measures {

/// Weighted point cloud. Points are stored row-major in one flat buffer.
/// Duplicate points are kept as separate atoms.
class DiscreteMeasure {
 public:
  DiscreteMeasure() = default;
  /// Validates: dim >= 1, coords.size() == dim * weights.size(), finite
  /// coordinates, nonnegative weights summing to 1 within 1e-12.
  DiscreteMeasure(std::size_t dim, std::vector<double> coords, std::vector<double> weights);

  static DiscreteMeasure dirac(std::span<const double> point);
  /// Uniform weights 1/n over the given rows.
  static DiscreteMeasure uniform(std::size_t dim, std::vector<double> coords);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return weights_.size(); }
  std::span<const double> point(std::size_t i) const noexcept {
    return {coords_.data() + i * dim_, dim_};
  }
  std::span<const double> coords() const noexcept { return coords_; }
  std::span<const double> weights() const noexcept { return weights_; }
  double weight(std::size_t i) const noexcept { return weights_[i]; }

  /// True when all weights coincide exactly.
  bool is_uniform() const noexcept;

  friend bool operator==(const DiscreteMeasure&, const DiscreteMeasure&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> coords_;
  std::vector<double> weights_;
};

/// Coupling between two discrete measures, stored sparsely (only the
/// positive entries of the plan matrix).
class TransportPlan {
 public:
  struct Entry {
    std::size_t row;
    std::size_t col;
    double mass;
  };

  TransportPlan(DiscreteMeasure rows, DiscreteMeasure cols, std::vector<Entry> entries);

  const DiscreteMeasure& row_measure() const noexcept { return rows_; }
  const DiscreteMeasure& col_measure() const noexcept { return cols_; }
  std::span<const Entry> entries() const noexcept { return entries_; }

  /// Dense rows x cols matrix.
  std::vector<double> dense() const;
  /// Largest absolute violation of either marginal constraint.
  double marginal_error() const;
  /// Sum of mass * |x_i - y_j|^2.
  double cost() const;

 private:
  DiscreteMeasure rows_;
  DiscreteMeasure cols_;
  std::vector<Entry> entries_;
};

struct LpOptions {
  /// Largest support (after dropping zero-weight atoms) accepted by the
  /// network simplex.
  std::size_t support_cap = 512;
};

struct W2Result {
  double w2 = 0.0;
  double w2_squared = 0.0;
};

/// Exact W2 in one dimension through the monotone (quantile) coupling.
double w2_exact_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu);
/// Same, returning the plan as well.
std::pair<double, TransportPlan> w2_exact_1d_plan(const DiscreteMeasure& mu,
                                                  const DiscreteMeasure& nu);

/// (position, mass) atoms of a one-dimensional measure, sorted by position.
using SortedAtoms1d = std::vector<std::pair<double, double>>;
SortedAtoms1d sorted_atoms_1d(const DiscreteMeasure& mu);
/// Squared W2 between two sorted one-dimensional measures.
double w2_squared_sorted_1d(const SortedAtoms1d& a, const SortedAtoms1d& b);

/// Exact W2 by solving the transportation LP with a network simplex.
std::pair<double, TransportPlan> w2_exact_lp(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                             const LpOptions& options = {});

struct W2Options {
  std::size_t lp_support_cap = 512;
  /// Cap for the uniform, equal-size (assignment) route.
  std::size_t assignment_cap = 8192;
};

/// Squared W2 through the cheapest exact route: quantile coupling in 1-D,
/// an optimal assignment for uniform measures of equal size, otherwise the
/// network simplex.
double w2_squared(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                  const W2Options& options = {});

/// (sum_i w_i |x_i|^q)^(1/q); q >= 1.
double moment(const DiscreteMeasure& mu, double q);

/// Uniform measure on the given samples (rows of length dim).
DiscreteMeasure empirical_from_samples(std::size_t dim, std::vector<double> samples);
DiscreteMeasure empirical_from_samples(const std::vector<std::vector<double>>& samples);

/// sum_k lambda_k mu_k with concatenated supports.
DiscreteMeasure mixture(std::span<const DiscreteMeasure> components,
                        std::span<const double> lambdas);

/// Empirical-measure rate: N^-1/2 (n1 < 4), N^-1/2 log N (n1 = 4),
/// N^-2/n1 (n1 > 4). Real-valued N is accepted so the n1 = 4 branch can be
/// evaluated off the integers.
double rate_f(int n1, double N);

}  // namespace stackmf::measures
