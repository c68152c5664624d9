#pragma once

// Explicit couplings between finite mixtures that share their components.

#include <cstddef>
#include <span>
#include <vector>

#include "stackmf/measures.hpp"

namespace stackmf::coupling {

/// Feasible plan between weight vectors p and q that keeps min(p_h, q_h) on
/// the diagonal and spreads the excess of p over the deficit of q
/// proportionally.
struct MixtureCoupling {
  std::vector<double> p;
  std::vector<double> q;
  std::vector<double> pihat;  ///< n x n, row-major

  std::size_t size() const noexcept { return p.size(); }
  double at(std::size_t h, std::size_t l) const { return pihat[h * p.size() + l]; }
};

/// Rows with p_h > q_h send (p_h - q_h)(q_l - p_l) / S to every l with
/// p_l <= q_l, where S is the total excess. Ties p_h = q_h count as deficit
/// rows, so p = q gives a diagonal plan.
MixtureCoupling build_pihat(std::span<const double> p, std::span<const double> q);

/// sum_{h,l} pihat_hl D_hl. D must be symmetric, nonnegative, zero diagonal.
double mixture_w2_upper_bound(const MixtureCoupling& coupling,
                              std::span<const double> pairwise_w2sq);

struct ConvexityCheck {
  double lhs;  ///< W2^2 of the two mixtures
  double rhs;  ///< sum_k lambda_k W2^2(mu_k, nu_k)
};

ConvexityCheck verify_mixture_convexity(std::span<const measures::DiscreteMeasure> mus,
                                        std::span<const measures::DiscreteMeasure> nus,
                                        std::span<const double> lambdas);

/// Half the l1 distance between two probability vectors.
double tv_half(std::span<const double> p, std::span<const double> q);

/// Exact conditional laws on a finite product space. Outcomes are pairs
/// (u, v) of independent uniform digits, u in [0, nu), v in [0, nv). A
/// sigma-algebra generated by u is given as a labelling of u values
/// (equal labels = same atom). For X = phi(u, v), returns for every u the
/// law of X given the atom containing u, as a dense vector over the values
/// 0..nx-1, with exact rational arithmetic in the form (count, denominator)
/// pairs scaled to a common integer denominator.
struct FiniteConditionalLaw {
  std::size_t nx;
  /// counts[u * nx + x] / denominators[u]
  std::vector<long long> counts;
  std::vector<long long> denominators;
};

FiniteConditionalLaw conditional_law_given_labels(std::size_t nu, std::size_t nv, std::size_t nx,
                                                  std::span<const std::size_t> phi,
                                                  std::span<const std::size_t> labels);

/// True when two conditional laws agree exactly for every outcome u.
bool same_conditional_laws(const FiniteConditionalLaw& a, const FiniteConditionalLaw& b);

}  // namespace stackmf::coupling
