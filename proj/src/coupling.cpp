#include "stackmf/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "stackmf/errors.hpp"

namespace stackmf::coupling {
namespace {

void check_probability_vector(std::span<const double> p, const char* name) {
  double s = 0.0;
  for (double x : p) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
      throw ValidationError(std::string(name) + " has a negative or non-finite entry");
    }
    s += x;
  }
  if (std::abs(s - 1.0) > 1e-10) {
    throw ValidationError(std::string(name) + " does not sum to 1");
  }
}

void check_pair(std::span<const double> p, std::span<const double> q) {
  if (p.empty()) throw ValidationError("probability vectors must be nonempty");
  if (p.size() != q.size()) throw DimensionError("probability vectors differ in length");
  check_probability_vector(p, "p");
  check_probability_vector(q, "q");
}

}  // namespace

MixtureCoupling build_pihat(std::span<const double> p, std::span<const double> q) {
  check_pair(p, q);
  const std::size_t n = p.size();
  MixtureCoupling c{{p.begin(), p.end()}, {q.begin(), q.end()}, std::vector<double>(n * n, 0.0)};
  double excess = 0.0;
  for (std::size_t h = 0; h < n; ++h) {
    c.pihat[h * n + h] = std::min(p[h], q[h]);
    if (p[h] > q[h]) excess += p[h] - q[h];
  }
  if (excess > 0.0) {
    for (std::size_t h = 0; h < n; ++h) {
      if (!(p[h] > q[h])) continue;
      for (std::size_t l = 0; l < n; ++l) {
        if (p[l] <= q[l]) c.pihat[h * n + l] = (p[h] - q[h]) * (q[l] - p[l]) / excess;
      }
    }
  }
  return c;
}

double mixture_w2_upper_bound(const MixtureCoupling& coupling,
                              std::span<const double> pairwise_w2sq) {
  const std::size_t n = coupling.size();
  if (pairwise_w2sq.size() != n * n) {
    throw DimensionError("pairwise matrix does not match the coupling size");
  }
  for (std::size_t h = 0; h < n; ++h) {
    if (pairwise_w2sq[h * n + h] != 0.0) throw ValidationError("pairwise matrix diagonal must be 0");
    for (std::size_t l = 0; l < n; ++l) {
      const double d = pairwise_w2sq[h * n + l];
      if (!(d >= 0.0)) throw ValidationError("pairwise matrix has a negative entry");
      if (d != pairwise_w2sq[l * n + h]) throw ValidationError("pairwise matrix is not symmetric");
    }
  }
  double bound = 0.0;
  for (std::size_t k = 0; k < n * n; ++k) bound += coupling.pihat[k] * pairwise_w2sq[k];
  return bound;
}

ConvexityCheck verify_mixture_convexity(std::span<const measures::DiscreteMeasure> mus,
                                        std::span<const measures::DiscreteMeasure> nus,
                                        std::span<const double> lambdas) {
  if (mus.size() != nus.size() || mus.size() != lambdas.size()) {
    throw DimensionError("convexity check needs equally many mus, nus and lambdas");
  }
  const auto left = measures::mixture(mus, lambdas);
  const auto right = measures::mixture(nus, lambdas);
  const auto [w, plan] = measures::w2_exact_lp(left, right);
  double rhs = 0.0;
  for (std::size_t k = 0; k < mus.size(); ++k) {
    if (lambdas[k] == 0.0) continue;
    rhs += lambdas[k] * measures::w2_exact_lp(mus[k], nus[k]).second.cost();
  }
  return {plan.cost(), rhs};
}

double tv_half(std::span<const double> p, std::span<const double> q) {
  check_pair(p, q);
  double s = 0.0;
  for (std::size_t h = 0; h < p.size(); ++h) s += std::abs(p[h] - q[h]);
  return 0.5 * s;
}

FiniteConditionalLaw conditional_law_given_labels(std::size_t nu, std::size_t nv, std::size_t nx,
                                                  std::span<const std::size_t> phi,
                                                  std::span<const std::size_t> labels) {
  if (phi.size() != nu * nv || labels.size() != nu) {
    throw DimensionError("finite space: phi must be nu x nv and labels length nu");
  }
  std::map<std::size_t, std::vector<long long>> counts_by_label;
  std::map<std::size_t, long long> size_by_label;
  for (std::size_t u = 0; u < nu; ++u) {
    auto& counts = counts_by_label[labels[u]];
    counts.resize(nx, 0);
    for (std::size_t v = 0; v < nv; ++v) {
      const std::size_t x = phi[u * nv + v];
      if (x >= nx) throw ValidationError("phi value out of range");
      ++counts[x];
    }
    size_by_label[labels[u]] += static_cast<long long>(nv);
  }
  FiniteConditionalLaw law{nx, {}, {}};
  for (std::size_t u = 0; u < nu; ++u) {
    const auto& counts = counts_by_label[labels[u]];
    law.counts.insert(law.counts.end(), counts.begin(), counts.end());
    law.denominators.push_back(size_by_label[labels[u]]);
  }
  return law;
}

bool same_conditional_laws(const FiniteConditionalLaw& a, const FiniteConditionalLaw& b) {
  if (a.nx != b.nx || a.denominators.size() != b.denominators.size()) return false;
  for (std::size_t u = 0; u < a.denominators.size(); ++u) {
    for (std::size_t x = 0; x < a.nx; ++x) {
      // Cross-multiplication keeps the comparison exact.
      if (a.counts[u * a.nx + x] * b.denominators[u] != b.counts[u * b.nx + x] * a.denominators[u]) {
        return false;
      }
    }
  }
  return true;
}

}  // namespace stackmf::coupling
