#include "stackmf/measures.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "stackmf/errors.hpp"
#include "stackmf/transport.hpp"

namespace stackmf::measures {
namespace {

// Neumaier summation keeps the weight-sum check meaningful for 10^5 atoms.
double stable_sum(std::span<const double> xs) {
  double sum = 0.0, comp = 0.0;
  for (double x : xs) {
    const double t = sum + x;
    comp += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  }
  return sum + comp;
}

double sqdist(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double d = x[k] - y[k];
    s += d * d;
  }
  return s;
}

// Drops zero-weight atoms; `index` maps the compacted atoms back.
struct Compacted {
  std::vector<double> weights;
  std::vector<std::size_t> index;
};

Compacted positive_atoms(const DiscreteMeasure& mu) {
  Compacted out;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (mu.weight(i) > 0.0) {
      out.weights.push_back(mu.weight(i));
      out.index.push_back(i);
    }
  }
  return out;
}

void require_same_dim(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  if (mu.dim() != nu.dim()) {
    throw DimensionError("measures live in different dimensions (" + std::to_string(mu.dim()) +
                         " vs " + std::to_string(nu.dim()) + ")");
  }
  if (mu.size() == 0 || nu.size() == 0) throw ValidationError("empty measure");
}

}  // namespace

DiscreteMeasure::DiscreteMeasure(std::size_t dim, std::vector<double> coords,
                                 std::vector<double> weights)
    : dim_(dim), coords_(std::move(coords)), weights_(std::move(weights)) {
  if (dim_ == 0) throw DimensionError("measure dimension must be >= 1");
  if (weights_.empty()) throw ValidationError("measure needs at least one atom");
  if (coords_.size() != dim_ * weights_.size()) {
    throw DimensionError("coordinate buffer does not match dim x atoms");
  }
  for (double c : coords_) {
    if (!std::isfinite(c)) throw ValidationError("non-finite coordinate");
  }
  for (double w : weights_) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("weights must be finite and >= 0");
  }
  const double total = stable_sum(weights_);
  if (std::abs(total - 1.0) > 1e-12) {
    throw ValidationError("weights sum to " + std::to_string(total) + ", expected 1");
  }
}

DiscreteMeasure DiscreteMeasure::dirac(std::span<const double> point) {
  return DiscreteMeasure(point.size(), std::vector<double>(point.begin(), point.end()), {1.0});
}

DiscreteMeasure DiscreteMeasure::uniform(std::size_t dim, std::vector<double> coords) {
  if (dim == 0) throw DimensionError("measure dimension must be >= 1");
  const std::size_t n = coords.size() / dim;
  if (n == 0) throw ValidationError("uniform measure needs at least one point");
  return DiscreteMeasure(dim, std::move(coords), std::vector<double>(n, 1.0 / double(n)));
}

bool DiscreteMeasure::is_uniform() const noexcept {
  return std::adjacent_find(weights_.begin(), weights_.end(), std::not_equal_to<>()) ==
         weights_.end();
}

TransportPlan::TransportPlan(DiscreteMeasure rows, DiscreteMeasure cols,
                             std::vector<Entry> entries)
    : rows_(std::move(rows)), cols_(std::move(cols)), entries_(std::move(entries)) {
  for (const auto& e : entries_) {
    if (e.row >= rows_.size() || e.col >= cols_.size() || !(e.mass >= 0.0)) {
      throw ValidationError("transport plan entry out of range");
    }
  }
}

std::vector<double> TransportPlan::dense() const {
  std::vector<double> m(rows_.size() * cols_.size(), 0.0);
  for (const auto& e : entries_) m[e.row * cols_.size() + e.col] += e.mass;
  return m;
}

double TransportPlan::marginal_error() const {
  std::vector<double> r(rows_.size(), 0.0), c(cols_.size(), 0.0);
  for (const auto& e : entries_) {
    r[e.row] += e.mass;
    c[e.col] += e.mass;
  }
  double err = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) err = std::max(err, std::abs(r[i] - rows_.weight(i)));
  for (std::size_t j = 0; j < c.size(); ++j) err = std::max(err, std::abs(c[j] - cols_.weight(j)));
  return err;
}

double TransportPlan::cost() const {
  double s = 0.0;
  for (const auto& e : entries_) s += e.mass * sqdist(rows_.point(e.row), cols_.point(e.col));
  return s;
}

std::pair<double, TransportPlan> w2_exact_1d_plan(const DiscreteMeasure& mu,
                                                  const DiscreteMeasure& nu) {
  require_same_dim(mu, nu);
  if (mu.dim() != 1) throw DimensionError("w2_exact_1d needs one-dimensional measures");
  auto order = [](const DiscreteMeasure& m) {
    std::vector<std::size_t> idx(m.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return m.point(a)[0] < m.point(b)[0]; });
    return idx;
  };
  const auto a = order(mu);
  const auto b = order(nu);
  std::vector<TransportPlan::Entry> entries;
  std::size_t i = 0, j = 0;
  double left_a = mu.weight(a[0]);
  double left_b = nu.weight(b[0]);
  double cost = 0.0;
  while (i < a.size() && j < b.size()) {
    const double m = std::min(left_a, left_b);
    if (m > 0.0) {
      const double d = mu.point(a[i])[0] - nu.point(b[j])[0];
      cost += m * d * d;
      entries.push_back({a[i], b[j], m});
    }
    left_a -= m;
    left_b -= m;
    // Advance whichever side is exhausted; on exact ties advance both.
    const bool next_a = left_a <= left_b;
    const bool next_b = left_b <= left_a;
    if (next_a && ++i < a.size()) left_a = mu.weight(a[i]);
    if (next_b && ++j < b.size()) left_b = nu.weight(b[j]);
  }
  return {std::sqrt(cost), TransportPlan(mu, nu, std::move(entries))};
}

SortedAtoms1d sorted_atoms_1d(const DiscreteMeasure& mu) {
  if (mu.dim() != 1) throw DimensionError("sorted_atoms_1d needs a one-dimensional measure");
  SortedAtoms1d v(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) v[i] = {mu.coords()[i], mu.weight(i)};
  std::sort(v.begin(), v.end());
  return v;
}

double w2_squared_sorted_1d(const SortedAtoms1d& a, const SortedAtoms1d& b) {
  if (a.empty() || b.empty()) throw ValidationError("empty measure");
  std::size_t i = 0, j = 0;
  double left_a = a[0].second, left_b = b[0].second, cost = 0.0;
  while (i < a.size() && j < b.size()) {
    const double m = std::min(left_a, left_b);
    const double d = a[i].first - b[j].first;
    cost += m * d * d;
    left_a -= m;
    left_b -= m;
    const bool next_a = left_a <= left_b;
    const bool next_b = left_b <= left_a;
    if (next_a && ++i < a.size()) left_a = a[i].second;
    if (next_b && ++j < b.size()) left_b = b[j].second;
  }
  return cost;
}

double w2_exact_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  require_same_dim(mu, nu);
  if (mu.dim() != 1) throw DimensionError("w2_exact_1d needs one-dimensional measures");
  return std::sqrt(w2_squared_sorted_1d(sorted_atoms_1d(mu), sorted_atoms_1d(nu)));
}

std::pair<double, TransportPlan> w2_exact_lp(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                             const LpOptions& options) {
  require_same_dim(mu, nu);
  const Compacted rows = positive_atoms(mu);
  const Compacted cols = positive_atoms(nu);
  if (rows.weights.size() > options.support_cap || cols.weights.size() > options.support_cap) {
    throw CapacityError("exact LP support cap " + std::to_string(options.support_cap) +
                        " exceeded (" + std::to_string(rows.weights.size()) + " x " +
                        std::to_string(cols.weights.size()) + ")");
  }
  const std::size_t n = rows.weights.size(), m = cols.weights.size();
  std::vector<double> cost(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      cost[i * m + j] = sqdist(mu.point(rows.index[i]), nu.point(cols.index[j]));
    }
  }
  const auto solution = transport::solve_transportation(rows.weights, cols.weights, cost);
  std::vector<TransportPlan::Entry> entries;
  entries.reserve(solution.flows.size());
  for (const auto& f : solution.flows) {
    entries.push_back({rows.index[f.row], cols.index[f.col], f.mass});
  }
  const double w2sq = std::max(0.0, solution.cost);
  return {std::sqrt(w2sq), TransportPlan(mu, nu, std::move(entries))};
}

double w2_squared(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                  const W2Options& options) {
  require_same_dim(mu, nu);
  if (mu.dim() == 1) {
    const double w = w2_exact_1d(mu, nu);
    return w * w;
  }
  if (mu.size() == nu.size() && mu.is_uniform() && nu.is_uniform()) {
    if (mu.size() > options.assignment_cap) {
      throw CapacityError("assignment cap " + std::to_string(options.assignment_cap) +
                          " exceeded");
    }
    const auto sol = transport::solve_assignment_sqeuclidean(mu.dim(), mu.coords(), nu.coords());
    return sol.cost / double(mu.size());
  }
  const auto [w, plan] = w2_exact_lp(mu, nu, LpOptions{options.lp_support_cap});
  return plan.cost();
}

double moment(const DiscreteMeasure& mu, double q) {
  if (!(q >= 1.0)) throw ParameterError("moment order q must be >= 1");
  double s = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    double norm2 = 0.0;
    for (double c : mu.point(i)) norm2 += c * c;
    s += mu.weight(i) * std::pow(std::sqrt(norm2), q);
  }
  return std::pow(s, 1.0 / q);
}

DiscreteMeasure empirical_from_samples(std::size_t dim, std::vector<double> samples) {
  if (samples.empty()) throw ValidationError("empirical measure needs at least one sample");
  if (dim == 0 || samples.size() % dim != 0) {
    throw DimensionError("sample buffer is not a whole number of points");
  }
  return DiscreteMeasure::uniform(dim, std::move(samples));
}

DiscreteMeasure empirical_from_samples(const std::vector<std::vector<double>>& samples) {
  if (samples.empty()) throw ValidationError("empirical measure needs at least one sample");
  const std::size_t dim = samples.front().size();
  std::vector<double> flat;
  flat.reserve(dim * samples.size());
  for (const auto& s : samples) {
    if (s.size() != dim) throw DimensionError("samples have inconsistent dimensions");
    flat.insert(flat.end(), s.begin(), s.end());
  }
  return empirical_from_samples(dim, std::move(flat));
}

DiscreteMeasure mixture(std::span<const DiscreteMeasure> components,
                        std::span<const double> lambdas) {
  if (components.empty()) throw ValidationError("mixture needs at least one component");
  if (components.size() != lambdas.size()) {
    throw DimensionError("mixture: one lambda per component required");
  }
  for (double l : lambdas) {
    if (!(l >= 0.0)) throw ValidationError("mixture weights must be nonnegative");
  }
  if (std::abs(stable_sum(lambdas) - 1.0) > 1e-10) {
    throw ValidationError("mixture weights must sum to 1");
  }
  const std::size_t dim = components.front().dim();
  std::vector<double> coords, weights;
  for (std::size_t k = 0; k < components.size(); ++k) {
    const auto& c = components[k];
    if (c.dim() != dim) throw DimensionError("mixture components differ in dimension");
    coords.insert(coords.end(), c.coords().begin(), c.coords().end());
    for (double w : c.weights()) weights.push_back(lambdas[k] * w);
  }
  // Lambdas may be off by up to 1e-10; renormalise so the result validates.
  const double total = stable_sum(weights);
  for (double& w : weights) w /= total;
  return DiscreteMeasure(dim, std::move(coords), std::move(weights));
}

double rate_f(int n1, double N) {
  if (n1 < 1) throw ParameterError("dimension n1 must be >= 1");
  if (!(N >= 2.0)) throw ParameterError("rate_f needs N >= 2");
  if (n1 < 4) return 1.0 / std::sqrt(N);
  if (n1 == 4) return std::log(N) / std::sqrt(N);
  return std::pow(N, -2.0 / n1);
}

}  // namespace stackmf::measures
