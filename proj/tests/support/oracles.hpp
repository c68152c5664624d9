#pragma once

// Brute-force reference solvers used by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace oracle {

// Transportation optimum by enumerating every basic solution: each subset of
// n + m - 1 cells that forms a spanning tree of the bipartite graph is solved
// by leaf peeling, and the cheapest nonnegative one wins. Exponential; keep
// n, m <= 4.
inline double transport_vertex_enumeration(const std::vector<double>& supply,
                                           const std::vector<double>& demand,
                                           const std::vector<double>& cost) {
  const std::size_t n = supply.size(), m = demand.size(), cells = n * m, k = n + m - 1;
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> pick(cells, 0);
  std::fill(pick.begin(), pick.begin() + k, 1);
  std::sort(pick.begin(), pick.end());
  do {
    std::vector<std::size_t> chosen;
    for (std::size_t c = 0; c < cells; ++c) {
      if (pick[c]) chosen.push_back(c);
    }
    std::vector<double> rs(supply), cs(demand), flow(cells, 0.0);
    std::vector<char> used(chosen.size(), 0);
    bool progress = true;
    std::size_t solved = 0;
    while (progress && solved < chosen.size()) {
      progress = false;
      for (std::size_t i = 0; i < n + m; ++i) {
        std::size_t deg = 0, last = 0;
        for (std::size_t e = 0; e < chosen.size(); ++e) {
          if (used[e]) continue;
          const std::size_t r = chosen[e] / m, c = chosen[e] % m;
          if ((i < n && r == i) || (i >= n && c == i - n)) {
            ++deg;
            last = e;
          }
        }
        if (deg != 1) continue;
        const std::size_t r = chosen[last] / m, c = chosen[last] % m;
        const double f = i < n ? rs[r] : cs[c];
        flow[chosen[last]] = f;
        rs[r] -= f;
        cs[c] -= f;
        used[last] = 1;
        ++solved;
        progress = true;
      }
    }
    if (solved != chosen.size()) continue;
    bool feasible = true;
    for (double r : rs) feasible = feasible && std::abs(r) < 1e-9;
    for (double c : cs) feasible = feasible && std::abs(c) < 1e-9;
    double total = 0.0;
    for (std::size_t c = 0; c < cells; ++c) {
      if (flow[c] < -1e-12) feasible = false;
      total += flow[c] * cost[c];
    }
    if (feasible) best = std::min(best, total);
  } while (std::next_permutation(pick.begin(), pick.end()));
  return best;
}

// Minimum-cost perfect matching by trying every permutation; n <= 8.
inline double assignment_brute_force(std::size_t dim, const std::vector<double>& a,
                                     const std::vector<double>& b) {
  const std::size_t n = a.size() / dim;
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t d = 0; d < dim; ++d) {
        const double diff = a[i * dim + d] - b[perm[i] * dim + d];
        s += diff * diff;
      }
    }
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace oracle
