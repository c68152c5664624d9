#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <vector>

#include "stackmf/errors.hpp"
#include "stackmf/transport.hpp"

namespace stackmf::measures::transport {
namespace {

constexpr std::size_t kFree = std::numeric_limits<std::size_t>::max();
constexpr std::size_t kNeighbours = 16;

double sqdist(std::size_t dim, const double* x, const double* y) {
  double s = 0.0;
  for (std::size_t k = 0; k < dim; ++k) {
    const double d = x[k] - y[k];
    s += d * d;
  }
  return s;
}

// Sparse bipartite graph with per-row adjacency; arcs carry their cost.
struct CandidateGraph {
  std::vector<std::vector<std::size_t>> cols;
  std::vector<std::vector<double>> costs;

  bool has(std::size_t i, std::size_t j) const {
    return std::find(cols[i].begin(), cols[i].end(), j) != cols[i].end();
  }
  void add(std::size_t i, std::size_t j, double c) {
    if (has(i, j)) return;
    cols[i].push_back(j);
    costs[i].push_back(c);
  }
};

class SparseAssignment {
 public:
  SparseAssignment(std::size_t dim, std::span<const double> a, std::span<const double> b)
      : dim_(dim), n_(a.size() / dim), a_(a), b_(b) {
    graph_.cols.resize(n_);
    graph_.costs.resize(n_);
    build_candidates();
    u_.assign(n_, 0.0);
    v_.assign(n_, 0.0);
    col_of_row_.assign(n_, kFree);
    row_of_col_.assign(n_, kFree);
    for (std::size_t i = 0; i < n_; ++i) reset_row_dual(i);
  }

  AssignmentSolution solve() {
    AssignmentSolution out;
    while (true) {
      for (std::size_t i = 0; i < n_; ++i) {
        if (col_of_row_[i] == kFree) augment_from(i);
      }
      ++out.verification_rounds;
      if (verify_and_extend() == 0) break;
    }
    out.col_of_row = col_of_row_;
    out.row_dual = u_;
    out.col_dual = v_;
    for (std::size_t i = 0; i < n_; ++i) out.cost += cost(i, col_of_row_[i]);
    return out;
  }

 private:
  double cost(std::size_t i, std::size_t j) const {
    return sqdist(dim_, a_.data() + i * dim_, b_.data() + j * dim_);
  }

  void build_candidates() {
    const std::size_t k = std::min(kNeighbours, n_);
    std::vector<std::pair<double, std::size_t>> row(n_);
    // For each column, keep its k cheapest rows as a bounded max-heap.
    std::vector<std::vector<std::pair<double, std::size_t>>> col_best(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) {
        const double c = cost(i, j);
        row[j] = {c, j};
        auto& heap = col_best[j];
        if (heap.size() < k) {
          heap.emplace_back(c, i);
          std::push_heap(heap.begin(), heap.end());
        } else if (c < heap.front().first) {
          std::pop_heap(heap.begin(), heap.end());
          heap.back() = {c, i};
          std::push_heap(heap.begin(), heap.end());
        }
      }
      std::nth_element(row.begin(), row.begin() + (k - 1), row.end());
      for (std::size_t r = 0; r < k; ++r) graph_.add(i, row[r].second, row[r].first);
    }
    for (std::size_t j = 0; j < n_; ++j) {
      for (const auto& [c, i] : col_best[j]) graph_.add(i, j, c);
    }
  }

  // Lowers u_i so that every candidate arc of row i has nonnegative reduced
  // cost; unmatches the row if its matched arc is no longer tight.
  void reset_row_dual(std::size_t i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t e = 0; e < graph_.cols[i].size(); ++e) {
      best = std::min(best, graph_.costs[i][e] - v_[graph_.cols[i][e]]);
    }
    if (best < u_[i] || col_of_row_[i] == kFree) {
      u_[i] = best;
      const std::size_t j = col_of_row_[i];
      if (j != kFree && graph_.costs[i][index_of(i, j)] - u_[i] - v_[j] > 0.0) {
        col_of_row_[i] = kFree;
        row_of_col_[j] = kFree;
      }
    }
  }

  std::size_t index_of(std::size_t i, std::size_t j) const {
    const auto& c = graph_.cols[i];
    return static_cast<std::size_t>(std::find(c.begin(), c.end(), j) - c.begin());
  }

  // Dijkstra over reduced costs from free row `start`; augments along the
  // shortest path to a free column and shifts duals to keep reduced costs
  // nonnegative on all candidate arcs.
  void augment_from(std::size_t start) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    dist_.assign(n_, inf);
    pred_row_.assign(n_, kFree);
    std::vector<char> done(n_, 0);
    finalized_cols_.clear();
    finalized_rows_.clear();
    row_dist_.clear();

    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    auto relax_row = [&](std::size_t i, double di) {
      finalized_rows_.push_back(i);
      row_dist_.push_back(di);
      const auto& cols = graph_.cols[i];
      const auto& costs = graph_.costs[i];
      for (std::size_t e = 0; e < cols.size(); ++e) {
        const std::size_t j = cols[e];
        if (done[j]) continue;
        const double nd = di + std::max(0.0, costs[e] - u_[i] - v_[j]);
        if (nd < dist_[j]) {
          dist_[j] = nd;
          pred_row_[j] = i;
          heap.emplace(nd, j);
        }
      }
    };
    relax_row(start, 0.0);
    std::size_t sink = kFree;
    double sink_dist = 0.0;
    while (!heap.empty()) {
      const auto [d, j] = heap.top();
      heap.pop();
      if (done[j] || d > dist_[j]) continue;
      done[j] = 1;
      finalized_cols_.push_back(j);
      if (row_of_col_[j] == kFree) {
        sink = j;
        sink_dist = d;
        break;
      }
      relax_row(row_of_col_[j], d);
    }
    if (sink == kFree) {
      // The candidate graph has no augmenting path for this row: make the
      // row dense and retry.
      for (std::size_t j = 0; j < n_; ++j) graph_.add(start, j, cost(start, j));
      reset_row_dual(start);
      augment_from(start);
      return;
    }
    for (std::size_t r = 0; r < finalized_rows_.size(); ++r) {
      u_[finalized_rows_[r]] += sink_dist - row_dist_[r];
    }
    for (std::size_t j : finalized_cols_) v_[j] -= sink_dist - dist_[j];
    for (std::size_t j = sink; j != kFree;) {
      const std::size_t i = pred_row_[j];
      const std::size_t previous = col_of_row_[i];
      col_of_row_[i] = j;
      row_of_col_[j] = i;
      j = previous;
    }
  }

  // Checks c_ij - u_i - v_j >= -tol over all pairs; adds violators to the
  // candidate graph and frees the affected rows. Returns the number of rows
  // touched.
  std::size_t verify_and_extend() {
    double scale = 0.0;
    for (std::size_t i = 0; i < n_; ++i) scale = std::max(scale, std::abs(u_[i]));
    for (std::size_t j = 0; j < n_; ++j) scale = std::max(scale, std::abs(v_[j]));
    const double tol = 1e-12 * (1.0 + scale);
    std::size_t touched = 0;
    for (std::size_t i = 0; i < n_; ++i) {
      bool row_touched = false;
      for (std::size_t j = 0; j < n_; ++j) {
        const double c = cost(i, j);
        if (c - u_[i] - v_[j] < -tol) {
          graph_.add(i, j, c);
          row_touched = true;
        }
      }
      if (row_touched) {
        ++touched;
        reset_row_dual(i);
      }
    }
    return touched;
  }

  std::size_t dim_, n_;
  std::span<const double> a_, b_;
  CandidateGraph graph_;
  std::vector<double> u_, v_;
  std::vector<std::size_t> col_of_row_, row_of_col_;
  std::vector<double> dist_, row_dist_;
  std::vector<std::size_t> pred_row_, finalized_cols_, finalized_rows_;
};

}  // namespace

AssignmentSolution solve_assignment_sqeuclidean(std::size_t dim, std::span<const double> a,
                                                std::span<const double> b) {
  if (dim == 0) throw DimensionError("assignment: dimension must be positive");
  if (a.size() != b.size() || a.size() % dim != 0) {
    throw DimensionError("assignment: point sets must have equal size and dimension");
  }
  if (a.empty()) throw ValidationError("assignment: empty point sets");
  SparseAssignment solver(dim, a, b);
  return solver.solve();
}

}  // namespace stackmf::measures::transport
