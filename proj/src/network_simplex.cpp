#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "stackmf/errors.hpp"
#include "stackmf/transport.hpp"

namespace stackmf::measures::transport {
namespace {

// Nodes: supplies 0..n-1, demands n..n+m-1, artificial root n+m.
// Arcs: real arc i*m+j goes i -> n+j; artificial arc n*m+v joins v and the
// root (v -> root for supplies, root -> v for demands).
class NetworkSimplex {
 public:
  NetworkSimplex(std::span<const double> supply, std::span<const double> demand,
                 std::span<const double> cost)
      : n_(supply.size()),
        m_(demand.size()),
        real_arcs_(n_ * m_),
        node_count_(n_ + m_ + 1),
        root_(n_ + m_),
        cost_(cost),
        flow_(real_arcs_ + n_ + m_, 0.0),
        parent_(node_count_),
        pred_(node_count_),
        pred_up_(node_count_),
        depth_(node_count_),
        pi_(node_count_),
        tree_adj_(node_count_) {
    double max_cost = 0.0;
    for (double c : cost_) max_cost = std::max(max_cost, std::abs(c));
    artificial_cost_ = (max_cost + 1.0) * static_cast<double>(node_count_);
    eps_ = 1e-12 * (1.0 + max_cost);
    for (std::size_t v = 0; v < n_ + m_; ++v) {
      const std::size_t arc = real_arcs_ + v;
      flow_[arc] = v < n_ ? supply[v] : demand[v - n_];
      tree_adj_[v].push_back(arc);
      tree_adj_[root_].push_back(arc);
    }
    rebuild_tree();
  }

  TransportSolution solve() {
    const std::size_t block =
        std::max<std::size_t>(16, static_cast<std::size_t>(std::sqrt(double(real_arcs_))));
    const std::size_t max_pivots = 64 * (node_count_ * node_count_) + 100000;
    std::size_t next = 0;
    std::size_t pivots = 0;
    while (true) {
      const std::size_t entering = find_entering(next, block);
      if (entering == kNone) break;
      pivot(entering);
      if (++pivots > max_pivots) throw Error("network simplex exceeded its pivot budget");
    }
    TransportSolution out;
    out.pivots = pivots;
    for (std::size_t a = 0; a < real_arcs_; ++a) {
      if (flow_[a] > 0.0) {
        out.flows.push_back({a / m_, a % m_, flow_[a]});
        out.cost += flow_[a] * cost_[a];
      }
    }
    return out;
  }

 private:
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  std::size_t source(std::size_t arc) const {
    if (arc < real_arcs_) return arc / m_;
    const std::size_t v = arc - real_arcs_;
    return v < n_ ? v : root_;
  }
  std::size_t target(std::size_t arc) const {
    if (arc < real_arcs_) return n_ + arc % m_;
    const std::size_t v = arc - real_arcs_;
    return v < n_ ? root_ : v;
  }
  double arc_cost(std::size_t arc) const {
    return arc < real_arcs_ ? cost_[arc] : artificial_cost_;
  }
  std::size_t other_end(std::size_t arc, std::size_t v) const {
    const std::size_t s = source(arc);
    return s == v ? target(arc) : s;
  }

  void rebuild_tree() {
    std::vector<std::size_t> stack{root_};
    parent_[root_] = kNone;
    pred_[root_] = kNone;
    depth_[root_] = 0;
    pi_[root_] = 0.0;
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      for (std::size_t arc : tree_adj_[v]) {
        if (arc == pred_[v]) continue;
        const std::size_t w = other_end(arc, v);
        parent_[w] = v;
        pred_[w] = arc;
        depth_[w] = depth_[v] + 1;
        pred_up_[w] = source(arc) == w;
        pi_[w] = pred_up_[w] ? pi_[v] - arc_cost(arc) : pi_[v] + arc_cost(arc);
        stack.push_back(w);
      }
    }
  }

  // Block pricing: scan blocks of arcs cyclically and return the most
  // negative reduced cost arc of the first block that has one.
  std::size_t find_entering(std::size_t& next, std::size_t block) const {
    std::size_t best = kNone;
    double best_rc = -eps_;
    std::size_t scanned = 0;
    std::size_t in_block = 0;
    std::size_t a = next;
    while (scanned < real_arcs_) {
      const double rc = cost_[a] + pi_[a / m_] - pi_[n_ + a % m_];
      if (rc < best_rc) {
        best_rc = rc;
        best = a;
      }
      ++scanned;
      ++in_block;
      if (++a == real_arcs_) a = 0;
      if (in_block == block) {
        if (best != kNone) break;
        in_block = 0;
      }
    }
    next = a;
    return best;
  }

  void pivot(std::size_t entering) {
    const std::size_t first = source(entering);
    const std::size_t second = target(entering);
    std::size_t u = first, v = second;
    while (u != v) {
      if (depth_[u] >= depth_[v]) {
        u = parent_[u];
      } else {
        v = parent_[v];
      }
    }
    const std::size_t join = u;

    // Leaving arc: last blocking arc met when walking the cycle from the
    // join along the flow direction. This keeps the tree strongly feasible.
    constexpr double inf = std::numeric_limits<double>::infinity();
    double delta = inf;
    std::size_t leaving_node = kNone;
    for (std::size_t w = first; w != join; w = parent_[w]) {
      const double d = pred_up_[w] ? flow_[pred_[w]] : inf;
      if (d < delta) {
        delta = d;
        leaving_node = w;
      }
    }
    for (std::size_t w = second; w != join; w = parent_[w]) {
      const double d = pred_up_[w] ? inf : flow_[pred_[w]];
      if (d <= delta) {
        delta = d;
        leaving_node = w;
      }
    }
    if (leaving_node == kNone) throw Error("network simplex: unbounded cycle");

    if (delta > 0.0) {
      flow_[entering] += delta;
      for (std::size_t w = first; w != join; w = parent_[w]) {
        flow_[pred_[w]] += pred_up_[w] ? -delta : delta;
      }
      for (std::size_t w = second; w != join; w = parent_[w]) {
        flow_[pred_[w]] += pred_up_[w] ? delta : -delta;
      }
    }
    const std::size_t leaving = pred_[leaving_node];
    flow_[leaving] = 0.0;

    auto drop = [&](std::size_t node) {
      auto& adj = tree_adj_[node];
      adj.erase(std::find(adj.begin(), adj.end(), leaving));
    };
    drop(source(leaving));
    drop(target(leaving));
    tree_adj_[first].push_back(entering);
    tree_adj_[second].push_back(entering);
    rebuild_tree();
  }

  std::size_t n_, m_, real_arcs_, node_count_, root_;
  std::span<const double> cost_;
  std::vector<double> flow_;
  std::vector<std::size_t> parent_, pred_;
  std::vector<bool> pred_up_;
  std::vector<std::size_t> depth_;
  std::vector<double> pi_;
  std::vector<std::vector<std::size_t>> tree_adj_;
  double artificial_cost_ = 0.0;
  double eps_ = 0.0;
};

}  // namespace

TransportSolution solve_transportation(std::span<const double> supply,
                                       std::span<const double> demand,
                                       std::span<const double> cost) {
  if (supply.empty() || demand.empty()) throw ValidationError("empty transportation problem");
  if (cost.size() != supply.size() * demand.size()) {
    throw DimensionError("cost matrix does not match supply x demand");
  }
  for (double s : supply) {
    if (!(s > 0.0)) throw ValidationError("supplies must be strictly positive");
  }
  for (double d : demand) {
    if (!(d > 0.0)) throw ValidationError("demands must be strictly positive");
  }
  NetworkSimplex simplex(supply, demand, cost);
  return simplex.solve();
}

}  // namespace stackmf::measures::transport
