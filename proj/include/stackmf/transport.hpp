#pragma once

// Exact discrete transport solvers backing measures::w2_*.

#include <cstddef>
#include <span>
#include <vector>

namespace stackmf::measures::transport {

struct FlowEntry {
  std::size_t row;
  std::size_t col;
  double mass;
};

struct TransportSolution {
  double cost = 0.0;
  std::vector<FlowEntry> flows;
  std::size_t pivots = 0;
};

/// Balanced transportation problem min <C, P> subject to P 1 = supply,
/// P^T 1 = demand, P >= 0, solved by a primal network simplex with a
/// strongly feasible spanning tree (no cycling) and block pricing.
/// `cost` is row-major supply.size() x demand.size(). All supplies and
/// demands must be strictly positive.
TransportSolution solve_transportation(std::span<const double> supply,
                                       std::span<const double> demand,
                                       std::span<const double> cost);

struct AssignmentSolution {
  double cost = 0.0;                ///< sum of matched squared distances
  std::vector<std::size_t> col_of_row;
  std::vector<double> row_dual;     ///< u_i
  std::vector<double> col_dual;     ///< v_j, with c_ij - u_i - v_j >= 0
  std::size_t verification_rounds = 0;
};

/// Minimum-cost perfect matching between two equal-size point sets under
/// squared Euclidean cost. Shortest augmenting paths run on a sparse
/// nearest-neighbour candidate graph; the resulting duals are then checked
/// against every pair, and violated pairs are added until the dual is
/// feasible for the full problem, which certifies global optimality.
AssignmentSolution solve_assignment_sqeuclidean(std::size_t dim, std::span<const double> a,
                                                std::span<const double> b);

}  // namespace stackmf::measures::transport
