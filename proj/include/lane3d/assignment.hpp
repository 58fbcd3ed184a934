#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "lane3d/error.hpp"

namespace lane3d {

/// Minimum-cost perfect matching on a square cost matrix by successive
/// shortest augmenting paths with vertex potentials (Hungarian method).
/// Returns row_to_col. Costs must be finite. O(n^3).
inline std::vector<int> solve_min_cost_assignment(const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size();
  for (const auto& row : cost) detail::require(row.size() == n, "solve_min_cost_assignment: matrix must be square");
  if (n == 0) return {};

  constexpr double inf = std::numeric_limits<double>::infinity();
  // 1-based potentials; column 0 is the virtual source of each augmentation.
  std::vector<double> row_pot(n + 1, 0.0), col_pot(n + 1, 0.0);
  std::vector<std::size_t> col_owner(n + 1, 0), prev_col(n + 1, 0);

  for (std::size_t i = 1; i <= n; ++i) {
    col_owner[0] = i;
    std::size_t j0 = 0;
    std::vector<double> dist(n + 1, inf);
    std::vector<bool> done(n + 1, false);
    do {
      done[j0] = true;
      const std::size_t i0 = col_owner[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (done[j]) continue;
        const double reduced = cost[i0 - 1][j - 1] - row_pot[i0] - col_pot[j];
        if (reduced < dist[j]) {
          dist[j] = reduced;
          prev_col[j] = j0;
        }
        // Strict comparison keeps the lowest column index on ties.
        if (dist[j] < delta) {
          delta = dist[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (done[j]) {
          row_pot[col_owner[j]] += delta;
          col_pot[j] -= delta;
        } else {
          dist[j] -= delta;
        }
      }
      j0 = j1;
    } while (col_owner[j0] != 0);
    do {
      const std::size_t j1 = prev_col[j0];
      col_owner[j0] = col_owner[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> row_to_col(n, -1);
  for (std::size_t j = 1; j <= n; ++j) row_to_col[col_owner[j] - 1] = static_cast<int>(j - 1);
  return row_to_col;
}

}  // namespace lane3d
