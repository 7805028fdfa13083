#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "brb/core/error.hpp"

namespace brb {

// Minimum-cost perfect assignment on a square cost matrix (row-major, n x n).
// Returns col_of_row. Shortest augmenting path formulation with potentials,
// O(n^3).
inline std::vector<std::size_t> hungarian_min_cost(const std::vector<double>& cost, std::size_t n) {
    if (cost.size() != n * n) throw ShapeError("hungarian: cost matrix is not n x n");
    if (n == 0) return {};
    const double inf = std::numeric_limits<double>::infinity();
    // 1-based internals; row 0 / col 0 are sentinels.
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> row_of_col(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        row_of_col[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = row_of_col[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (row_of_col[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<std::size_t> col_of_row(n);
    for (std::size_t j = 1; j <= n; ++j) col_of_row[row_of_col[j] - 1] = j - 1;
    return col_of_row;
}

// Maximum-profit assignment; profits are converted to costs as max - p.
inline std::vector<std::size_t> hungarian_max_profit(const std::vector<double>& profit, std::size_t n) {
    double hi = 0.0;
    for (double p : profit) hi = std::max(hi, p);
    std::vector<double> cost(profit.size());
    for (std::size_t i = 0; i < profit.size(); ++i) cost[i] = hi - profit[i];
    return hungarian_min_cost(cost, n);
}

}  // namespace brb
