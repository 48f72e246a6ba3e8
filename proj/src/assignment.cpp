#include "reclink/assignment.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace reclink {

namespace {

// Shortest augmenting path Hungarian method on an n <= m cost matrix
// (1-based potentials). Returns the column of every row.
std::vector<int> hungarian_min(const std::vector<double>& cost, std::size_t n, std::size_t m) {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0), minv(m + 1);
    std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
    std::vector<char> used(m + 1);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= m; ++j) {
                if (used[j]) continue;
                const double cur = cost[(i0 - 1) * m + (j - 1)] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> row(n, -1);
    for (std::size_t j = 1; j <= m; ++j)
        if (p[j] != 0) row[p[j] - 1] = static_cast<int>(j - 1);
    return row;
}

}  // namespace

std::vector<int> solve_assignment(const std::vector<double>& weights, std::size_t n1, std::size_t n2) {
    if (weights.size() != n1 * n2) throw std::invalid_argument("weight matrix size mismatch");
    for (double w : weights)
        if (!std::isfinite(w)) throw std::invalid_argument("assignment weights must be finite");
    if (n1 == 0 || n2 == 0) return std::vector<int>(n1, -1);
    if (n1 <= n2) {
        std::vector<double> cost(weights.size());
        for (std::size_t x = 0; x < cost.size(); ++x) cost[x] = -weights[x];
        return hungarian_min(cost, n1, n2);
    }
    std::vector<double> cost(weights.size());
    for (std::size_t i = 0; i < n1; ++i)
        for (std::size_t j = 0; j < n2; ++j) cost[j * n1 + i] = -weights[i * n2 + j];
    const auto cols = hungarian_min(cost, n2, n1);
    std::vector<int> rows(n1, -1);
    for (std::size_t j = 0; j < n2; ++j) rows[static_cast<std::size_t>(cols[j])] = static_cast<int>(j);
    return rows;
}

double assignment_weight(const std::vector<double>& weights, std::size_t n2, const std::vector<int>& rows) {
    double total = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i)
        if (rows[i] >= 0) total += weights[i * n2 + static_cast<std::size_t>(rows[i])];
    return total;
}

}  // namespace reclink
