#pragma once

#include <vector>

namespace reclink {

/// Maximum-weight one-to-one assignment of min(n1, n2) rows and columns.
/// `weights` is row-major n1 x n2. Returns, per row, the assigned column or -1.
/// Deterministic: equal-weight alternatives resolve toward lower row and
/// column indices.
std::vector<int> solve_assignment(const std::vector<double>& weights, std::size_t n1, std::size_t n2);

/// Total weight of an assignment returned by solve_assignment.
double assignment_weight(const std::vector<double>& weights, std::size_t n2, const std::vector<int>& rows);

}  // namespace reclink
