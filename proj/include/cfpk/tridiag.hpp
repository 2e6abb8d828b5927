#pragma once

#include <vector>

namespace cfpk {

/// Solves a tridiagonal system in place. lower[i] couples row i to i-1 (lower[0] unused),
/// upper[i] couples row i to i+1 (upper[n-1] unused). Returns false on a vanishing pivot;
/// with require_positive it also fails on a nonpositive pivot (SPD check).
bool solve_tridiagonal(const std::vector<double>& lower, const std::vector<double>& diag, const std::vector<double>& upper,
                       std::vector<double>& rhs, bool require_positive = false);

}  // namespace cfpk
