#include "cfpk/tridiag.hpp"

#include <cmath>
#include <stdexcept>

namespace cfpk {

bool solve_tridiagonal(const std::vector<double>& lower, const std::vector<double>& diag, const std::vector<double>& upper,
                       std::vector<double>& rhs, bool require_positive) {
    const std::size_t n = diag.size();
    if (lower.size() != n || upper.size() != n || rhs.size() != n)
        throw std::invalid_argument("solve_tridiagonal: size mismatch");
    if (n == 0) return true;
    std::vector<double> c(n);
    double piv = diag[0];
    if (piv == 0.0 || !std::isfinite(piv) || (require_positive && piv <= 0.0)) return false;
    c[0] = upper[0] / piv;
    rhs[0] /= piv;
    for (std::size_t i = 1; i < n; ++i) {
        piv = diag[i] - lower[i] * c[i - 1];
        if (piv == 0.0 || !std::isfinite(piv) || (require_positive && piv <= 0.0)) return false;
        c[i] = upper[i] / piv;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / piv;
    }
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= c[i] * rhs[i + 1];
    return true;
}

}  // namespace cfpk
