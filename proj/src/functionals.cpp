#include "cfpk/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

namespace cfpk {

namespace {

void require_same_grid(const Density& a, const Density& b, const char* what) {
    if (!(a.grid == b.grid)) throw std::invalid_argument(fmt::format("{}: densities live on different grids", what));
}

}  // namespace

double log_partition(double sigma, double nu, const Potential& pot, const Grid& grid) {
    const double nu2 = nu * nu;
    std::vector<double> e(grid.n);
    double emax = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < grid.n; ++i) {
        const double x = grid.x(i);
        e[i] = -(pot.h(x) - sigma * x) / nu2;
        emax = std::max(emax, e[i]);
    }
    double s = 0.0;
    for (double v : e) s += std::exp(v - emax);
    return emax + std::log(s * grid.dx());
}

double entropy(const Density& rho) {
    double s = 0.0;
    for (double v : rho.values)
        if (v > 0.0) s += v * std::log(std::max(v, kDensityFloor));
    return s * rho.grid.dx();
}

double potential_energy(const Density& rho, const Potential& pot) {
    double s = 0.0;
    for (int i = 0; i < rho.grid.n; ++i) s += pot.h(rho.grid.x(i)) * rho.values[i];
    return s * rho.grid.dx();
}

EnergyBreakdown free_energy(const Density& rho, const Potential& pot, const ModelParams& params) {
    const double nu2 = params.nu * params.nu;
    EnergyBreakdown b;
    b.S = entropy(rho);
    b.E = potential_energy(rho, pot);
    b.logZ0 = log_partition(0.0, params.nu, pot, rho.grid);
    b.F = nu2 * b.S + b.E + nu2 * b.logZ0;
    return b;
}

double relative_entropy(const Density& rho, const Density& gamma) {
    require_same_grid(rho, gamma, "relative_entropy");
    std::vector<double> lg(gamma.size());
    for (std::size_t i = 0; i < gamma.size(); ++i) {
        if (gamma.values[i] <= 0.0) {
            if (rho.values[i] > 0.0)
                throw std::domain_error(fmt::format("relative_entropy: reference vanishes at cell {} where rho = {}", i,
                                                    rho.values[i]));
            lg[i] = 0.0;
        } else {
            lg[i] = std::log(std::max(gamma.values[i], kDensityFloor));
        }
    }
    return relative_entropy_log(rho, lg);
}

double relative_entropy_log(const Density& rho, const std::vector<double>& log_gamma) {
    if (log_gamma.size() != rho.size()) throw std::invalid_argument("relative_entropy: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < rho.size(); ++i) {
        const double v = rho.values[i];
        if (v > 0.0) s += v * (std::log(std::max(v, kDensityFloor)) - log_gamma[i]);
    }
    return s * rho.grid.dx();
}

double dissipation(const Density& rho, double sigma, const Potential& pot, const ModelParams& params) {
    const Grid& g = rho.grid;
    const int n = g.n;
    const double dx = g.dx();
    const double nu2 = params.nu * params.nu;
    constexpr double kNegligible = 1e-30;
    std::vector<double> lr(n);
    for (int i = 0; i < n; ++i) lr[i] = std::log(std::max(rho.values[i], kDensityFloor));
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
        const double v = rho.values[i];
        if (v < kNegligible) continue;
        double dl;
        if (i == 0)
            dl = (lr[1] - lr[0]) / dx;
        else if (i == n - 1)
            dl = (lr[n - 1] - lr[n - 2]) / dx;
        else
            dl = (lr[i + 1] - lr[i - 1]) / (2.0 * dx);
        const double u = nu2 * dl + pot.h1(g.x(i)) - sigma;
        s += u * u * v;
    }
    return s * dx;
}

CkpResult ckp_l1_bound(const Density& rho, const Density& gamma) {
    require_same_grid(rho, gamma, "ckp_l1_bound");
    CkpResult r;
    double s = 0.0;
    for (std::size_t i = 0; i < rho.size(); ++i) s += std::abs(rho.values[i] - gamma.values[i]);
    r.l1 = s * rho.grid.dx();
    r.bound = std::sqrt(2.0 * std::max(0.0, relative_entropy(rho, gamma)));
    return r;
}

WeightedCkpResult weighted_ckp(const Density& rho, const Density& gamma, const std::function<double(double)>& w) {
    require_same_grid(rho, gamma, "weighted_ckp");
    const Grid& g = rho.grid;
    WeightedCkpResult r;
    double wl1 = 0.0, cw = 0.0;
    for (int i = 0; i < g.n; ++i) {
        const double wi = w(g.x(i));
        wl1 += std::abs(wi) * std::abs(rho.values[i] - gamma.values[i]);
        if (gamma.values[i] > 0.0) cw += std::exp(wi * wi + std::log(gamma.values[i]));
    }
    r.weighted_l1 = wl1 * g.dx();
    r.Cw = cw * g.dx();
    if (!std::isfinite(r.Cw))
        throw std::overflow_error("weighted_ckp: the weight is too strong, exp(w^2) is not integrable against gamma");
    const double H = std::max(0.0, relative_entropy(rho, gamma));
    r.bound = std::sqrt(2.0 * (1.0 + std::log(std::max(r.Cw, 1.0))) * H);
    return r;
}

std::function<double(double)> growth_weight(const Potential& pot) {
    const double c = 0.5 * pot.c_min();
    return [c](double x) { return c * (1.0 + std::abs(x)); };
}

}  // namespace cfpk
