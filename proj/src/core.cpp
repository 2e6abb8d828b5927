#include "cfpk/core.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace cfpk {

Grid::Grid(double x_min_, double x_max_, int n_) : x_min(x_min_), x_max(x_max_), n(n_) {
    if (!(x_min < x_max)) throw std::invalid_argument(fmt::format("grid: x_min {} must be below x_max {}", x_min, x_max));
    if (n < 8) throw std::invalid_argument(fmt::format("grid: n = {} must be at least 8", n));
}

std::vector<double> Grid::centers() const {
    std::vector<double> xs(n);
    for (int i = 0; i < n; ++i) xs[i] = x(i);
    return xs;
}

bool operator==(const Grid& a, const Grid& b) {
    return a.x_min == b.x_min && a.x_max == b.x_max && a.n == b.n;
}

Density::Density(Grid g, std::vector<double> v) : grid(g), values(std::move(v)) {
    if (static_cast<int>(values.size()) != grid.n)
        throw std::invalid_argument(fmt::format("density: {} values for a grid of {} cells", values.size(), grid.n));
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!(values[i] >= 0.0) || !std::isfinite(values[i]))
            throw std::invalid_argument(fmt::format("density: value {} at cell {} is not a nonnegative number", values[i], i));
    }
}

double Density::mass() const { return integrate(values, grid); }

double integrate(const std::vector<double>& f, const Grid& grid) {
    if (static_cast<int>(f.size()) != grid.n)
        throw std::invalid_argument(fmt::format("integrate: {} values for a grid of {} cells", f.size(), grid.n));
    double s = 0.0;
    for (double v : f) s += v;
    return s * grid.dx();
}

Moments moments(const Density& rho) {
    const Grid& g = rho.grid;
    double m0 = 0.0, m1 = 0.0;
    for (int i = 0; i < g.n; ++i) {
        m0 += rho.values[i];
        m1 += g.x(i) * rho.values[i];
    }
    m0 *= g.dx();
    m1 *= g.dx();
    const double mean = m1 / m0;
    double c2 = 0.0;
    for (int i = 0; i < g.n; ++i) {
        const double d = g.x(i) - mean;
        c2 += d * d * rho.values[i];
    }
    c2 *= g.dx() / m0;
    Moments m;
    m.M1 = mean;
    m.Var = c2;
    m.M2 = c2 + mean * mean;
    return m;
}

Density normalize(const Density& rho) {
    const double m = rho.mass();
    if (!(m > 0.0) || !std::isfinite(m)) throw std::domain_error(fmt::format("normalize: degenerate mass {}", m));
    std::vector<double> v(rho.values);
    for (double& x : v) x /= m;
    return Density(rho.grid, std::move(v));
}

Density sample_density(const Grid& grid, const std::function<double(double)>& f) {
    std::vector<double> v(grid.n);
    for (int i = 0; i < grid.n; ++i) v[i] = f(grid.x(i));
    return normalize(Density(grid, std::move(v)));
}

Density gaussian_density(const Grid& grid, double mean, double var) {
    if (!(var > 0.0)) throw std::invalid_argument("gaussian_density: variance must be positive");
    return sample_density(grid, [&](double x) { return std::exp(-(x - mean) * (x - mean) / (2.0 * var)); });
}

Density shift_density(const Density& rho, double a) {
    const Grid& g = rho.grid;
    const double dx = g.dx();
    // Shifted cell i covers [edge(i)+a, edge(i+1)+a]; split its mass between the two cells it overlaps.
    const double q = a / dx;
    const double whole = std::floor(q);
    const double frac = q - whole;
    const long k = static_cast<long>(whole);
    std::vector<double> out(g.n, 0.0);
    auto deposit = [&](long j, double m) {
        j = std::clamp<long>(j, 0, g.n - 1);
        out[j] += m;
    };
    for (int i = 0; i < g.n; ++i) {
        const double m = rho.values[i];
        if (m == 0.0) continue;
        deposit(i + k, m * (1.0 - frac));
        if (frac > 0.0) deposit(i + k + 1, m * frac);
    }
    return Density(g, std::move(out));
}

Density project_mean(const Density& rho, double target, double tol) {
    Density cur = normalize(rho);
    double m = moments(cur).M1;
    if (std::abs(m - target) <= tol) return cur;
    double a0 = 0.0, f0 = m - target;
    double a1 = target - m;
    Density trial = shift_density(cur, a1);
    double f1 = moments(trial).M1 - target;
    for (int it = 0; it < 60 && std::abs(f1) > tol; ++it) {
        if (f1 == f0) break;
        const double a2 = a1 - f1 * (a1 - a0) / (f1 - f0);
        a0 = a1;
        f0 = f1;
        a1 = a2;
        trial = shift_density(cur, a1);
        f1 = moments(trial).M1 - target;
    }
    if (std::abs(f1) > 1e3 * tol)
        throw std::runtime_error(fmt::format("project_mean: could not reach mean {} (residual {})", target, f1));
    return trial;
}

Potential quadratic_potential(double k) {
    if (!(k > 0.0)) throw std::invalid_argument("quadratic potential: k must be positive");
    Potential p;
    p.name = fmt::format("quadratic:{}", k);
    p.h = [k](double x) { return 0.5 * k * x * x; };
    p.h1 = [k](double x) { return k * x; };
    p.h2 = [k](double) { return k; };
    p.h3 = [](double) { return 0.0; };
    p.convexity_lower_bound = k;
    p.c_minus = k;
    p.c_plus = k;
    return p;
}

Potential doublewell_potential() {
    Potential p;
    p.name = "doublewell";
    p.h = [](double x) {
        const double r = std::sqrt(x * x + 1.0);
        return (r - 2.0) * (r - 2.0);
    };
    p.h1 = [](double x) {
        const double r = std::sqrt(x * x + 1.0);
        return 2.0 * (r - 2.0) * x / r;
    };
    p.h2 = [](double x) {
        const double r = std::sqrt(x * x + 1.0);
        return 2.0 - 4.0 / (r * r * r);
    };
    p.h3 = [](double x) {
        const double r2 = x * x + 1.0;
        const double r = std::sqrt(r2);
        return 12.0 * x / (r2 * r2 * r);
    };
    p.c_minus = 2.0;
    p.c_plus = 2.0;
    return p;
}

namespace {

double horner(const std::vector<double>& c, double x) {
    double s = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) s = s * x + *it;
    return s;
}

std::vector<double> derivative(const std::vector<double>& c) {
    if (c.size() <= 1) return {0.0};
    std::vector<double> d(c.size() - 1);
    for (std::size_t j = 1; j < c.size(); ++j) d[j - 1] = c[j] * static_cast<double>(j);
    return d;
}

}  // namespace

Potential polynomial_potential(std::vector<double> coeffs, std::optional<std::pair<double, double>> growth) {
    while (coeffs.size() > 1 && coeffs.back() == 0.0) coeffs.pop_back();
    const std::size_t degree = coeffs.size() - 1;
    if (degree < 2 || degree % 2 != 0 || coeffs.back() <= 0.0)
        throw std::invalid_argument("polynomial potential: need even degree >= 2 with positive leading coefficient");
    Potential p;
    p.name = "polynomial";
    const auto c1 = derivative(coeffs);
    const auto c2 = derivative(c1);
    const auto c3 = derivative(c2);
    p.h = [coeffs](double x) { return horner(coeffs, x); };
    p.h1 = [c1](double x) { return horner(c1, x); };
    p.h2 = [c2](double x) { return horner(c2, x); };
    p.h3 = [c3](double x) { return horner(c3, x); };
    if (growth) {
        p.c_minus = growth->first;
        p.c_plus = growth->second;
    } else if (degree == 2) {
        p.c_minus = p.c_plus = 2.0 * coeffs[2];
    } else {
        throw std::invalid_argument("polynomial potential: degree above 2 requires explicit growth constants");
    }
    if (!(p.c_minus > 0.0) || !(p.c_plus > 0.0))
        throw std::invalid_argument("polynomial potential: growth constants must be positive");
    if (degree == 2) p.convexity_lower_bound = 2.0 * coeffs[2];
    return p;
}

void validate_potential(const Potential& pot, const Grid& grid) {
    const double dx = grid.dx();
    for (int i = 0; i < grid.n; ++i) {
        const double x = grid.x(i);
        const double hv = pot.h(x);
        if (hv < -1e-12) throw std::invalid_argument(fmt::format("potential {}: H({}) = {} is negative", pot.name, x, hv));
        if (pot.convexity_lower_bound && pot.h2(x) < *pot.convexity_lower_bound - 1e-12)
            throw std::invalid_argument(fmt::format("potential {}: H''({}) below the convexity bound", pot.name, x));
    }
    // Centered difference of H against H' on a few sample points, relative to the local H''' scale.
    for (int i = 1; i + 1 < grid.n; i += std::max(1, grid.n / 16)) {
        const double x = grid.x(i);
        const double fd = (pot.h(x + dx) - pot.h(x - dx)) / (2.0 * dx);
        const double allowed = 1e-8 * (1.0 + std::abs(pot.h1(x))) + dx * dx * (1.0 + std::abs(pot.h3(x)));
        if (std::abs(fd - pot.h1(x)) > allowed)
            throw std::invalid_argument(fmt::format("potential {}: H' inconsistent with H at x = {}", pot.name, x));
    }
}

ConstraintPath constant_path(double l) {
    ConstraintPath c;
    c.name = "constant";
    c.ell = [l](double) { return l; };
    c.ell_dot = [](double) { return 0.0; };
    c.ell_ddot = [](double) { return 0.0; };
    c.ell_star = l;
    return c;
}

ConstraintPath exp_decay_path(double l_star, double A, double kappa) {
    if (!(kappa > 0.0)) throw std::invalid_argument("exp_decay path: kappa must be positive");
    ConstraintPath c;
    c.name = "exp_decay";
    c.ell = [=](double t) { return l_star + A * std::exp(-kappa * t); };
    c.ell_dot = [=](double t) { return -A * kappa * std::exp(-kappa * t); };
    c.ell_ddot = [=](double t) { return A * kappa * kappa * std::exp(-kappa * t); };
    c.ell_star = l_star;
    c.kappa = kappa;
    c.L0 = std::abs(A) * kappa;
    return c;
}

ConstraintPath tanh_ramp_path(double l0, double l1, double t0, double w) {
    if (!(w > 0.0)) throw std::invalid_argument("tanh_ramp path: width must be positive");
    ConstraintPath c;
    c.name = "tanh_ramp";
    const double d = l1 - l0;
    c.ell = [=](double t) { return l0 + 0.5 * d * (1.0 + std::tanh((t - t0) / w)); };
    c.ell_dot = [=](double t) {
        const double ch = std::cosh((t - t0) / w);
        return 0.5 * d / (w * ch * ch);
    };
    c.ell_ddot = [=](double t) {
        const double u = (t - t0) / w;
        const double ch = std::cosh(u);
        return -d * std::tanh(u) / (w * w * ch * ch);
    };
    c.ell_star = l1;
    // sech^2(u) <= 4 exp(-2|u|) gives |ell_dot| <= (2|d|/w) e^{2 t0/w} e^{-2t/w}.
    c.kappa = 2.0 / w;
    c.L0 = 2.0 * std::abs(d) / w * std::exp(2.0 * t0 / w);
    return c;
}

ModelParams::ModelParams(double tau_, double nu_) : tau(tau_), nu(nu_) {
    if (!(tau > 0.0)) throw std::invalid_argument("model: tau must be positive");
    if (!(nu > 0.0)) throw std::invalid_argument("model: nu must be positive");
}

}  // namespace cfpk
