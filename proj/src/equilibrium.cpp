#include "cfpk/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

namespace cfpk {

GibbsState gibbs(double sigma, double nu, const Potential& pot, const Grid& grid) {
    if (!(nu > 0.0)) throw std::invalid_argument("gibbs: nu must be positive");
    const double nu2 = nu * nu;
    const int n = grid.n;
    const double dx = grid.dx();
    std::vector<double> e(n);
    double emax = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
        const double x = grid.x(i);
        e[i] = -(pot.h(x) - sigma * x) / nu2;
        emax = std::max(emax, e[i]);
    }
    if (!std::isfinite(emax)) throw std::domain_error("gibbs: exponent is not finite on the grid");
    double s = 0.0;
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) {
        v[i] = std::exp(e[i] - emax);
        s += v[i];
    }
    if (!(s > 0.0)) throw std::domain_error("gibbs: density vanishes on the grid, the grid is too small");
    GibbsState st;
    st.sigma = sigma;
    st.nu = nu;
    st.logZ = emax + std::log(s * dx);
    st.Z = std::exp(st.logZ);
    st.log_density.resize(n);
    for (int i = 0; i < n; ++i) {
        v[i] /= s * dx;
        st.log_density[i] = e[i] - st.logZ;
    }
    st.density = Density(grid, std::move(v));
    const Moments m = moments(st.density);
    st.mean = m.M1;
    st.variance = m.Var;
    return st;
}

LambdaResult lambda_of_ell(double ell, double nu, const Potential& pot, const Grid& grid, double tol) {
    if (!(ell > grid.x(0) && ell < grid.x(grid.n - 1)))
        throw std::out_of_range(fmt::format("lambda_of_ell: ell = {} is outside the reachable range ({}, {})", ell,
                                            grid.x(0), grid.x(grid.n - 1)));
    const double nu2 = nu * nu;
    LambdaResult r;
    double lam = ell * pot.c_min();
    GibbsState st = gibbs(lam, nu, pot, grid);
    double g = st.mean - ell;
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    auto update_bracket = [&](double l, double gv) {
        if (gv < 0.0)
            lo = std::max(lo, l);
        else
            hi = std::min(hi, l);
    };
    update_bracket(lam, g);
    constexpr int kMaxIter = 100;
    int it = 0;
    while (std::abs(g) >= tol) {
        if (++it > kMaxIter)
            throw std::runtime_error(fmt::format("lambda_of_ell: no convergence for ell = {} (bracket [{}, {}], residual {})",
                                                 ell, lo, hi, g));
        const double slope = st.variance / nu2;
        double cand = lam - g / slope;
        const bool bracketed = std::isfinite(lo) && std::isfinite(hi);
        if (!std::isfinite(cand) || (bracketed && !(cand > lo && cand < hi))) {
            if (bracketed) {
                cand = 0.5 * (lo + hi);
                r.used_bisection = true;
            } else {
                // Expand geometrically towards the missing side.
                const double span = std::max(1.0, std::abs(lam));
                cand = g < 0.0 ? lam + span : lam - span;
            }
        } else if (!bracketed) {
            const double span = 4.0 * std::max(1.0, std::abs(lam));
            cand = std::clamp(cand, lam - span, lam + span);
        }
        lam = cand;
        st = gibbs(lam, nu, pot, grid);
        const double gnew = st.mean - ell;
        update_bracket(lam, gnew);
        g = gnew;
        if (bracketed && hi - lo < 1e-15 * (1.0 + std::abs(lam))) break;
    }
    r.lambda = lam;
    r.state = std::move(st);
    r.iterations = it;
    return r;
}

std::string to_string(LsiMethod m) { return m == LsiMethod::convex ? "convex" : "holley_stroock"; }

std::vector<double> lower_convex_envelope(const std::vector<double>& x, const std::vector<double>& f) {
    const std::size_t n = x.size();
    if (f.size() != n) throw std::invalid_argument("lower_convex_envelope: size mismatch");
    std::vector<std::size_t> hull;
    hull.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        while (hull.size() >= 2) {
            const std::size_t a = hull[hull.size() - 2], b = hull.back();
            const double cross = (x[b] - x[a]) * (f[i] - f[a]) - (f[b] - f[a]) * (x[i] - x[a]);
            if (cross <= 0.0)
                hull.pop_back();
            else
                break;
        }
        hull.push_back(i);
    }
    std::vector<double> env(n);
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
        while (k + 1 < hull.size() && hull[k + 1] < i) ++k;
        const std::size_t a = hull[k];
        if (a == i || k + 1 >= hull.size()) {
            env[i] = f[i];
            continue;
        }
        const std::size_t b = hull[k + 1];
        const double t = (x[i] - x[a]) / (x[b] - x[a]);
        env[i] = f[a] + t * (f[b] - f[a]);
    }
    return env;
}

LsiResult lsi_constant(double sigma, double nu, const Potential& pot, const Grid& grid) {
    LsiResult r;
    const auto xs = grid.centers();
    std::vector<double> f(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) f[i] = pot.h(xs[i]) - sigma * xs[i];
    const auto env = lower_convex_envelope(xs, f);
    double bmax = -std::numeric_limits<double>::infinity(), bmin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double b = f[i] - env[i];
        bmax = std::max(bmax, b);
        bmin = std::min(bmin, b);
    }
    r.oscillation = bmax - bmin;
    const double dx2 = grid.dx() * grid.dx();
    double curv = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i + 1 < xs.size(); ++i) curv = std::min(curv, (env[i + 1] - 2.0 * env[i] + env[i - 1]) / dx2);
    r.envelope_min_curvature = curv;
    if (pot.convexity_lower_bound && *pot.convexity_lower_bound > 0.0) {
        r.method = LsiMethod::convex;
        r.C_lsi = 1.0 / *pot.convexity_lower_bound;
        return r;
    }
    const double cmin = pot.c_min();
    if (!(cmin > 0.0)) throw std::domain_error("lsi_constant: growth constants must be positive, the method is inapplicable");
    const double nu2 = nu * nu;
    r.method = LsiMethod::holley_stroock;
    r.C_lsi = 2.0 * std::exp(2.0 * r.oscillation / nu2) / (nu2 * cmin);
    return r;
}

namespace {

double bisect_root(const std::function<double(double)>& f, double a, double b) {
    double fa = f(a);
    for (int it = 0; it < 200; ++it) {
        const double m = 0.5 * (a + b);
        if (m <= a || m >= b) break;
        const double fm = f(m);
        if (fm == 0.0) return m;
        if ((fm < 0.0) == (fa < 0.0)) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    return 0.5 * (a + b);
}

/// Breakpoints splitting [x_min, x_max] into pieces on which H' is monotone.
std::vector<double> monotone_breakpoints(const Potential& pot, const Grid& grid) {
    std::vector<double> bp{grid.x_min};
    double prev = pot.h2(grid.edge(0));
    for (int i = 1; i <= grid.n; ++i) {
        const double cur = pot.h2(grid.edge(i));
        if ((prev < 0.0 && cur > 0.0) || (prev > 0.0 && cur < 0.0))
            bp.push_back(bisect_root(pot.h2, grid.edge(i - 1), grid.edge(i)));
        if (cur != 0.0) prev = cur;
    }
    bp.push_back(grid.x_max);
    return bp;
}

struct CriticalPoint {
    double x;
    double value;
    bool is_min;
};

std::vector<CriticalPoint> critical_points(double sigma, const Potential& pot, const Grid& grid) {
    const auto bp = monotone_breakpoints(pot, grid);
    auto g = [&](double x) { return pot.h1(x) - sigma; };
    auto Hs = [&](double x) { return pot.h(x) - sigma * x; };
    std::vector<CriticalPoint> cps;
    if (g(grid.x_min) > 0.0) cps.push_back({grid.x_min, Hs(grid.x_min), true});
    for (std::size_t k = 0; k + 1 < bp.size(); ++k) {
        const double a = bp[k], b = bp[k + 1];
        const double ga = g(a), gb = g(b);
        if ((ga < 0.0 && gb >= 0.0) || (ga > 0.0 && gb <= 0.0)) {
            const double x = gb == 0.0 ? b : bisect_root(g, a, b);
            cps.push_back({x, Hs(x), ga < 0.0});
        }
    }
    if (g(grid.x_max) < 0.0) cps.push_back({grid.x_max, Hs(grid.x_max), true});
    return cps;
}

}  // namespace

int count_tilt_solutions(double sigma, const Potential& pot, const Grid& grid) {
    const auto bp = monotone_breakpoints(pot, grid);
    int count = 0;
    for (std::size_t k = 0; k + 1 < bp.size(); ++k) {
        const double ga = pot.h1(bp[k]) - sigma, gb = pot.h1(bp[k + 1]) - sigma;
        if (ga * gb < 0.0 || gb == 0.0 || (k == 0 && ga == 0.0)) ++count;
    }
    return count;
}

double energy_barrier(double sigma, const Potential& pot, const Grid& grid) {
    const auto cps = critical_points(sigma, pot, grid);
    std::size_t gmin = cps.size();
    for (std::size_t i = 0; i < cps.size(); ++i)
        if (cps[i].is_min && (gmin == cps.size() || cps[i].value < cps[gmin].value)) gmin = i;
    if (gmin == cps.size()) return 0.0;
    double best = 0.0;
    for (std::size_t i = 0; i < cps.size(); ++i) {
        if (!cps[i].is_min || i == gmin) continue;
        const std::size_t a = std::min(i, gmin), b = std::max(i, gmin);
        double top = -std::numeric_limits<double>::infinity();
        for (std::size_t j = a + 1; j < b; ++j)
            if (!cps[j].is_min) top = std::max(top, cps[j].value);
        if (std::isfinite(top)) best = std::max(best, top - cps[i].value);
    }
    return best;
}

LandscapeReport landscape(double nu, const Potential& pot, const Grid& grid, std::pair<double, double> sigma_range,
                          int n_sigma) {
    if (n_sigma < 16) throw std::invalid_argument("landscape: n_sigma must be at least 16");
    if (!(sigma_range.first < sigma_range.second)) throw std::invalid_argument("landscape: empty sigma range");
    LandscapeReport rep;
    for (int i = 0; i < grid.n; ++i)
        if (pot.h2(grid.x(i)) <= 0.0) rep.spinodal_measure += grid.dx();

    const double s0 = sigma_range.first, s1 = sigma_range.second;
    std::vector<bool> multi(n_sigma);
    rep.sigma_samples.resize(n_sigma);
    rep.barriers.resize(n_sigma);
    rep.variances.resize(n_sigma);
    rep.c_var = std::numeric_limits<double>::infinity();
    rep.C_var = 0.0;
    for (int k = 0; k < n_sigma; ++k) {
        const double s = s0 + (s1 - s0) * k / (n_sigma - 1);
        rep.sigma_samples[k] = s;
        multi[k] = count_tilt_solutions(s, pot, grid) > 1;
        rep.barriers[k] = multi[k] ? energy_barrier(s, pot, grid) : 0.0;
        const GibbsState st = gibbs(s, nu, pot, grid);
        rep.variances[k] = st.variance;
        rep.c_var = std::min(rep.c_var, st.variance);
        rep.C_var = std::max(rep.C_var, st.variance);
        rep.lsi_samples.push_back({s, lsi_constant(s, nu, pot, grid)});
    }

    auto is_multi = [&](double s) { return count_tilt_solutions(s, pot, grid) > 1; };
    auto refine = [&](double inside, double outside) {
        while (std::abs(inside - outside) > 1e-10) {
            const double m = 0.5 * (inside + outside);
            (is_multi(m) ? inside : outside) = m;
        }
        return inside;
    };
    for (int k = 0; k < n_sigma;) {
        if (!multi[k]) {
            ++k;
            continue;
        }
        int j = k;
        while (j + 1 < n_sigma && multi[j + 1]) ++j;
        const double lo = k > 0 ? refine(rep.sigma_samples[k], rep.sigma_samples[k - 1]) : rep.sigma_samples[k];
        const double hi = j + 1 < n_sigma ? refine(rep.sigma_samples[j], rep.sigma_samples[j + 1]) : rep.sigma_samples[j];
        rep.sigma_intervals.emplace_back(lo, hi);
        k = j + 1;
    }

    // Supremum of the barrier: best sample, then a ternary search between its neighbours.
    int best = -1;
    for (int k = 0; k < n_sigma; ++k)
        if (multi[k] && (best < 0 || rep.barriers[k] > rep.barriers[best])) best = k;
    if (best >= 0) {
        double a = rep.sigma_samples[std::max(best - 1, 0)];
        double b = rep.sigma_samples[std::min(best + 1, n_sigma - 1)];
        auto f = [&](double s) { return is_multi(s) ? energy_barrier(s, pot, grid) : 0.0; };
        for (int it = 0; it < 100 && b - a > 1e-12; ++it) {
            const double m1 = a + (b - a) / 3.0, m2 = b - (b - a) / 3.0;
            if (f(m1) < f(m2))
                a = m1;
            else
                b = m2;
        }
        rep.delta_h_star = std::max(rep.barriers[best], f(0.5 * (a + b)));
    }
    return rep;
}

}  // namespace cfpk
