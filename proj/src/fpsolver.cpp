#include "cfpk/fpsolver.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "cfpk/equilibrium.hpp"
#include "cfpk/functionals.hpp"
#include "cfpk/transport.hpp"
#include "cfpk/tridiag.hpp"

namespace cfpk {

std::string to_string(FluxScheme s) { return s == FluxScheme::chang_cooper ? "chang_cooper" : "central"; }
std::string to_string(TimeScheme s) { return s == TimeScheme::bdf2 ? "bdf2" : "backward_euler"; }
std::string to_string(MultiplierRule s) { return s == MultiplierRule::discrete ? "discrete" : "quadrature"; }

FluxScheme flux_scheme_from_string(const std::string& s) {
    if (s == "chang_cooper") return FluxScheme::chang_cooper;
    if (s == "central") return FluxScheme::central;
    throw std::invalid_argument(fmt::format("unknown flux scheme '{}' (chang_cooper, central)", s));
}

TimeScheme time_scheme_from_string(const std::string& s) {
    if (s == "bdf2") return TimeScheme::bdf2;
    if (s == "backward_euler") return TimeScheme::backward_euler;
    throw std::invalid_argument(fmt::format("unknown time scheme '{}' (bdf2, backward_euler)", s));
}

MultiplierRule multiplier_rule_from_string(const std::string& s) {
    if (s == "discrete") return MultiplierRule::discrete;
    if (s == "quadrature") return MultiplierRule::quadrature;
    throw std::invalid_argument(fmt::format("unknown multiplier rule '{}' (discrete, quadrature)", s));
}

void SolverConfig::validate(const Grid& grid, const ModelParams& params) const {
    if (!(dt > 0.0)) throw std::invalid_argument(fmt::format("solver: dt = {} must be positive", dt));
    if (scheme == FluxScheme::central) {
        const double cap = grid.dx() * grid.dx() / (2.0 * params.nu * params.nu);
        if (dt > cap)
            throw std::invalid_argument(fmt::format("solver: central scheme needs dt <= dx^2/(2 nu^2) = {}", cap));
    }
}

namespace {

// Bernoulli function z / (e^z - 1) and its derivative.
double bernoulli(double z) {
    if (std::abs(z) < 1e-6) return 1.0 - z / 2.0 + z * z / 12.0;
    return z / std::expm1(z);
}

double bernoulli_deriv(double z) {
    if (std::abs(z) < 1e-4) return -0.5 + z / 6.0 - z * z * z / 180.0;
    const double b = bernoulli(z);
    return b * (1.0 - b) / z - b;
}

// J_{i+1/2} = a_i rho_i - b_i rho_{i+1}.
struct FluxCoefficients {
    std::vector<double> a, b;
    std::vector<double> da, db;  // derivatives with respect to sigma
};

FluxCoefficients flux_coefficients(const Grid& g, double sigma, const Potential& pot, const ModelParams& params,
                                   FluxScheme scheme) {
    const int n = g.n;
    const double dx = g.dx();
    const double nu2 = params.nu * params.nu;
    FluxCoefficients fc;
    fc.a.resize(n - 1);
    fc.b.resize(n - 1);
    fc.da.resize(n - 1);
    fc.db.resize(n - 1);
    for (int i = 0; i + 1 < n; ++i) {
        const double x0 = g.x(i), x1 = g.x(i + 1);
        const double dv = ((pot.h(x1) - sigma * x1) - (pot.h(x0) - sigma * x0)) / nu2;
        if (scheme == FluxScheme::chang_cooper) {
            fc.a[i] = nu2 / dx * bernoulli(dv);
            fc.b[i] = nu2 / dx * bernoulli(-dv);
            // d(dv)/d(sigma) = -dx/nu^2
            fc.da[i] = -bernoulli_deriv(dv);
            fc.db[i] = bernoulli_deriv(-dv);
        } else {
            const double v = dv * nu2 / dx;
            fc.a[i] = nu2 / dx - 0.5 * v;
            fc.b[i] = nu2 / dx + 0.5 * v;
            fc.da[i] = 0.5;
            fc.db[i] = -0.5;
        }
    }
    return fc;
}

Density solve_implicit(const std::vector<double>& rhs, double c0, double dt, const Grid& g, double sigma,
                       const Potential& pot, const ModelParams& params, FluxScheme scheme) {
    const int n = g.n;
    const FluxCoefficients fc = flux_coefficients(g, sigma, pot, params, scheme);
    const double k = dt / (params.tau * g.dx());
    std::vector<double> lo(n, 0.0), di(n, c0), up(n, 0.0), x(rhs);
    for (int i = 0; i + 1 < n; ++i) {
        di[i] += k * fc.a[i];
        up[i] = -k * fc.b[i];
        di[i + 1] += k * fc.b[i];
        lo[i + 1] = -k * fc.a[i];
    }
    if (!solve_tridiagonal(lo, di, up, x)) throw std::runtime_error("fpsolver: tridiagonal solve failed");
    double vmax = 0.0;
    for (double v : x) vmax = std::max(vmax, v);
    for (int i = 0; i < n; ++i) {
        if (!std::isfinite(x[i])) throw std::runtime_error("fpsolver: non-finite value after solve");
        if (x[i] < 0.0) {
            if (x[i] < -1e-13 * vmax)
                throw std::runtime_error(fmt::format("fpsolver: negative density {} at cell {}", x[i], i));
            x[i] = 0.0;
        }
    }
    return Density(g, std::move(x));
}

Density renormalized(Density rho, double& drift) {
    const double m = rho.mass();
    drift = std::abs(m - 1.0);
    for (double& v : rho.values) v /= m;
    return rho;
}

// Secant iteration on the solve tilt so that the first moment after the step equals target exactly.
Density solve_constrained(const std::vector<double>& rhs, double c0, double dt, const Grid& g, double sigma_guess,
                          double target, const Potential& pot, const ModelParams& params, FluxScheme scheme,
                          double& drift) {
    auto eval = [&](double s, Density& out) {
        out = renormalized(solve_implicit(rhs, c0, dt, g, s, pot, params, scheme), drift);
        return moments(out).M1 - target;
    };
    Density r0, r1;
    double s0 = sigma_guess;
    double f0 = eval(s0, r0);
    if (std::abs(f0) <= 1e-14) return r0;
    const Moments mo = moments(r0);
    const double slope = dt * std::max(mo.M2 - mo.M1 * mo.M1, 1e-12) / (params.tau * params.nu * params.nu);
    double s1 = s0 - f0 / slope;
    double f1 = eval(s1, r1);
    for (int it = 0; it < 30; ++it) {
        if (std::abs(f1) <= 1e-14 || f1 == f0) break;
        const double s2 = s1 - f1 * (s1 - s0) / (f1 - f0);
        s0 = s1;
        f0 = f1;
        r0 = std::move(r1);
        s1 = s2;
        f1 = eval(s1, r1);
    }
    return std::abs(f1) <= std::abs(f0) ? r1 : r0;
}

}  // namespace

double sigma_of_state(const Density& rho, double t, const Potential& pot, const ConstraintPath& path,
                      const ModelParams& params) {
    std::vector<double> f(rho.size());
    for (int i = 0; i < rho.grid.n; ++i) f[i] = pot.h1(rho.grid.x(i)) * rho.values[i];
    return integrate(f, rho.grid) + params.tau * path.ell_dot(t);
}

std::vector<double> fluxes(const Density& rho, double sigma, const Potential& pot, const ModelParams& params,
                           FluxScheme scheme) {
    const FluxCoefficients fc = flux_coefficients(rho.grid, sigma, pot, params, scheme);
    std::vector<double> j(fc.a.size());
    for (std::size_t i = 0; i < j.size(); ++i) j[i] = fc.a[i] * rho.values[i] - fc.b[i] * rho.values[i + 1];
    return j;
}

double discrete_sigma(const Density& rho, double t, const Potential& pot, const ConstraintPath& path,
                      const ModelParams& params, FluxScheme scheme) {
    const double target = params.tau * path.ell_dot(t);
    const double dx = rho.grid.dx();
    double s = sigma_of_state(rho, t, pot, path, params);
    for (int it = 0; it < 50; ++it) {
        const FluxCoefficients fc = flux_coefficients(rho.grid, s, pot, params, scheme);
        double f = -target, df = 0.0;
        for (std::size_t i = 0; i < fc.a.size(); ++i) {
            f += dx * (fc.a[i] * rho.values[i] - fc.b[i] * rho.values[i + 1]);
            df += dx * (fc.da[i] * rho.values[i] - fc.db[i] * rho.values[i + 1]);
        }
        if (!(df > 0.0)) throw std::runtime_error("discrete_sigma: flux is not increasing in the tilt");
        const double ds = -f / df;
        s += ds;
        if (std::abs(ds) <= 1e-14 * (1.0 + std::abs(s))) return s;
    }
    throw std::runtime_error("discrete_sigma: Newton iteration did not converge");
}

double multiplier(const Density& rho, double t, const SolverConfig& cfg, const Potential& pot,
                  const ConstraintPath& path, const ModelParams& params) {
    return cfg.multiplier == MultiplierRule::discrete ? discrete_sigma(rho, t, pot, path, params, cfg.scheme)
                                                      : sigma_of_state(rho, t, pot, path, params);
}

double discrete_dissipation(const Density& rho, double sigma, const Potential& pot, const ModelParams& params,
                            FluxScheme scheme) {
    const Grid& g = rho.grid;
    const double nu2 = params.nu * params.nu;
    const auto j = fluxes(rho, sigma, pot, params, scheme);
    auto mu = [&](int i) {
        const double x = g.x(i);
        return nu2 * std::log(std::max(rho.values[i], kDensityFloor)) + pot.h(x) - sigma * x;
    };
    double d = 0.0;
    double mu0 = mu(0);
    for (int i = 0; i + 1 < g.n; ++i) {
        const double mu1 = mu(i + 1);
        d -= (mu1 - mu0) * j[i];
        mu0 = mu1;
    }
    return d;
}

StepResult step(const Density& rho, double t, const SolverConfig& cfg, const Potential& pot,
                const ConstraintPath& path, const ModelParams& params) {
    cfg.validate(rho.grid, params);
    StepResult r;
    r.sigma = multiplier(rho, t, cfg, pot, path, params);
    r.rho = solve_constrained(rho.values, 1.0, cfg.dt, rho.grid, r.sigma, path.ell(t + cfg.dt), pot, params,
                              cfg.scheme, r.renorm_drift);
    return r;
}

FvRun run(const Density& rho0, const ConstraintPath& path, const SolverConfig& cfg, const Potential& pot,
          const ModelParams& params, double T, const RunOptions& opts) {
    const Grid& g = rho0.grid;
    cfg.validate(g, params);
    if (!(T > 0.0)) throw std::invalid_argument("fpsolver run: T must be positive");
    if (opts.record_every < 1) throw std::invalid_argument("fpsolver run: record_every must be at least 1");
    const double dt = cfg.dt;
    const int steps = static_cast<int>(std::ceil(T / dt - 1e-9));

    Density rho = normalize(rho0);
    if (std::abs(moments(rho).M1 - path.ell(0.0)) > 1e-14) rho = project_mean(rho, path.ell(0.0));

    FvRun out;
    std::vector<double> log_gamma_star;
    if (opts.relative_entropies) {
        const LambdaResult ls = lambda_of_ell(path.ell_star, params.nu, pot, g);
        out.lambda_star = ls.lambda;
        log_gamma_star = ls.state.log_density;
    }

    auto make_record = [&](const Density& r, double t, double sigma, double D) {
        TrajectoryRecord rec;
        const EnergyBreakdown eb = free_energy(r, pot, params);
        const Moments mo = moments(r);
        rec.t = t;
        rec.sigma = sigma;
        rec.ell = path.ell(t);
        rec.M1 = mo.M1;
        rec.M2 = mo.M2;
        rec.F = eb.F;
        rec.S = eb.S;
        rec.E = eb.E;
        rec.kkt_residual = std::abs(mo.M1 - rec.ell);
        rec.D = D;
        if (opts.relative_entropies) {
            const LambdaResult lq = lambda_of_ell(rec.ell, params.nu, pot, g);
            out.lambda_quasistatic.push_back(lq.lambda);
            rec.Hrel_quasistatic = relative_entropy_log(r, lq.state.log_density);
            rec.Hrel_star = relative_entropy_log(r, log_gamma_star);
        }
        return rec;
    };

    double sigma = multiplier(rho, 0.0, cfg, pot, path, params);
    double D = discrete_dissipation(rho, sigma, pot, params, cfg.scheme);
    double F = free_energy(rho, pot, params).F;
    out.records.push_back(make_record(rho, 0.0, sigma, D));
    if (opts.keep_states) out.states.push_back(rho);

    Density prev = rho;
    double sigma_prev = sigma;
    for (int n = 0; n < steps; ++n) {
        const double t = n * dt;
        const double t1 = (n + 1) * dt;
        Density next;
        double drift = 0.0;
        bool done = false;
        if (cfg.time_scheme == TimeScheme::bdf2) {
            if (n == 0) {
                // Richardson-extrapolated start keeps the multistep method second order.
                double dh = 0.0;
                const Density full =
                    solve_constrained(rho.values, 1.0, dt, g, sigma, path.ell(t1), pot, params, cfg.scheme, dh);
                const Density hn = solve_constrained(rho.values, 1.0, 0.5 * dt, g, sigma, path.ell(t + 0.5 * dt), pot,
                                                     params, cfg.scheme, dh);
                const double sh = multiplier(hn, t + 0.5 * dt, cfg, pot, path, params);
                const Density two =
                    solve_constrained(hn.values, 1.0, 0.5 * dt, g, sh, path.ell(t1), pot, params, cfg.scheme, dh);
                std::vector<double> ex(g.n);
                double vmax = 0.0;
                for (int i = 0; i < g.n; ++i) {
                    ex[i] = 2.0 * two.values[i] - full.values[i];
                    vmax = std::max(vmax, ex[i]);
                }
                bool positive = true;
                for (double& v : ex) {
                    if (v < -1e-8 * vmax) positive = false;
                    v = std::max(v, 0.0);
                }
                next = renormalized(positive ? Density(g, std::move(ex)) : two, drift);
                done = true;
            } else {
                std::vector<double> rhs(g.n);
                for (int i = 0; i < g.n; ++i) rhs[i] = 2.0 * rho.values[i] - 0.5 * prev.values[i];
                try {
                    next = solve_constrained(rhs, 1.5, dt, g, 2.0 * sigma - sigma_prev, path.ell(t1), pot, params,
                                             cfg.scheme, drift);
                    done = true;
                } catch (const std::runtime_error&) {
                    ++out.bdf2_fallbacks;
                }
            }
        }
        if (!done)
            next = solve_constrained(rho.values, 1.0, dt, g, sigma, path.ell(t1), pot, params, cfg.scheme, drift);
        out.max_renorm_drift = std::max(out.max_renorm_drift, drift);

        const double sigma1 = multiplier(next, t1, cfg, pot, path, params);
        const double D1 = discrete_dissipation(next, sigma1, pot, params, cfg.scheme);
        const double F1 = free_energy(next, pot, params).F;
        const double eb = std::abs(params.tau * (F1 - F) / dt + 0.5 * (D + D1) -
                                   params.tau * 0.5 * (sigma * path.ell_dot(t) + sigma1 * path.ell_dot(t1)));
        out.max_eb_residual = std::max(out.max_eb_residual, eb);
        const double cerr = std::abs(moments(next).M1 - path.ell(t1));
        out.max_constraint_error = std::max(out.max_constraint_error, cerr);

        if ((n + 1) % opts.record_every == 0 || n + 1 == steps) {
            TrajectoryRecord rec = make_record(next, t1, sigma1, D1);
            rec.eb_residual = eb;
            rec.W2sq_step = w2_sq(cells_of(rho), cells_of(next));
            out.records.push_back(rec);
            if (opts.keep_states) out.states.push_back(next);
            if (opts.stop_below > 0.0 && rec.Hrel_quasistatic < opts.stop_below) {
                out.stopped_early = true;
                rho = std::move(next);
                break;
            }
        }
        prev = std::move(rho);
        rho = std::move(next);
        sigma_prev = sigma;
        sigma = sigma1;
        D = D1;
        F = F1;
    }
    out.final_state = rho;
    return out;
}

}  // namespace cfpk
