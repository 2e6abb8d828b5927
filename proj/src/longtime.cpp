#include "cfpk/longtime.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>

#include "cfpk/functionals.hpp"

namespace cfpk {

std::string to_string(Regime r) {
    switch (r) {
        case Regime::convex: return "convex";
        case Regime::unimodal: return "unimodal";
        case Regime::kramers: return "kramers";
    }
    return "unknown";
}

namespace {

std::pair<double, double> variance_extremes(double a, double b, double nu, const Potential& pot, const Grid& grid,
                                            int samples = 129) {
    const double lo = std::min(a, b), hi = std::max(a, b);
    double vmin = std::numeric_limits<double>::infinity(), vmax = 0.0;
    const int m = hi > lo ? samples : 1;
    for (int i = 0; i < m; ++i) {
        const double s = m == 1 ? lo : lo + (hi - lo) * i / (m - 1);
        const double v = gibbs(s, nu, pot, grid).variance;
        vmin = std::min(vmin, v);
        vmax = std::max(vmax, v);
    }
    return {vmin, vmax};
}

bool in_intervals(double s, const std::vector<std::pair<double, double>>& iv) {
    for (const auto& [a, b] : iv)
        if (s > a && s < b) return true;
    return false;
}

}  // namespace

ComparisonReport verify_comparison(const Density& rho, double eta, double ell, double nu, const Potential& pot,
                                   const Grid& grid, double tol) {
    const double m1 = moments(rho).M1;
    if (std::abs(m1 - ell) > 1e-8)
        throw std::invalid_argument(fmt::format("verify_comparison: first moment {} differs from ell = {}", m1, ell));
    ComparisonReport r;
    const LambdaResult lam = lambda_of_ell(ell, nu, pot, grid);
    r.lambda = lam.lambda;
    const GibbsState ge = gibbs(eta, nu, pot, grid);
    r.difference = relative_entropy_log(rho, ge.log_density) - relative_entropy_log(rho, lam.state.log_density);
    const auto [cv, Cv] = variance_extremes(eta, r.lambda, nu, pot, grid);
    r.c_var = cv;
    r.C_var = Cv;
    const double nu4 = std::pow(nu, 4);
    const double d2 = (eta - r.lambda) * (eta - r.lambda);
    r.lower = cv / (2.0 * nu4) * d2;
    r.upper = Cv / (2.0 * nu4) * d2;
    r.holds = r.difference >= r.lower - tol && r.difference <= r.upper + tol;
    return r;
}

double verify_free_energy_identity(const Density& rho, double eta, double nu, const Potential& pot, const Grid& grid) {
    const ModelParams params(1.0, nu);
    const GibbsState ge = gibbs(eta, nu, pot, grid);
    const double F = free_energy(rho, pot, params).F;
    const double Fg = free_energy(ge.density, pot, params).F;
    const double H = relative_entropy_log(rho, ge.log_density);
    const double lhs = F - Fg - nu * nu * H;
    const double rhs = eta * (moments(rho).M1 - ge.mean);
    return std::abs(lhs - rhs);
}

QuasistationaryReport verify_quasistationary_derivative(const std::vector<TrajectoryRecord>& records,
                                                        const Potential& pot, const ConstraintPath& path,
                                                        const ModelParams& params, const Grid& grid) {
    if (records.size() < 3) throw std::invalid_argument("verify_quasistationary_derivative: need at least 3 records");
    const double nu2 = params.nu * params.nu;
    QuasistationaryReport rep;
    for (std::size_t k = 1; k + 1 < records.size(); ++k) {
        const auto& a = records[k - 1];
        const auto& b = records[k];
        const auto& c = records[k + 1];
        if (std::isnan(b.D) || std::isnan(a.Hrel_quasistatic) || std::isnan(c.Hrel_quasistatic))
            throw std::invalid_argument("verify_quasistationary_derivative: records lack D or relative entropies");
        const double lhs = params.tau * nu2 * (c.Hrel_quasistatic - a.Hrel_quasistatic) / (c.t - a.t);
        const double lam = lambda_of_ell(b.ell, params.nu, pot, grid).lambda;
        const double rhs = -b.D + params.tau * path.ell_dot(b.t) * (b.sigma - lam);
        rep.max_residual = std::max(rep.max_residual, std::abs(lhs - rhs));
        rep.scale = std::max(rep.scale, std::abs(b.D));
    }
    return rep;
}

double forcing_integral(const ConstraintPath& path, double rate, double t) {
    if (t <= 0.0 || path.is_constant()) return 0.0;
    if (path.name == "exp_decay" && path.kappa && path.L0) {
        const double k = *path.kappa, L0 = *path.L0;
        if (std::abs(k - rate) <= 1e-12 * std::max(k, rate)) return L0 * t * std::exp(-rate * t);
        return L0 * (std::exp(-rate * t) - std::exp(-k * t)) / (k - rate);
    }
    const int m = 2000;
    const double hstep = t / m;
    double s = 0.0;
    for (int i = 0; i <= m; ++i) {
        const double u = i * hstep;
        const double f = std::exp(-rate * (t - u)) * std::abs(path.ell_dot(u));
        s += (i == 0 || i == m) ? 0.5 * f : f;
    }
    return s * hstep;
}

double fit_decay_rate(const std::vector<double>& t, const std::vector<double>& H, double lo, double hi,
                      bool* short_window, int* points) {
    auto fit = [&](auto&& keep) {
        double n = 0, st = 0, sy = 0, stt = 0, sty = 0;
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (!keep(H[i])) continue;
            const double y = std::log(H[i]);
            n += 1;
            st += t[i];
            sy += y;
            stt += t[i] * t[i];
            sty += t[i] * y;
        }
        const double den = n * stt - st * st;
        const double rate = (n >= 2 && den > 0.0) ? -(n * sty - st * sy) / den : std::numeric_limits<double>::quiet_NaN();
        return std::pair<double, int>{rate, static_cast<int>(n)};
    };
    auto [rate, n] = fit([&](double h) { return h >= lo && h <= hi; });
    bool shortw = false;
    if (n < 3) {
        shortw = true;
        std::tie(rate, n) = fit([&](double h) { return h >= lo && std::isfinite(std::log(h)); });
    }
    if (short_window) *short_window = shortw;
    if (points) *points = n;
    return rate;
}

DecayReport decay_experiment(const Density& rho0, const ConstraintPath& path, const Potential& pot,
                             const ModelParams& params, const SolverConfig& cfg, double T, const DecayOptions& opts) {
    const Grid& grid = rho0.grid;
    DecayReport rep;
    RunOptions ro;
    ro.record_every = opts.record_every;
    ro.keep_states = opts.keep_states;
    ro.relative_entropies = true;
    ro.stop_below = opts.stop_below;
    rep.run = run(rho0, path, cfg, pot, params, T, ro);
    const auto& recs = rep.run.records;
    rep.sigma_star = rep.run.lambda_star;

    double max_lambda = 0.0, max_sigma = 0.0, smin = rep.sigma_star, smax = rep.sigma_star;
    for (std::size_t k = 0; k < recs.size(); ++k) {
        max_lambda = std::max(max_lambda, std::abs(rep.run.lambda_quasistatic[k]));
        max_sigma = std::max(max_sigma, std::abs(recs[k].sigma));
        smin = std::min(smin, recs[k].sigma);
        smax = std::max(smax, recs[k].sigma);
    }
    rep.C_ell_sigma = max_lambda + max_sigma;

    const LsiResult lsi_star = lsi_constant(rep.sigma_star, params.nu, pot, grid);
    const LsiResult lsi_0 = lsi_constant(recs.front().sigma, params.nu, pot, grid);
    rep.C_lsi = std::max(lsi_star.C_lsi, lsi_0.C_lsi);
    rep.predicted_tau = 1.0 / (params.tau * rep.C_lsi);

    const double nu2 = params.nu * params.nu;
    const double H0 = recs.front().Hrel_quasistatic;
    const double r = rep.predicted_tau;
    const bool exp_path = path.kappa && path.L0 && *path.kappa > r;
    if (exp_path) rep.exp_path_constant = rep.C_ell_sigma * *path.L0 / (nu2 * (*path.kappa - r));
    rep.bound_worst_slack = -std::numeric_limits<double>::infinity();
    std::vector<double> ts, hs;
    for (std::size_t k = 0; k < recs.size(); ++k) {
        const auto& rec = recs[k];
        rep.samples.push_back({rec.t, rec.Hrel_quasistatic, rec.Hrel_star, std::abs(rec.sigma - rep.sigma_star)});
        const double rhs = std::exp(-r * rec.t) * H0 + rep.C_ell_sigma / nu2 * forcing_integral(path, r, rec.t);
        rep.bound_worst_slack = std::max(rep.bound_worst_slack, rec.Hrel_quasistatic - rhs * (1.0 + 1e-6));
        if (exp_path && rec.Hrel_quasistatic > std::exp(-r * rec.t) * (H0 + rep.exp_path_constant) * (1.0 + 1e-6) + 1e-8)
            rep.exp_path_bound_holds = false;
        ts.push_back(rec.t);
        hs.push_back(rec.Hrel_quasistatic);
    }
    rep.bound_holds = rep.bound_worst_slack <= 1e-8;
    rep.fitted_rate = fit_decay_rate(ts, hs, opts.fit_low, opts.fit_high, &rep.short_window, &rep.fit_points);
    rep.one_sided_rate_ok = rep.fitted_rate >= 0.95 * rep.predicted_tau;

    if (pot.convexity_lower_bound && *pot.convexity_lower_bound > 0.0) {
        rep.regime = Regime::convex;
        return rep;
    }
    const double pad = 1.0 + (smax - smin);
    const LandscapeReport land = landscape(params.nu, pot, grid, {smin - pad, smax + pad}, 64);
    const std::size_t late = recs.size() - std::max<std::size_t>(1, recs.size() / 10);
    bool late_inside = in_intervals(rep.sigma_star, land.sigma_intervals);
    for (std::size_t k = late; k < recs.size(); ++k) late_inside = late_inside || in_intervals(recs[k].sigma, land.sigma_intervals);
    rep.regime = late_inside ? Regime::kramers : Regime::unimodal;

    if (!in_intervals(recs.back().sigma, land.sigma_intervals)) {
        std::size_t k = recs.size();
        while (k > 0 && !in_intervals(recs[k - 1].sigma, land.sigma_intervals)) --k;
        if (k > 0) {
            rep.sigma_exit_time = recs[k].t;
            std::vector<double> tb(ts.begin(), ts.begin() + k), hb(hs.begin(), hs.begin() + k);
            std::vector<double> ta(ts.begin() + k, ts.end()), ha(hs.begin() + k, hs.end());
            rep.rate_before_exit = fit_decay_rate(tb, hb, opts.fit_low, 1e300);
            rep.rate_after_exit = fit_decay_rate(ta, ha, opts.fit_low, 1e300);
        }
    }
    return rep;
}

SigmaConvergenceReport verify_sigma_convergence(const FvRun& run, const ConstraintPath& path, const Potential& pot,
                                                const ModelParams& params, const Grid& grid) {
    const auto& recs = run.records;
    if (recs.empty() || run.lambda_quasistatic.size() != recs.size())
        throw std::invalid_argument("verify_sigma_convergence: run lacks relative entropies");
    SigmaConvergenceReport rep;
    rep.sigma_star = run.lambda_star;
    const double nu = params.nu, nu2 = nu * nu;
    for (int i = 0; i < grid.n; ++i) {
        const double x = grid.x(i);
        rep.C_H = std::max(rep.C_H, std::abs(pot.h1(x)) / (1.0 + std::abs(x)));
    }
    double lo = rep.sigma_star, hi = rep.sigma_star;
    for (double l : run.lambda_quasistatic) {
        lo = std::min(lo, l);
        hi = std::max(hi, l);
    }
    rep.c_var = variance_extremes(lo, hi, nu, pot, grid, 65).first;
    const auto w = growth_weight(pot);
    const double cmin = pot.c_min();
    const double pinsker = 8.0 * rep.C_H * rep.C_H / (cmin * cmin);

    const GibbsState gstar = gibbs(rep.sigma_star, nu, pot, grid);
    const double Fstar = free_energy(gstar.density, pot, params).F;
    rep.worst_slack = -std::numeric_limits<double>::infinity();
    rep.free_energy_worst_slack = -std::numeric_limits<double>::infinity();
    rep.free_energy_decay_slack = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < recs.size(); ++k) {
        const auto& rec = recs[k];
        const GibbsState g = gibbs(run.lambda_quasistatic[k], nu, pot, grid);
        double cw = 0.0;
        for (int i = 0; i < grid.n; ++i) {
            const double wi = w(grid.x(i));
            if (g.density.values[i] > 0.0) cw += std::exp(wi * wi + g.log_density[i]);
        }
        cw *= grid.dx();
        if (!std::isfinite(cw)) throw std::overflow_error("verify_sigma_convergence: exp(w^2) not integrable");
        rep.C_M = std::max(rep.C_M, cw);
        const double C = 4.0 * pinsker * (1.0 + std::log(std::max(cw, 1.0)));
        rep.C = std::max(rep.C, C);
        const double ld = path.ell_dot(rec.t);
        const double dl = rec.ell - path.ell_star;
        const double lhs = (rec.sigma - rep.sigma_star) * (rec.sigma - rep.sigma_star);
        const double rhs = C * std::max(0.0, rec.Hrel_quasistatic) + 4.0 * params.tau * params.tau * ld * ld +
                           2.0 * nu2 * nu2 / (rep.c_var * rep.c_var) * dl * dl;
        rep.worst_slack = std::max(rep.worst_slack, lhs - rhs);

        const double fe = std::abs(rec.F - Fstar - nu2 * rec.Hrel_star);
        const double allowance = 1e-8 + std::abs(rep.sigma_star) * std::abs(rec.M1 - rec.ell);
        rep.free_energy_worst_slack =
            std::max(rep.free_energy_worst_slack, fe - std::abs(rep.sigma_star) * std::abs(dl) - allowance);
        if (path.kappa && path.L0) {
            const double decay = std::abs(rep.sigma_star) * *path.L0 / *path.kappa * std::exp(-*path.kappa * rec.t);
            rep.free_energy_decay_slack = std::max(rep.free_energy_decay_slack, fe - decay - allowance);
        }
    }
    rep.holds = rep.worst_slack <= 1e-8;
    rep.free_energy_holds = rep.free_energy_worst_slack <= 0.0 && rep.free_energy_decay_slack <= 0.0;
    return rep;
}

CkpChainReport verify_ckp_chain(const FvRun& run, const Potential& pot, const ModelParams& params, double tol) {
    if (run.states.empty()) throw std::invalid_argument("verify_ckp_chain: run has no stored states");
    const Grid& grid = run.states.front().grid;
    const GibbsState gstar = gibbs(run.lambda_star, params.nu, pot, grid);
    const auto w = growth_weight(pot);
    CkpChainReport rep;
    rep.worst_ckp_slack = -std::numeric_limits<double>::infinity();
    rep.worst_weighted_slack = -std::numeric_limits<double>::infinity();
    for (const auto& rho : run.states) {
        const CkpResult c = ckp_l1_bound(rho, gstar.density);
        rep.worst_ckp_slack = std::max(rep.worst_ckp_slack, c.l1 - c.bound);
        const WeightedCkpResult wc = weighted_ckp(rho, gstar.density, w);
        rep.worst_weighted_slack = std::max(rep.worst_weighted_slack, wc.weighted_l1 - wc.bound);
    }
    rep.holds = rep.worst_ckp_slack <= tol && rep.worst_weighted_slack <= tol;
    return rep;
}

// ---------------------------------------------------------------------------------------------

Density sweep_initial_density(const Potential& pot, double ell_star, double nu, const Grid& grid) {
    const double sigma_star = lambda_of_ell(ell_star, nu, pot, grid).lambda;
    std::vector<double> minima;
    auto hs = [&](double x) { return pot.h(x) - sigma_star * x; };
    for (int i = 1; i + 1 < grid.n; ++i) {
        const double x = grid.x(i);
        if (hs(x) < hs(grid.x(i - 1)) && hs(x) <= hs(grid.x(i + 1))) minima.push_back(x);
    }
    if (minima.size() >= 2) {
        const double a = minima.front(), b = minima.back();
        const double va = nu * nu / std::max(pot.h2(a), 1e-6);
        const double vb = nu * nu / std::max(pot.h2(b), 1e-6);
        const Density left = gaussian_density(grid, a, va);
        const Density right = gaussian_density(grid, b, vb);
        std::vector<double> v(grid.n);
        for (int i = 0; i < grid.n; ++i) v[i] = 0.7 * left.values[i] + 0.3 * right.values[i];
        return project_mean(Density(grid, std::move(v)), ell_star);
    }
    return project_mean(gibbs(sigma_star, 1.3 * nu, pot, grid).density, ell_star);
}

int sweep_threads(int requested, int jobs) {
    int n = requested;
    if (n <= 0) {
        if (const char* env = std::getenv("CFPK_THREADS")) n = std::atoi(env);
    }
    const int hw = std::max(1u, std::thread::hardware_concurrency());
    if (n <= 0) n = hw;
    return std::max(1, std::min({n, hw, std::max(jobs, 1)}));
}

SweepReport kramers_sweep(const Potential& pot, double ell_star, const std::vector<double>& nu_list,
                          const SolverConfig& cfg, const SweepOptions& opts) {
    if (nu_list.empty()) throw std::invalid_argument("kramers_sweep: empty nu list");
    const Grid& grid = opts.grid;
    SweepReport rep;
    rep.ell_star = ell_star;
    const bool convex = pot.convexity_lower_bound && *pot.convexity_lower_bound > 0.0;
    if (!convex) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (int i = 0; i < grid.n; ++i) {
            lo = std::min(lo, pot.h1(grid.x(i)));
            hi = std::max(hi, pot.h1(grid.x(i)));
        }
        rep.delta_h_star = landscape(nu_list.front(), pot, grid, {lo, hi}, 64).delta_h_star;
    }
    rep.entries.resize(nu_list.size());
    const auto start = std::chrono::steady_clock::now();
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t j = next.fetch_add(1);
            if (j >= nu_list.size()) return;
            SweepEntry& e = rep.entries[j];
            e.nu = nu_list[j];
            const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            if (elapsed > opts.time_budget_seconds) {
                e.error = "time budget exceeded before start";
                continue;
            }
            try {
                const ModelParams params(1.0, e.nu);
                const Density rho0 =
                    opts.initial ? opts.initial(e.nu, grid) : sweep_initial_density(pot, ell_star, e.nu, grid);
                DecayOptions dopt;
                dopt.record_every = opts.record_every;
                dopt.stop_below = 0.1 * dopt.fit_low;
                const DecayReport d = decay_experiment(rho0, constant_path(ell_star), pot, params, cfg, opts.T_max, dopt);
                e.fitted_rate = d.fitted_rate;
                e.regime = d.regime;
                e.short_window = d.short_window;
                const double nu2 = e.nu * e.nu;
                if (convex) e.predicted_scale = *pot.convexity_lower_bound;
                else if (d.regime == Regime::kramers) e.predicted_scale = nu2 * std::exp(-rep.delta_h_star / nu2);
                else e.predicted_scale = nu2;
                e.ratio = e.fitted_rate / e.predicted_scale;
                e.completed = std::isfinite(e.fitted_rate);
                e.records = d.run.records;
            } catch (const std::exception& ex) {
                e.error = ex.what();
            }
        }
    };
    const int nthreads = sweep_threads(opts.threads, static_cast<int>(nu_list.size()));
    std::vector<std::thread> pool;
    for (int i = 1; i < nthreads; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& e : rep.entries) {
        if (!e.completed || !(e.fitted_rate > 0.0)) {
            rep.partial = true;
            continue;
        }
        const double x = 2.0 * std::log(e.nu) - rep.delta_h_star / (e.nu * e.nu);
        const double y = std::log(e.fitted_rate);
        n += 1;
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double den = n * sxx - sx * sx;
    rep.slope = (n >= 2 && den > 0.0) ? (n * sxy - sx * sy) / den : std::numeric_limits<double>::quiet_NaN();

    std::vector<const SweepEntry*> order;
    for (const auto& e : rep.entries)
        if (e.completed) order.push_back(&e);
    std::sort(order.begin(), order.end(), [](const SweepEntry* a, const SweepEntry* b) { return a->nu > b->nu; });
    rep.monotone = order.size() >= 2;
    for (std::size_t i = 1; i < order.size(); ++i)
        if (!(order[i]->fitted_rate < order[i - 1]->fitted_rate)) rep.monotone = false;
    return rep;
}

}  // namespace cfpk
