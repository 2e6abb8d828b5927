// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "cfpk/equilibrium.hpp"
#include "cfpk/functionals.hpp"
#include "cfpk/fpsolver.hpp"
#include "cfpk/longtime.hpp"
#include "cfpk/transport.hpp"

using namespace cfpk;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Density mixture(std::mt19937_64& rng, const Grid& g, double ell) {
    std::uniform_real_distribution<double> m(-2.0, 2.0), v(0.2, 1.2), w(0.2, 1.0);
    std::vector<double> vals(g.n, 0.0);
    for (int k = 0; k < 3; ++k) {
        const Density c = gaussian_density(g, m(rng), v(rng));
        const double wk = w(rng);
        for (int i = 0; i < g.n; ++i) vals[i] += wk * c.values[i];
    }
    return project_mean(normalize(Density(g, vals)), ell);
}

Outcome equilibrium_map() {
    const auto t0 = std::chrono::steady_clock::now();
    const Grid g(-12.0, 12.0, 2048);
    const Potential q = quadratic_potential(1.0);
    double worst = 0.0;
    int iters = 0;
    for (double ell : {-1.0, 0.0, 0.7, 2.0}) {
        const LambdaResult r = lambda_of_ell(ell, 1.0, q, g);
        worst = std::max(worst, std::abs(r.lambda - ell));
        iters = std::max(iters, r.iterations);
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-9 && iters <= 6 && secs < 1.0,
            fmt::format("max |lambda - ell| = {:.2e}, max iterations = {}, {:.3f} s", worst, iters, secs)};
}

Outcome monotone_parametrization() {
    // The moment map has derivative Var / nu^2 in the tilt.
    const Grid g(-8.0, 8.0, 1024);
    const Potential d = doublewell_potential();
    const double nu = 0.5;
    double worst = 0.0;
    bool monotone = true;
    double prev = -1e300;
    for (int k = 0; k < 20; ++k) {
        const double s = -1.5 + 3.0 * k / 19.0, e = 1e-5;
        const double slope = (gibbs(s + e, nu, d, g).mean - gibbs(s - e, nu, d, g).mean) / (2.0 * e);
        const GibbsState st = gibbs(s, nu, d, g);
        worst = std::max(worst, std::abs(slope / (st.variance / (nu * nu)) - 1.0));
        monotone = monotone && st.mean > prev;
        prev = st.mean;
    }
    return {worst <= 0.01 && monotone, fmt::format("max relative slope error = {:.2e} over 20 tilts", worst)};
}

Outcome gaussian_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    const Grid g(-10.0, 10.0, 1024);
    const double ell = 0.5, v0 = 2.25;
    SolverConfig c;
    c.dt = 1e-3;
    RunOptions o;
    o.relative_entropies = false;
    const FvRun r = run(gaussian_density(g, ell, v0), constant_path(ell), c, quadratic_potential(1.0),
                        ModelParams(1.0, 1.0), 3.0, o);
    double worst = 0.0;
    for (const auto& rec : r.records) {
        const double v = rec.M2 - rec.M1 * rec.M1;
        worst = std::max(worst, std::abs(v - (1.0 + (v0 - 1.0) * std::exp(-2.0 * rec.t))));
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-3 && secs < 10.0, fmt::format("sup variance error = {:.2e}, {:.2f} s", worst, secs)};
}

Outcome jko_fixed_point() {
    const Grid g(-6.0, 6.0, 2048);
    const Potential d = doublewell_potential();
    const ModelParams p(1.0, 0.5);
    double w2max = 0.0, gap = 0.0;
    for (double ell : {0.0, 0.3}) {
        const LambdaResult lr = lambda_of_ell(ell, p.nu, d, g);
        const JkoStepResult s = jko_step(lr.state.density, ell, 0.01, d, p);
        w2max = std::max(w2max, std::sqrt(s.w2_sq));
        gap = std::max(gap, std::abs(s.sigma_k - lr.lambda));
    }
    return {w2max <= 1e-6 && gap <= 1e-6, fmt::format("W2 = {:.2e}, |sigma - lambda| = {:.2e}", w2max, gap)};
}

struct SchemeRuns {
    std::vector<double> hs{0.04, 0.02, 0.01};
    std::vector<JkoRun> jko;
    FvRun fv;
    Grid grid{-6.0, 6.0, 1024};
    Potential pot = doublewell_potential();
    ModelParams params{1.0, 0.7};
    double ell = 0.5;
};

const SchemeRuns& scheme_runs() {
    static const SchemeRuns runs = [] {
        SchemeRuns r;
        const Density rho0 = gaussian_density(r.grid, r.ell, 1.0);
        for (double h : r.hs) r.jko.push_back(jko_run(rho0, constant_path(r.ell), h, 1.0, r.pot, r.params, {}, true));
        SolverConfig c;
        c.dt = 1e-4;
        RunOptions o;
        o.relative_entropies = false;
        r.fv = run(rho0, constant_path(r.ell), c, r.pot, r.params, 1.0, o);
        return r;
    }();
    return runs;
}

Outcome scheme_consistency() {
    const SchemeRuns& s = scheme_runs();
    // smooth cutoff exp(-x^2/8) on sin
    auto cut = [](double x) { return std::exp(-x * x / 8.0); };
    TestFunction sine{[&](double x) { return std::sin(x) * cut(x); },
                      [&](double x) { return (std::cos(x) - x / 4.0 * std::sin(x)) * cut(x); },
                      [&](double x) {
                          return (-std::sin(x) - x / 2.0 * std::cos(x) + (x * x / 16.0 - 0.25) * std::sin(x)) * cut(x);
                      },
                      0.0};
    for (int i = 0; i <= 200000; ++i) sine.sup_d2 = std::max(sine.sup_d2, std::abs(sine.d2(-12.0 + 24.0 * i / 200000)));
    const TestFunction square{[](double x) { return x * x; }, [](double x) { return 2.0 * x; },
                              [](double) { return 2.0; }, 2.0};

    bool weak_ok = true;
    double worst_ratio[2] = {0.0, 0.0};
    std::vector<double> constants;
    for (std::size_t j = 0; j < s.hs.size(); ++j) {
        const JkoRun& r = s.jko[j];
        for (std::size_t k = 1; k < r.states.size(); ++k) {
            const TestFunction* tests[2] = {&square, &sine};
            for (int z = 0; z < 2; ++z) {
                const WeakFormReport w = weak_form_residual(r.states[k - 1], r.states[k], r.records[k].sigma, r.h,
                                                            *tests[z], s.pot, s.params, r.records[k].kkt_residual);
                weak_ok = weak_ok && w.holds();
                worst_ratio[z] = std::max(worst_ratio[z], w.residual / (w.bound + w.solver_allowance + 1e-300));
            }
        }
        constants.push_back(r.sum_w2_sq / r.h);
    }
    const double cmax = *std::max_element(constants.begin(), constants.end());
    const double cmin = *std::min_element(constants.begin(), constants.end());
    const bool stable = cmax <= 2.0 * cmin;
    return {weak_ok && stable,
            fmt::format("worst residual/bound = {:.6f} (x^2), {:.3f} (sin cutoff); sum W2^2 / h = {:.4f}, {:.4f}, "
                        "{:.4f}",
                        worst_ratio[0], worst_ratio[1],
                        constants[0], constants[1], constants[2])};
}

Outcome multiplier_convergence() {
    const SchemeRuns& s = scheme_runs();
    std::vector<double> gaps;
    for (const JkoRun& r : s.jko) {
        const SigmaSeries series = discrete_sigma_series(r.records, r.h);
        double gap = 0.0;
        for (const auto& rec : s.fv.records)
            if (rec.t > 0.0) gap = std::max(gap, std::abs(series.piecewise(rec.t) - rec.sigma));
        gaps.push_back(gap);
    }
    const bool ok = gaps[1] < gaps[0] && gaps[2] < gaps[1];
    return {ok, fmt::format("sup |sigma_h - sigma| = {:.3e}, {:.3e}, {:.3e}", gaps[0], gaps[1], gaps[2])};
}

Outcome energy_audit() {
    const Grid g(-10.0, 10.0, 1024);
    const ConstraintPath path = exp_decay_path(0.5, 0.3, 1.0);
    const Density rho0 = gaussian_density(g, 0.8, 2.25);
    auto residual = [&](double dt) {
        SolverConfig c;
        c.dt = dt;
        RunOptions o;
        o.relative_entropies = false;
        o.record_every = 100;
        return run(rho0, path, c, quadratic_potential(1.0), ModelParams(1.0, 1.0), 2.0, o).max_eb_residual;
    };
    const double coarse = residual(1e-3), fine = residual(5e-4);
    return {coarse <= 1e-3 && coarse / fine >= 3.0,
            fmt::format("max residual {:.3e} at dt = 1e-3, {:.3e} at dt = 5e-4 (ratio {:.2f})", coarse, fine,
                        coarse / fine)};
}

Outcome quantitative_decay() {
    const auto t0 = std::chrono::steady_clock::now();
    const Grid g(-10.0, 10.0, 1024);
    SolverConfig c;
    DecayOptions o;
    o.record_every = 10;
    const DecayReport r = decay_experiment(gaussian_density(g, 0.5, 2.25), constant_path(0.5), quadratic_potential(1.0),
                                           ModelParams(1.0, 1.0), c, 10.0, o);
    const double H0 = r.samples.front().Hrel_star;
    double worst = -1e300;
    for (const auto& smp : r.samples) worst = std::max(worst, smp.Hrel_star - std::exp(-smp.t) * H0);
    const double secs = seconds_since(t0);
    const bool ok = worst <= 1e-12 && r.predicted_tau == 1.0 && r.fitted_rate >= 1.0 && secs < 30.0;
    return {ok, fmt::format("max H(t) - e^-t H(0) = {:.2e}, fitted rate = {:.3f}, predicted = {}, {:.1f} s", worst,
                            r.fitted_rate, r.predicted_tau, secs)};
}

Outcome identity_suites() {
    const Grid g(-8.0, 8.0, 1024);
    const Potential d = doublewell_potential();
    const double nu = 0.5;
    const double tol = 1e-8 + g.dx() * g.dx();
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(-1.5, 1.5);

    double identity = 0.0;
    for (int k = 0; k < 20; ++k) {
        const Density rho = mixture(rng, g, u(rng));
        identity = std::max(identity, verify_free_energy_identity(rho, u(rng), nu, d, g));
    }
    bool sandwich = true;
    for (int k = 0; k < 10; ++k) {
        const double ell = u(rng), eta = u(rng);
        sandwich = sandwich && verify_comparison(mixture(rng, g, ell), eta, ell, nu, d, g).holds;
    }
    SolverConfig c;
    c.dt = 5e-3;
    RunOptions o;
    o.keep_states = true;
    o.record_every = 20;
    const FvRun r = run(mixture(rng, g, 0.3), constant_path(0.3), c, d, ModelParams(1.0, nu), 5.0, o);
    const CkpChainReport ckp = verify_ckp_chain(r, d, ModelParams(1.0, nu), tol);
    const bool ok = identity <= 1e-8 && sandwich && ckp.holds;
    return {ok, fmt::format("identity residual = {:.2e}, sandwich {}, CKP slack = {:.2e}, weighted slack = {:.2e} "
                            "over {} states",
                            identity, sandwich ? "holds" : "fails", ckp.worst_ckp_slack, ckp.worst_weighted_slack,
                            r.states.size())};
}

Outcome regime_study() {
    const auto t0 = std::chrono::steady_clock::now();
    SolverConfig c;
    c.dt = 1e-2;
    SweepOptions o;
    o.grid = Grid(-7.0, 7.0, 512);
    const std::vector<double> nus{0.8, 0.6, 0.5};
    const SweepReport sym = kramers_sweep(doublewell_potential(), 0.0, nus, c, o);
    const SweepReport off = kramers_sweep(doublewell_potential(), 2.5, nus, c, o);
    bool complete = !sym.partial && !off.partial;
    for (const auto* r : {&sym, &off})
        for (const auto& e : r->entries) complete = complete && e.completed;
    // without slowdown the rate at the smallest nu keeps a fixed fraction of the largest-nu rate, far above the
    // barrier factor exp(-dH* (1/nu_min^2 - 1/nu_max^2))
    const double off_ratio = off.entries.back().fitted_rate / off.entries.front().fitted_rate;
    const double barrier_factor = std::exp(-sym.delta_h_star * (1.0 / (0.5 * 0.5) - 1.0 / (0.8 * 0.8)));
    const double secs = seconds_since(t0);
    const bool ok = complete && sym.monotone && std::abs(sym.slope - 1.0) <= 0.5 && off_ratio >= 0.5 && secs < 300.0;
    return {ok, fmt::format("rates {:.4g}, {:.4g}, {:.4g}; slope = {:.3f}; single-well rate ratio = {:.3f} "
                            "(barrier factor {:.3f}); {:.1f} s",
                            sym.entries[0].fitted_rate, sym.entries[1].fitted_rate, sym.entries[2].fitted_rate,
                            sym.slope, off_ratio, barrier_factor, secs)};
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome determinism() {
    const auto base = std::filesystem::temp_directory_path() / "cfpk_acceptance";
    std::filesystem::remove_all(base);
    // both runs write to the same directory, since the echoed config records it
    std::map<std::string, std::string> first;
    for (int run = 0; run < 2; ++run) {
        std::filesystem::remove_all(base);
        const std::string cmd = fmt::format("{} verify --config {} --out {} > /dev/null 2>&1", CFPK_TOOL_PATH,
                                            CFPK_CONVEX_CONFIG, base.string());
        if (std::system(cmd.c_str()) != 0) return {false, fmt::format("verify run {} failed", run + 1)};
        std::map<std::string, std::string> files;
        for (const auto& entry : std::filesystem::directory_iterator(base))
            files[entry.path().filename().string()] = slurp(entry.path());
        if (run == 0) {
            first = std::move(files);
            continue;
        }
        if (files.size() != first.size()) return {false, "file sets differ"};
        for (const auto& [name, body] : files)
            if (first.count(name) == 0 || first.at(name) != body) return {false, fmt::format("{} differs", name)};
    }
    std::filesystem::remove_all(base);
    return {!first.empty(), fmt::format("{} output files bit-identical", first.size())};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"equilibrium map", equilibrium_map},
        {"monotone parametrization", monotone_parametrization},
        {"Gaussian oracle", gaussian_oracle},
        {"JKO fixed point", jko_fixed_point},
        {"scheme consistency", scheme_consistency},
        {"multiplier convergence", multiplier_convergence},
        {"energy audit", energy_audit},
        {"quantitative decay", quantitative_decay},
        {"identities and inequalities", identity_suites},
        {"regime study", regime_study},
        {"determinism", determinism}};
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, fmt::format("exception: {}", e.what())};
        }
        if (!o.pass) ++failures;
        fmt::print("criterion {:>2} {:<28} {}  {}\n", i + 1, criteria[i].first, o.pass ? "PASS" : "FAIL", o.detail);
        std::fflush(stdout);
    }
    fmt::print("{} of {} criteria passed\n", criteria.size() - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
