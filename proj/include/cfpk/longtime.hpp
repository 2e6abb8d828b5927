#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cfpk/core.hpp"
#include "cfpk/equilibrium.hpp"
#include "cfpk/fpsolver.hpp"

namespace cfpk {

struct ComparisonReport {
    double lambda = 0.0;      // lambda(ell)
    double difference = 0.0;  // H(rho|gamma_eta) - H(rho|gamma_lambda)
    double lower = 0.0;       // c_var / (2 nu^4) (eta - lambda)^2
    double upper = 0.0;       // C_var / (2 nu^4) (eta - lambda)^2
    double c_var = 0.0;       // variance extremes over the tilts between eta and lambda
    double C_var = 0.0;
    bool holds = false;
};

/// Both sides of the relative-entropy comparison for a density with first moment ell.
ComparisonReport verify_comparison(const Density& rho, double eta, double ell, double nu, const Potential& pot,
                                   const Grid& grid, double tol = 1e-8);

/// |F(rho) - F(gamma_eta) - nu^2 H(rho|gamma_eta) - eta (M1(rho) - M1(gamma_eta))|.
double verify_free_energy_identity(const Density& rho, double eta, double nu, const Potential& pot, const Grid& grid);

struct QuasistationaryReport {
    double max_residual = 0.0;  // max over interior records of |tau nu^2 dH/dt - (-D + tau l' (sigma - lambda))|
    double scale = 0.0;         // max |D| over the same records
};

/// Centered differences of Hrel_quasistatic against the entropy-dissipation identity. Needs uniformly spaced
/// records with relative entropies and D.
QuasistationaryReport verify_quasistationary_derivative(const std::vector<TrajectoryRecord>& records,
                                                        const Potential& pot, const ConstraintPath& path,
                                                        const ModelParams& params, const Grid& grid);

enum class Regime { convex, unimodal, kramers };
std::string to_string(Regime r);

struct DecaySample {
    double t = 0.0;
    double Hrel_quasistatic = 0.0;
    double Hrel_star = 0.0;
    double sigma_gap = 0.0;  // |sigma(t) - sigma*|
};

struct DecayReport {
    double fitted_rate = 0.0;
    double predicted_tau = 0.0;  // 1 / (tau C_LSI)
    double C_lsi = 0.0;
    double C_ell_sigma = 0.0;    // max |lambda(l(t))| + max |sigma(t)|
    Regime regime = Regime::convex;
    std::vector<DecaySample> samples;

    bool short_window = false;
    int fit_points = 0;
    double bound_worst_slack = 0.0;  // max over samples of H(t) - rhs(t); <= 0 when the bound holds
    bool bound_holds = false;
    bool one_sided_rate_ok = false;  // fitted_rate >= 0.95 predicted_tau
    double exp_path_constant = 0.0;    // C of H <= e^{-tau t}(H0 + C), exp-decay paths with kappa > tau
    bool exp_path_bound_holds = true;
    double sigma_exit_time = -1.0;   // last entry time into the complement of Sigma (-1: never inside / never left)
    double rate_before_exit = 0.0;
    double rate_after_exit = 0.0;
    double sigma_star = 0.0;
    FvRun run;
};

struct DecayOptions {
    int record_every = 1;
    bool keep_states = false;
    double stop_below = 0.0;
    double fit_low = 1e-10;
    double fit_high = 1e-2;
};

/// Integral of e^{-r (t - s)} |l'(s)| over [0, t]; closed form for exponential paths.
double forcing_integral(const ConstraintPath& path, double rate, double t);

/// Least-squares decay rate of log H over samples with H in [lo, hi]; sets short_window when fewer than 3
/// points fall in the band and the fit falls back to all samples above lo.
double fit_decay_rate(const std::vector<double>& t, const std::vector<double>& H, double lo, double hi,
                      bool* short_window = nullptr, int* points = nullptr);

DecayReport decay_experiment(const Density& rho0, const ConstraintPath& path, const Potential& pot,
                             const ModelParams& params, const SolverConfig& cfg, double T,
                             const DecayOptions& opts = {});

struct SigmaConvergenceReport {
    double sigma_star = 0.0;
    double C_H = 0.0;   // sup |H'| / (1 + |x|) on the grid
    double C_M = 0.0;   // max over samples of the integral of exp(w^2) against gamma_{lambda(l(t))}
    double C = 0.0;     // 4 * 8 C_H^2 / min(c-, c+)^2 * (1 + log C_M)
    double c_var = 0.0; // smallest variance over the tilts visited
    double worst_slack = 0.0;            // max over samples of lhs - rhs
    bool holds = false;
    double free_energy_worst_slack = 0.0;  // max of |F - F(gamma*) - nu^2 H*| - |sigma*| |l - l*| (tolerance 1e-8)
    bool free_energy_holds = false;
    double free_energy_decay_slack = 0.0;  // against |sigma*| L0/kappa e^{-kappa t}, exp paths only
};

SigmaConvergenceReport verify_sigma_convergence(const FvRun& run, const ConstraintPath& path,
                                                const Potential& pot, const ModelParams& params, const Grid& grid);

struct CkpChainReport {
    double worst_ckp_slack = 0.0;       // max of L1 - sqrt(2 H*) over samples
    double worst_weighted_slack = 0.0;  // max of weighted L1 - bound over samples
    bool holds = false;
};

/// CKP and weighted CKP against gamma_{lambda(l*)} on every stored state of the run.
CkpChainReport verify_ckp_chain(const FvRun& run, const Potential& pot, const ModelParams& params, double tol = 1e-8);

struct SweepEntry {
    double nu = 0.0;
    double fitted_rate = 0.0;
    double predicted_scale = 0.0;  // nu^2 exp(-dH*/nu^2), nu^2 without barrier, k if convex
    double ratio = 0.0;            // fitted_rate / predicted_scale
    Regime regime = Regime::convex;
    bool short_window = false;
    bool completed = false;
    std::string error;
    std::vector<TrajectoryRecord> records;
};

struct SweepReport {
    double ell_star = 0.0;
    double delta_h_star = 0.0;
    std::vector<SweepEntry> entries;  // in the order of nu_list
    double slope = 0.0;               // log rate against 2 log nu - dH*/nu^2
    bool monotone = false;            // rates decrease as 1/nu^2 grows
    bool partial = false;
};

struct SweepOptions {
    Grid grid{-7.0, 7.0, 512};
    double T_max = 4000.0;
    int record_every = 25;
    double time_budget_seconds = 240.0;
    int threads = 0;  // 0: CFPK_THREADS or hardware concurrency
    std::function<Density(double nu, const Grid&)> initial;  // defaults to sweep_initial_density
};

/// Bimodal 70/30 data mean-projected onto l* when gamma_{lambda(l*)} is multimodal, otherwise a tilted
/// Gibbs state mean-projected onto l*.
Density sweep_initial_density(const Potential& pot, double ell_star, double nu, const Grid& grid);

SweepReport kramers_sweep(const Potential& pot, double ell_star, const std::vector<double>& nu_list,
                          const SolverConfig& cfg, const SweepOptions& opts = {});

/// Worker count from CFPK_THREADS, capped by hardware concurrency and the number of jobs.
int sweep_threads(int requested, int jobs);

}  // namespace cfpk
