#pragma once

#include <string>
#include <vector>

#include "cfpk/core.hpp"
#include "cfpk/trajectory.hpp"

namespace cfpk {

enum class FluxScheme { chang_cooper, central };
enum class TimeScheme { bdf2, backward_euler };
enum class MultiplierRule { discrete, quadrature };

std::string to_string(FluxScheme s);
std::string to_string(TimeScheme s);
std::string to_string(MultiplierRule s);
FluxScheme flux_scheme_from_string(const std::string& s);
TimeScheme time_scheme_from_string(const std::string& s);
MultiplierRule multiplier_rule_from_string(const std::string& s);

struct SolverConfig {
    double dt = 1e-3;
    FluxScheme scheme = FluxScheme::chang_cooper;
    TimeScheme time_scheme = TimeScheme::bdf2;
    // discrete: the tilt for which the discrete fluxes move the first moment at rate l'(t) exactly.
    MultiplierRule multiplier = MultiplierRule::discrete;

    void validate(const Grid& grid, const ModelParams& params) const;
};

/// Integral of H' rho plus tau l'(t), by quadrature.
double sigma_of_state(const Density& rho, double t, const Potential& pot, const ConstraintPath& path,
                      const ModelParams& params);

/// Tilt s with dx * sum_i J_{i+1/2}(s) = tau l'(t).
double discrete_sigma(const Density& rho, double t, const Potential& pot, const ConstraintPath& path,
                      const ModelParams& params, FluxScheme scheme = FluxScheme::chang_cooper);

double multiplier(const Density& rho, double t, const SolverConfig& cfg, const Potential& pot,
                  const ConstraintPath& path, const ModelParams& params);

/// Interface fluxes J_{i+1/2}, i = 0..n-2, of -(nu^2 rho' + (H' - sigma) rho).
std::vector<double> fluxes(const Density& rho, double sigma, const Potential& pot, const ModelParams& params,
                           FluxScheme scheme = FluxScheme::chang_cooper);

/// Discrete dissipation -sum_i (mu_{i+1} - mu_i) J_{i+1/2} with mu = nu^2 log rho + H - sigma x.
double discrete_dissipation(const Density& rho, double sigma, const Potential& pot, const ModelParams& params,
                            FluxScheme scheme = FluxScheme::chang_cooper);

struct StepResult {
    Density rho;
    double sigma = 0.0;         // multiplier of (rho, t)
    double renorm_drift = 0.0;  // |mass - 1| before renormalization
};

/// One backward-Euler step. The solve tilt starts at the multiplier of (rho, t) and is corrected so that the
/// first moment lands on l(t + dt).
StepResult step(const Density& rho, double t, const SolverConfig& cfg, const Potential& pot,
                const ConstraintPath& path, const ModelParams& params);

struct RunOptions {
    int record_every = 1;
    bool keep_states = false;
    bool relative_entropies = true;
    double stop_below = 0.0;  // stop once Hrel_quasistatic drops below this (0 disables)
};

struct FvRun {
    std::vector<TrajectoryRecord> records;
    std::vector<Density> states;           // at the recorded times, when keep_states is set
    std::vector<double> lambda_quasistatic;  // lambda(l(t)) per record, with relative entropies
    Density final_state;
    double max_eb_residual = 0.0;
    double max_renorm_drift = 0.0;
    double max_constraint_error = 0.0;
    int bdf2_fallbacks = 0;
    double lambda_star = 0.0;
    bool stopped_early = false;
};

/// Integrates to T in ceil(T/dt) steps. rho0 is mean-shifted onto l(0) if needed.
FvRun run(const Density& rho0, const ConstraintPath& path, const SolverConfig& cfg, const Potential& pot,
          const ModelParams& params, double T, const RunOptions& opts = {});

}  // namespace cfpk
