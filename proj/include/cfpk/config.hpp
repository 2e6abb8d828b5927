#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "cfpk/core.hpp"
#include "cfpk/fpsolver.hpp"

namespace cfpk {

enum class Experiment { simulate, equilibrium, landscape, decay, kramers_sweep, verify };
enum class SolverChoice { fv, jko, both };

std::string to_string(Experiment e);
std::string to_string(SolverChoice s);
Experiment experiment_from_string(const std::string& s);
SolverChoice solver_choice_from_string(const std::string& s);

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    // [model]
    std::string potential = "quadratic:1";
    std::string path = "constant:0";
    double tau = 1.0;
    double nu = 1.0;
    // [grid]
    double x_min = -10.0;
    double x_max = 10.0;
    int n = 1024;
    // [solver]
    SolverChoice solver = SolverChoice::fv;
    double dt = 1e-3;
    double h = 1e-2;
    double T = 1.0;
    std::string scheme = "chang_cooper";
    std::string time_scheme = "bdf2";
    std::string multiplier = "discrete";
    int record_every = 10;
    // [initial]
    std::string initial = "gibbs";  // gibbs | gaussian:mean,var | bimodal
    // [experiment]
    Experiment experiment = Experiment::simulate;
    std::string out = "cfpk_out";
    std::uint64_t seed = 1;
    std::vector<double> nu_list{0.8, 0.6, 0.5};
    double T_max = 4000.0;
    double time_budget = 240.0;

    Grid grid() const { return Grid(x_min, x_max, n); }
    ModelParams params() const { return ModelParams(tau, nu); }
    SolverConfig solver_config() const;
};

/// "quadratic:k", "doublewell", "polynomial:c0,c1,...[;c_minus,c_plus]" (braces accepted in place of the colon).
/// Polynomials above degree two need the growth constants after the semicolon.
Potential parse_potential(const std::string& spec);
/// "constant:l", "exp_decay:l_star,A,kappa", "tanh_ramp:l0,l1,t0,w".
ConstraintPath parse_path(const std::string& spec);
Density initial_density(const RunConfig& cfg, const Potential& pot, const ConstraintPath& path);

/// Parses and, when check is set, validates.
RunConfig parse_config(const std::string& file, bool check = true);
RunConfig parse_config_text(const std::string& text, bool check = true);

/// Validates a config in place: resolvable specs, positive parameters, and the tail check.
void validate(const RunConfig& cfg);

struct TailReport {
    double boundary_density = 0.0;  // largest Gibbs density at either end over the tilts the run can reach
    double x_at = 0.0;
    double sigma_at = 0.0;
};

/// Gibbs tails at the grid ends for the tilts lambda(l) over the path range, with a margin for tau l'.
TailReport tail_check(const RunConfig& cfg);
inline constexpr double kTailTolerance = 1e-14;

/// Resolved config with every key explicit, in INI form.
std::string echo_config(const RunConfig& cfg);

}  // namespace cfpk
