#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cfpk/core.hpp"

namespace cfpk {

struct GibbsState {
    double sigma = 0.0;
    double nu = 1.0;
    double logZ = 0.0;
    double Z = 1.0;
    Density density;
    std::vector<double> log_density;
    double mean = 0.0;
    double variance = 0.0;
};

/// Density proportional to exp(-(H(x) - sigma x)/nu^2) on the grid.
GibbsState gibbs(double sigma, double nu, const Potential& pot, const Grid& grid);

struct LambdaResult {
    double lambda = 0.0;
    GibbsState state;
    int iterations = 0;
    bool used_bisection = false;
};

/// Solves M1(gibbs(lambda)) = ell by safeguarded Newton with derivative Var/nu^2.
LambdaResult lambda_of_ell(double ell, double nu, const Potential& pot, const Grid& grid, double tol = 1e-10);

enum class LsiMethod { convex, holley_stroock };
std::string to_string(LsiMethod m);

struct LsiResult {
    double C_lsi = 0.0;
    LsiMethod method = LsiMethod::convex;
    double oscillation = 0.0;             // osc of H_sigma above its lower convex envelope
    double envelope_min_curvature = 0.0;  // smallest second difference of the envelope on the grid
};

/// Lower convex envelope of the sampled graph (x_i, f_i), evaluated at every x_i.
std::vector<double> lower_convex_envelope(const std::vector<double>& x, const std::vector<double>& f);

LsiResult lsi_constant(double sigma, double nu, const Potential& pot, const Grid& grid);

/// Number of solutions of H'(x) = sigma inside the grid, from the monotone pieces of H'.
int count_tilt_solutions(double sigma, const Potential& pot, const Grid& grid);

/// Largest barrier between a local minimum of H - sigma x and its global minimum (0 if unimodal).
double energy_barrier(double sigma, const Potential& pot, const Grid& grid);

struct LsiSample {
    double sigma = 0.0;
    LsiResult lsi;
};

struct LandscapeReport {
    double spinodal_measure = 0.0;
    std::vector<std::pair<double, double>> sigma_intervals;
    std::vector<double> sigma_samples;
    std::vector<double> barriers;
    std::vector<double> variances;
    double delta_h_star = 0.0;
    double c_var = 0.0;
    double C_var = 0.0;
    std::vector<LsiSample> lsi_samples;
};

LandscapeReport landscape(double nu, const Potential& pot, const Grid& grid, std::pair<double, double> sigma_range,
                          int n_sigma);

}  // namespace cfpk
