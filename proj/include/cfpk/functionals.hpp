#pragma once

#include <functional>

#include "cfpk/core.hpp"

namespace cfpk {

struct EnergyBreakdown {
    double S = 0.0;      // integral of rho log rho
    double E = 0.0;      // integral of H rho
    double logZ0 = 0.0;  // log of the integral of exp(-H/nu^2)
    double F = 0.0;      // nu^2 S + E + nu^2 logZ0
};

/// log of the grid quadrature of exp(-(H - sigma x)/nu^2), computed with a max shift.
double log_partition(double sigma, double nu, const Potential& pot, const Grid& grid);

double entropy(const Density& rho);
double potential_energy(const Density& rho, const Potential& pot);
EnergyBreakdown free_energy(const Density& rho, const Potential& pot, const ModelParams& params);

/// Integral of rho log(rho/gamma). Throws std::domain_error if gamma vanishes where rho does not.
double relative_entropy(const Density& rho, const Density& gamma);
/// Same, with log gamma given cellwise.
double relative_entropy_log(const Density& rho, const std::vector<double>& log_gamma);

/// Integral of |nu^2 d/dx log rho + H' - sigma|^2 rho with centered differences of log rho.
double dissipation(const Density& rho, double sigma, const Potential& pot, const ModelParams& params);

struct CkpResult {
    double l1 = 0.0;
    double bound = 0.0;
};
CkpResult ckp_l1_bound(const Density& rho, const Density& gamma);

struct WeightedCkpResult {
    double weighted_l1 = 0.0;
    double Cw = 1.0;
    double bound = 0.0;
};
WeightedCkpResult weighted_ckp(const Density& rho, const Density& gamma, const std::function<double(double)>& w);

/// The weight min{c-, c+}/2 (1 + |x|).
std::function<double(double)> growth_weight(const Potential& pot);

}  // namespace cfpk
