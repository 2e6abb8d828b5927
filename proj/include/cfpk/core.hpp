#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace cfpk {

/// Densities below this are treated as zero inside logarithms.
inline constexpr double kDensityFloor = 1e-300;

struct Grid {
    double x_min = 0.0;
    double x_max = 1.0;
    int n = 8;

    Grid() = default;
    Grid(double x_min, double x_max, int n);

    double dx() const { return (x_max - x_min) / n; }
    double x(int i) const { return x_min + (i + 0.5) * dx(); }
    double edge(int i) const { return x_min + i * dx(); }
    std::vector<double> centers() const;
};

bool operator==(const Grid& a, const Grid& b);

struct Density {
    Grid grid;
    std::vector<double> values;

    Density() = default;
    Density(Grid g, std::vector<double> v);

    double mass() const;
    std::size_t size() const { return values.size(); }
    double operator[](std::size_t i) const { return values[i]; }
};

/// Midpoint sum over cells: dx * sum f_i.
double integrate(const std::vector<double>& f, const Grid& grid);

struct Moments {
    double M1 = 0.0;
    double M2 = 0.0;
    double Var = 0.0;
};

Moments moments(const Density& rho);
Density normalize(const Density& rho);

/// Samples f at cell centers and normalizes.
Density sample_density(const Grid& grid, const std::function<double(double)>& f);

/// Normal density N(mean, var) sampled on the grid, normalized by quadrature.
Density gaussian_density(const Grid& grid, double mean, double var);

/// Translates rho by a, conservatively remapped onto the same grid.
Density shift_density(const Density& rho, double a);

/// Translates rho so that its first moment equals target (secant on the shift).
Density project_mean(const Density& rho, double target, double tol = 1e-13);

struct Potential {
    std::string name;
    std::function<double(double)> h;
    std::function<double(double)> h1;
    std::function<double(double)> h2;
    std::function<double(double)> h3;
    std::optional<double> convexity_lower_bound;
    double c_minus = 1.0;
    double c_plus = 1.0;

    double c_min() const { return c_minus < c_plus ? c_minus : c_plus; }
};

/// H(x) = k x^2 / 2.
Potential quadratic_potential(double k);
/// H(x) = (sqrt(x^2+1) - 2)^2.
Potential doublewell_potential();
/// H(x) = sum_j coeffs[j] x^j. Degree above two needs explicit growth constants.
Potential polynomial_potential(std::vector<double> coeffs,
                               std::optional<std::pair<double, double>> growth = std::nullopt);

/// Checks H >= 0, the derivative consistency and the convexity bound on the grid.
void validate_potential(const Potential& pot, const Grid& grid);

struct ConstraintPath {
    std::string name;
    std::function<double(double)> ell;
    std::function<double(double)> ell_dot;
    std::function<double(double)> ell_ddot;  // empty when the path does not provide it
    double ell_star = 0.0;
    std::optional<double> kappa;
    std::optional<double> L0;

    bool is_constant() const { return name == "constant"; }
};

ConstraintPath constant_path(double l);
/// ell(t) = l_star + A exp(-kappa t).
ConstraintPath exp_decay_path(double l_star, double A, double kappa);
/// ell(t) = l0 + (l1 - l0) (1 + tanh((t - t0)/w)) / 2.
ConstraintPath tanh_ramp_path(double l0, double l1, double t0, double w);

struct ModelParams {
    double tau = 1.0;
    double nu = 1.0;

    ModelParams() = default;
    ModelParams(double tau, double nu);
};

}  // namespace cfpk
