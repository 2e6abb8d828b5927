#pragma once

#include <functional>
#include <vector>

#include "cfpk/core.hpp"
#include "cfpk/trajectory.hpp"

namespace cfpk {

struct QuantileRep {
    std::vector<double> s_nodes;  // (j + 1/2)/m
    std::vector<double> x_of_s;   // inverse CDF at s_nodes
};

/// Quantile samples of the piecewise-constant density; m >= 64.
QuantileRep to_quantile(const Density& rho, int m);
/// Density whose quantile function interpolates the samples, remapped onto the grid.
Density from_quantile(const QuantileRep& q, const Grid& grid);

/// Equal-weight formula sqrt(sum_j (X0(s_j) - X1(s_j))^2 / m).
double w2(const QuantileRep& a, const QuantileRep& b);
/// Quantile-sampled distance with m levels.
double w2(const Density& a, const Density& b, int m);
/// Exact distance between the piecewise-constant densities.
double w2(const Density& a, const Density& b);

/// Piecewise-constant measure on consecutive intervals [edges[i], edges[i+1]] with masses mass[i].
struct CellMeasure {
    std::vector<double> edges;
    std::vector<double> mass;

    std::size_t cells() const { return mass.size(); }
    double width(std::size_t i) const { return edges[i + 1] - edges[i]; }
    double midpoint(std::size_t i) const { return 0.5 * (edges[i] + edges[i + 1]); }
    double mean() const;
    double second_moment() const;
    double entropy() const;  // integral of rho log rho
    double potential_energy(const Potential& pot) const;
};

/// Cells of the grid; masses below mass_floor are raised to it and the total renormalized.
CellMeasure cells_of(const Density& rho, double mass_floor = 0.0);
/// Conservative overlap remap onto the grid.
Density to_grid(const CellMeasure& cells, const Grid& grid);

/// Exact squared distance between two piecewise-constant measures (merged quantile knots).
double w2_sq(const CellMeasure& a, const CellMeasure& b);
/// Squared cost of the cellwise affine coupling between measures with identical masses.
double coupled_w2_sq(const CellMeasure& from, const CellMeasure& to);

struct JkoOptions {
    double tol = 1e-9;  // scaled KKT residual (displacement units)
    int max_iter = 200;
    double mass_floor = 1e-250;
};

struct JkoStepResult {
    Density rho_next;
    double sigma_k = 0.0;
    double w2_sq = 0.0;
    double free_energy = 0.0;
    int inner_iterations = 0;
    double kkt_residual = 0.0;
    CellMeasure cells_next;
};

/// One constrained minimizing-movement step from a cell measure whose outer edges are the grid walls.
JkoStepResult jko_step(const CellMeasure& prev, const Grid& grid, double ell_k, double h, const Potential& pot,
                       const ModelParams& params, const JkoOptions& opts = {});
JkoStepResult jko_step(const Density& rho_prev, double ell_k, double h, const Potential& pot,
                       const ModelParams& params, const JkoOptions& opts = {});

struct JkoRun {
    std::vector<TrajectoryRecord> records;  // records[0] is the (projected) initial state
    std::vector<CellMeasure> states;        // filled when keep_states is set
    double h = 0.0;
    double sum_w2_sq = 0.0;
    double max_M2 = 0.0;
    double max_abs_sigma = 0.0;
};

/// ceil(T/h) steps. The initial datum is mean-shifted onto the constraint if needed.
JkoRun jko_run(const Density& rho0, const ConstraintPath& path, double h, double T, const Potential& pot,
               const ModelParams& params, const JkoOptions& opts = {}, bool keep_states = false);

struct SigmaSeries {
    double h = 0.0;
    std::vector<double> times;   // k h, k = 0..N
    std::vector<double> values;  // sigma_h^k
    double max_increment_rate = 0.0;  // max_k |sigma^k - sigma^{k-1}| / h over k >= 2
    double sup_gap = 0.0;             // sup |sigma_h - linear interpolant|

    /// Piecewise constant: sigma^k on ((k-1)h, kh].
    double piecewise(double t) const;
    /// Linear interpolation between (kh, sigma^k).
    double linear(double t) const;
};

/// Records from jko_run with h; the k = 0 record carries the initial multiplier.
SigmaSeries discrete_sigma_series(const std::vector<TrajectoryRecord>& records, double h);

struct TestFunction {
    std::function<double(double)> f;
    std::function<double(double)> d1;
    std::function<double(double)> d2;
    double sup_d2 = 0.0;
};

struct WeakFormReport {
    // |tau (<zeta, next> - <zeta, prev>)/h + <(H' - sigma) zeta' - nu^2 zeta'', next> + nu^2 [zeta' rho]_walls|
    double residual = 0.0;
    double bound = 0.0;     // tau sup|zeta''| / 2 * W2^2 / h
    double w2_sq = 0.0;
    // Defect allowed by an inexact inner solve: 2 tau/h * kkt * sum_i c_i |zeta'(X_i)|.
    double solver_allowance = 0.0;

    bool holds() const { return residual <= bound + solver_allowance + 1e-12; }
};

/// Weak-form consistency of one step; prev and next must carry the same masses.
WeakFormReport weak_form_residual(const CellMeasure& prev, const CellMeasure& next, double sigma_k, double h,
                                  const TestFunction& zeta, const Potential& pot, const ModelParams& params,
                                  double kkt_residual = 0.0);

}  // namespace cfpk
