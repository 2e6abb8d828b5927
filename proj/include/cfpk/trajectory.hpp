#pragma once

#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace cfpk {

/// One row of per-step diagnostics. Columns not produced by a solver stay NaN.
struct TrajectoryRecord {
    static constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();

    double t = 0.0;
    double sigma = 0.0;
    double ell = 0.0;
    double M1 = 0.0;
    double M2 = 0.0;
    double F = 0.0;
    double S = 0.0;
    double E = 0.0;
    double W2sq_step = 0.0;
    double kkt_residual = 0.0;
    double D = kUnset;
    double eb_residual = kUnset;
    double Hrel_quasistatic = kUnset;
    double Hrel_star = kUnset;
};

const std::vector<std::string>& jko_columns();
const std::vector<std::string>& fv_columns();

/// Formats a double with 17 significant digits.
std::string format_number(double v);

void write_csv(std::ostream& os, const std::vector<TrajectoryRecord>& rows, const std::vector<std::string>& columns);

}  // namespace cfpk
