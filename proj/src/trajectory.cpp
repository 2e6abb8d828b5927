#include "cfpk/trajectory.hpp"

#include <ostream>
#include <stdexcept>

#include <fmt/format.h>

namespace cfpk {

const std::vector<std::string>& jko_columns() {
    static const std::vector<std::string> cols{"t", "sigma", "ell", "M1", "M2", "F", "S", "E", "W2sq_step", "kkt_residual"};
    return cols;
}

const std::vector<std::string>& fv_columns() {
    static const std::vector<std::string> cols{"t",         "sigma",        "ell", "M1",          "M2",
                                               "F",         "S",            "E",   "W2sq_step",   "kkt_residual",
                                               "D",         "eb_residual",  "Hrel_quasistatic", "Hrel_star"};
    return cols;
}

std::string format_number(double v) { return fmt::format("{:.17g}", v); }

namespace {

double column(const TrajectoryRecord& r, const std::string& name) {
    if (name == "t") return r.t;
    if (name == "sigma") return r.sigma;
    if (name == "ell") return r.ell;
    if (name == "M1") return r.M1;
    if (name == "M2") return r.M2;
    if (name == "F") return r.F;
    if (name == "S") return r.S;
    if (name == "E") return r.E;
    if (name == "W2sq_step") return r.W2sq_step;
    if (name == "kkt_residual") return r.kkt_residual;
    if (name == "D") return r.D;
    if (name == "eb_residual") return r.eb_residual;
    if (name == "Hrel_quasistatic") return r.Hrel_quasistatic;
    if (name == "Hrel_star") return r.Hrel_star;
    throw std::invalid_argument("unknown trajectory column " + name);
}

}  // namespace

void write_csv(std::ostream& os, const std::vector<TrajectoryRecord>& rows, const std::vector<std::string>& columns) {
    for (std::size_t j = 0; j < columns.size(); ++j) os << (j ? "," : "") << columns[j];
    os << '\n';
    for (const auto& r : rows) {
        for (std::size_t j = 0; j < columns.size(); ++j) os << (j ? "," : "") << format_number(column(r, columns[j]));
        os << '\n';
    }
}

}  // namespace cfpk
