#include "cfpk/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "cfpk/equilibrium.hpp"
#include "cfpk/longtime.hpp"
#include "cfpk/trajectory.hpp"

namespace cfpk {

namespace pt = boost::property_tree;

std::string to_string(Experiment e) {
    switch (e) {
        case Experiment::simulate: return "simulate";
        case Experiment::equilibrium: return "equilibrium";
        case Experiment::landscape: return "landscape";
        case Experiment::decay: return "decay";
        case Experiment::kramers_sweep: return "kramers-sweep";
        case Experiment::verify: return "verify";
    }
    return "unknown";
}

std::string to_string(SolverChoice s) {
    switch (s) {
        case SolverChoice::fv: return "fv";
        case SolverChoice::jko: return "jko";
        case SolverChoice::both: return "both";
    }
    return "unknown";
}

Experiment experiment_from_string(const std::string& s) {
    for (Experiment e : {Experiment::simulate, Experiment::equilibrium, Experiment::landscape, Experiment::decay,
                         Experiment::kramers_sweep, Experiment::verify})
        if (to_string(e) == s) return e;
    if (s == "kramers_sweep") return Experiment::kramers_sweep;
    throw ConfigError(fmt::format("unknown experiment '{}'", s));
}

SolverChoice solver_choice_from_string(const std::string& s) {
    for (SolverChoice c : {SolverChoice::fv, SolverChoice::jko, SolverChoice::both})
        if (to_string(c) == s) return c;
    throw ConfigError(fmt::format("unknown solver '{}' (expected fv, jko or both)", s));
}

namespace {

double to_double(const std::string& s, const std::string& what) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw ConfigError(fmt::format("{}: '{}' is not a number", what, s));
    }
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos != s.size() || !std::isfinite(v)) throw ConfigError(fmt::format("{}: '{}' is not a number", what, s));
    return v;
}

std::vector<double> to_list(const std::string& s, const std::string& what) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_double(item, what));
    return out;
}

// "name:a,b" or "name{a,b}" -> (name, [a, b])
std::pair<std::string, std::vector<double>> split_spec(std::string spec, const std::string& what) {
    spec.erase(std::remove_if(spec.begin(), spec.end(), [](unsigned char c) { return std::isspace(c); }), spec.end());
    std::string name = spec, args;
    if (auto p = spec.find(':'); p != std::string::npos) {
        name = spec.substr(0, p);
        args = spec.substr(p + 1);
    } else if (auto b = spec.find('{'); b != std::string::npos) {
        if (spec.back() != '}') throw ConfigError(fmt::format("{}: unbalanced braces in '{}'", what, spec));
        name = spec.substr(0, b);
        args = spec.substr(b + 1, spec.size() - b - 2);
    }
    return {name, args.empty() ? std::vector<double>{} : to_list(args, what)};
}

void expect_args(const std::string& what, const std::string& name, const std::vector<double>& a, std::size_t n) {
    if (a.size() != n)
        throw ConfigError(fmt::format("{} '{}' takes {} parameter(s), got {}", what, name, n, a.size()));
}

}  // namespace

Potential parse_potential(const std::string& spec) {
    std::string head = spec;
    std::optional<std::pair<double, double>> growth;
    if (auto semi = spec.find(';'); semi != std::string::npos) {
        head = spec.substr(0, semi);
        const std::vector<double> g = to_list(spec.substr(semi + 1), "potential growth constants");
        if (g.size() != 2) throw ConfigError("potential growth constants: expected c_minus,c_plus");
        growth = std::make_pair(g[0], g[1]);
    }
    const auto [name, a] = split_spec(head, "potential");
    if (growth && name != "polynomial") throw ConfigError("growth constants apply to polynomial potentials only");
    try {
        if (name == "quadratic") {
            expect_args("potential", name, a, 1);
            return quadratic_potential(a[0]);
        }
        if (name == "doublewell") {
            expect_args("potential", name, a, 0);
            return doublewell_potential();
        }
        if (name == "polynomial") {
            if (a.size() < 3) throw ConfigError("potential 'polynomial' needs at least 3 coefficients");
            return polynomial_potential(a, growth);
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    throw ConfigError(fmt::format("unknown potential '{}'", name));
}

ConstraintPath parse_path(const std::string& spec) {
    const auto [name, a] = split_spec(spec, "path");
    try {
        if (name == "constant") {
            expect_args("path", name, a, 1);
            return constant_path(a[0]);
        }
        if (name == "exp_decay") {
            expect_args("path", name, a, 3);
            return exp_decay_path(a[0], a[1], a[2]);
        }
        if (name == "tanh_ramp") {
            expect_args("path", name, a, 4);
            return tanh_ramp_path(a[0], a[1], a[2], a[3]);
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    throw ConfigError(fmt::format("unknown path '{}'", name));
}

Density initial_density(const RunConfig& cfg, const Potential& pot, const ConstraintPath& path) {
    const Grid g = cfg.grid();
    const double l0 = path.ell(0.0);
    const auto [name, a] = split_spec(cfg.initial, "initial");
    if (name == "gibbs") {
        expect_args("initial", name, a, 0);
        return lambda_of_ell(l0, cfg.nu, pot, g).state.density;
    }
    if (name == "gaussian") {
        expect_args("initial", name, a, 2);
        if (!(a[1] > 0.0)) throw ConfigError("initial 'gaussian': variance must be positive");
        return gaussian_density(g, a[0], a[1]);
    }
    if (name == "bimodal") {
        expect_args("initial", name, a, 0);
        return sweep_initial_density(pot, l0, cfg.nu, g);
    }
    throw ConfigError(fmt::format("unknown initial density '{}'", name));
}

SolverConfig RunConfig::solver_config() const {
    SolverConfig s;
    s.dt = dt;
    try {
        s.scheme = flux_scheme_from_string(scheme);
        s.time_scheme = time_scheme_from_string(time_scheme);
        s.multiplier = multiplier_rule_from_string(multiplier);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return s;
}

TailReport tail_check(const RunConfig& cfg) {
    const Potential pot = parse_potential(cfg.potential);
    const ConstraintPath path = parse_path(cfg.path);
    const Grid g = cfg.grid();
    double lo = path.ell_star, hi = path.ell_star, ldot = 0.0;
    const int m = 200;
    for (int i = 0; i <= m; ++i) {
        const double t = cfg.T * i / m;
        lo = std::min(lo, path.ell(t));
        hi = std::max(hi, path.ell(t));
        ldot = std::max(ldot, std::abs(path.ell_dot(t)));
    }
    std::vector<double> nus{cfg.nu};
    if (cfg.experiment == Experiment::kramers_sweep) nus = cfg.nu_list;
    TailReport rep;
    for (double nu : nus) {
        const double margin = cfg.tau * ldot;
        const double s_lo = lambda_of_ell(lo, nu, pot, g).lambda - margin;
        const double s_hi = lambda_of_ell(hi, nu, pot, g).lambda + margin;
        for (double s : {s_lo, s_hi}) {
            const GibbsState gs = gibbs(s, nu, pot, g);
            for (int i : {0, g.n - 1}) {
                if (gs.density.values[i] > rep.boundary_density) {
                    rep.boundary_density = gs.density.values[i];
                    rep.x_at = g.x(i);
                    rep.sigma_at = s;
                }
            }
        }
    }
    return rep;
}

void validate(const RunConfig& cfg) {
    if (!(cfg.tau > 0.0)) throw ConfigError("model.tau must be positive");
    if (!(cfg.nu > 0.0)) throw ConfigError("model.nu must be positive");
    if (!(cfg.x_max > cfg.x_min)) throw ConfigError("grid.x_max must exceed grid.x_min");
    if (cfg.n < 16) throw ConfigError("grid.n must be at least 16");
    if (!(cfg.dt > 0.0)) throw ConfigError("solver.dt must be positive");
    if (!(cfg.h > 0.0)) throw ConfigError("solver.h must be positive");
    if (!(cfg.T > 0.0)) throw ConfigError("solver.T must be positive");
    if (cfg.record_every < 1) throw ConfigError("solver.record_every must be at least 1");
    if (cfg.nu_list.empty()) throw ConfigError("experiment.nu_list must not be empty");
    for (double v : cfg.nu_list)
        if (!(v > 0.0)) throw ConfigError("experiment.nu_list entries must be positive");
    if (!(cfg.T_max > 0.0)) throw ConfigError("experiment.T_max must be positive");
    const Potential pot = parse_potential(cfg.potential);
    parse_path(cfg.path);
    const SolverConfig sc = cfg.solver_config();
    try {
        validate_potential(pot, cfg.grid());
        sc.validate(cfg.grid(), cfg.params());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    initial_density(cfg, pot, parse_path(cfg.path));
    const TailReport tail = tail_check(cfg);
    if (!(tail.boundary_density < kTailTolerance))
        throw ConfigError(fmt::format(
            "grid too narrow: boundary density gamma(x = {}) = {:.3g} at tilt {:.6g} exceeds {:.0e}", tail.x_at,
            tail.boundary_density, tail.sigma_at, kTailTolerance));
}

namespace {

using Setter = void (*)(RunConfig&, const std::string&);

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"model.potential", [](RunConfig& c, const std::string& v) { c.potential = v; }},
        {"model.path", [](RunConfig& c, const std::string& v) { c.path = v; }},
        {"model.tau", [](RunConfig& c, const std::string& v) { c.tau = to_double(v, "model.tau"); }},
        {"model.nu", [](RunConfig& c, const std::string& v) { c.nu = to_double(v, "model.nu"); }},
        {"grid.x_min", [](RunConfig& c, const std::string& v) { c.x_min = to_double(v, "grid.x_min"); }},
        {"grid.x_max", [](RunConfig& c, const std::string& v) { c.x_max = to_double(v, "grid.x_max"); }},
        {"grid.n",
         [](RunConfig& c, const std::string& v) {
             const double n = to_double(v, "grid.n");
             if (n != std::floor(n) || n > 1 << 24) throw ConfigError("grid.n must be an integer");
             c.n = static_cast<int>(n);
         }},
        {"solver.kind", [](RunConfig& c, const std::string& v) { c.solver = solver_choice_from_string(v); }},
        {"solver.dt", [](RunConfig& c, const std::string& v) { c.dt = to_double(v, "solver.dt"); }},
        {"solver.h", [](RunConfig& c, const std::string& v) { c.h = to_double(v, "solver.h"); }},
        {"solver.T", [](RunConfig& c, const std::string& v) { c.T = to_double(v, "solver.T"); }},
        {"solver.scheme", [](RunConfig& c, const std::string& v) { c.scheme = v; }},
        {"solver.time_scheme", [](RunConfig& c, const std::string& v) { c.time_scheme = v; }},
        {"solver.multiplier", [](RunConfig& c, const std::string& v) { c.multiplier = v; }},
        {"solver.record_every",
         [](RunConfig& c, const std::string& v) {
             const double n = to_double(v, "solver.record_every");
             if (n != std::floor(n) || n > 1e9) throw ConfigError("solver.record_every must be an integer");
             c.record_every = static_cast<int>(n);
         }},
        {"initial.density", [](RunConfig& c, const std::string& v) { c.initial = v; }},
        {"experiment.kind", [](RunConfig& c, const std::string& v) { c.experiment = experiment_from_string(v); }},
        {"experiment.out", [](RunConfig& c, const std::string& v) { c.out = v; }},
        {"experiment.seed",
         [](RunConfig& c, const std::string& v) {
             try {
                 std::size_t pos = 0;
                 c.seed = std::stoull(v, &pos);
                 if (pos != v.size()) throw std::invalid_argument(v);
             } catch (const std::exception&) {
                 throw ConfigError(fmt::format("experiment.seed: '{}' is not a non-negative integer", v));
             }
         }},
        {"experiment.nu_list", [](RunConfig& c, const std::string& v) { c.nu_list = to_list(v, "experiment.nu_list"); }},
        {"experiment.T_max", [](RunConfig& c, const std::string& v) { c.T_max = to_double(v, "experiment.T_max"); }},
        {"experiment.time_budget",
         [](RunConfig& c, const std::string& v) { c.time_budget = to_double(v, "experiment.time_budget"); }},
    };
    return table;
}

RunConfig from_tree(const pt::ptree& tree) {
    RunConfig cfg;
    std::vector<std::string> unknown;
    for (const auto& [section, body] : tree) {
        if (body.empty()) {
            if (!body.data().empty()) unknown.push_back(section);
            continue;
        }
        for (const auto& [key, value] : body) {
            const std::string full = section + "." + key;
            auto it = setters().find(full);
            if (it == setters().end()) unknown.push_back(full);
            else it->second(cfg, value.data());
        }
    }
    if (!unknown.empty()) {
        std::string list;
        for (const auto& k : unknown) list += (list.empty() ? "" : ", ") + k;
        throw ConfigError(fmt::format("unknown config keys: {}", list));
    }
    return cfg;
}

}  // namespace

RunConfig parse_config_text(const std::string& text, bool check) {
    // '#' comment lines become blank so that line numbers in errors stay meaningful.
    std::istringstream raw(text);
    std::string line, cleaned;
    while (std::getline(raw, line)) {
        const auto p = line.find_first_not_of(" \t");
        cleaned += (p != std::string::npos && line[p] == '#') ? "" : line;
        cleaned += '\n';
    }
    std::istringstream is(cleaned);
    pt::ptree tree;
    try {
        pt::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(fmt::format("config line {}: {}", e.line(), e.message()));
    }
    RunConfig cfg = from_tree(tree);
    if (check) validate(cfg);
    return cfg;
}

RunConfig parse_config(const std::string& file, bool check) {
    std::ifstream in(file);
    if (!in) throw ConfigError(fmt::format("cannot open config file '{}'", file));
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), check);
}

std::string echo_config(const RunConfig& c) {
    auto num = [](double v) { return format_number(v); };
    std::string nus;
    for (double v : c.nu_list) nus += (nus.empty() ? "" : ",") + num(v);
    std::string s;
    s += "[model]\n";
    s += fmt::format("potential = {}\npath = {}\ntau = {}\nnu = {}\n", c.potential, c.path, num(c.tau), num(c.nu));
    s += "\n[grid]\n";
    s += fmt::format("x_min = {}\nx_max = {}\nn = {}\n", num(c.x_min), num(c.x_max), c.n);
    s += "\n[solver]\n";
    s += fmt::format("kind = {}\ndt = {}\nh = {}\nT = {}\nscheme = {}\ntime_scheme = {}\nmultiplier = {}\n"
                     "record_every = {}\n",
                     to_string(c.solver), num(c.dt), num(c.h), num(c.T), c.scheme, c.time_scheme, c.multiplier,
                     c.record_every);
    s += "\n[initial]\n";
    s += fmt::format("density = {}\n", c.initial);
    s += "\n[experiment]\n";
    s += fmt::format("kind = {}\nout = {}\nseed = {}\nnu_list = {}\nT_max = {}\ntime_budget = {}\n",
                     to_string(c.experiment), c.out, c.seed, nus, num(c.T_max), num(c.time_budget));
    return s;
}

}  // namespace cfpk
