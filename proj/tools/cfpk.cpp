#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "cfpk/config.hpp"
#include "cfpk/experiments.hpp"

namespace {

struct Flags {
    std::string config;
    std::string out;
    std::string solver;
    std::string potential;
    std::string path;
    std::optional<std::uint64_t> seed;
    std::optional<double> ell;
    std::optional<double> nu;
    std::optional<double> T;
};

void add_flags(CLI::App* sub, Flags& f) {
    sub->add_option("--config", f.config, "INI config file")->check(CLI::ExistingFile);
    sub->add_option("--out", f.out, "output directory");
    sub->add_option("--solver", f.solver, "fv, jko or both")->check(CLI::IsMember({"fv", "jko", "both"}));
    sub->add_option("--seed", f.seed, "seed for random test densities");
    sub->add_option("--potential", f.potential, "quadratic:k, doublewell or polynomial:c0,c1,...;c_minus,c_plus");
    sub->add_option("--path", f.path, "constant:l, exp_decay:l_star,A,kappa or tanh_ramp:l0,l1,t0,w");
    sub->add_option("--ell", f.ell, "constant constraint value (replaces the path)");
    sub->add_option("--nu", f.nu, "noise level");
    sub->add_option("--T", f.T, "final time");
}

cfpk::RunConfig resolve(const Flags& f, cfpk::Experiment kind) {
    cfpk::RunConfig cfg = f.config.empty() ? cfpk::RunConfig{} : cfpk::parse_config(f.config, false);
    cfg.experiment = kind;
    if (!f.out.empty()) cfg.out = f.out;
    if (!f.solver.empty()) cfg.solver = cfpk::solver_choice_from_string(f.solver);
    if (!f.potential.empty()) cfg.potential = f.potential;
    if (!f.path.empty()) cfg.path = f.path;
    if (f.ell) cfg.path = "constant:" + fmt::format("{}", *f.ell);
    if (f.seed) cfg.seed = *f.seed;
    if (f.nu) cfg.nu = *f.nu;
    if (f.T) cfg.T = *f.T;
    cfpk::validate(cfg);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Moment-constrained Fokker-Planck toolkit"};
    app.set_version_flag("--version", std::string(cfpk::kVersion));
    app.require_subcommand(1);
    Flags flags;
    const std::pair<const char*, cfpk::Experiment> commands[] = {
        {"simulate", cfpk::Experiment::simulate},       {"equilibrium", cfpk::Experiment::equilibrium},
        {"landscape", cfpk::Experiment::landscape},     {"decay", cfpk::Experiment::decay},
        {"kramers-sweep", cfpk::Experiment::kramers_sweep}, {"verify", cfpk::Experiment::verify}};
    std::optional<cfpk::Experiment> chosen;
    for (const auto& [name, kind] : commands) {
        CLI::App* sub = app.add_subcommand(name, std::string("run the ") + name + " experiment");
        add_flags(sub, flags);
        const cfpk::Experiment k = kind;
        sub->callback([&chosen, k] { chosen = k; });
    }
    CLI11_PARSE(app, argc, argv);

    cfpk::RunConfig cfg;
    try {
        cfg = resolve(flags, *chosen);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }
    try {
        const cfpk::ExperimentOutput out = cfpk::run_experiment(cfg);
        if (!flags.out.empty() || !flags.config.empty()) cfpk::write_outputs(cfg, out, cfg.out);
        std::cout << out.message << "\n";
        for (const auto& c : out.contracts) {
            if (!c.enabled) std::cout << fmt::format("  {:<28} skipped ({})\n", c.name, c.note);
            else std::cout << fmt::format("  {:<28} {}  value {:.6g}  limit {:.6g}\n", c.name, c.pass ? "pass" : "FAIL",
                                          c.value, c.limit);
        }
        if (!out.ok()) {
            std::cerr << "contract failed: " << out.first_failure() << "\n";
            return 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
