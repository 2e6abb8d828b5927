#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "cfpk/config.hpp"
#include "cfpk/experiments.hpp"

using namespace cfpk;

namespace {

std::string error_of(const std::string& text) {
    try {
        parse_config_text(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

int tool(const std::string& args) {
    const std::string cmd = std::string(CFPK_TOOL_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("minimal config takes the defaults") {
    const RunConfig c = parse_config_text("[model]\npotential = quadratic:1\n");
    CHECK(c.n == 1024);
    CHECK(c.dt == 1e-3);
    CHECK(c.x_min == -10.0);
    CHECK(c.x_max == 10.0);
    CHECK(c.solver == SolverChoice::fv);
    CHECK(c.experiment == Experiment::simulate);
    CHECK(c.nu_list == std::vector<double>{0.8, 0.6, 0.5});
}

TEST_CASE("config parsing") {
    const RunConfig c = parse_config_text(
        "# comment\n[model]\npotential = doublewell\npath = exp_decay:0.5,0.3,2\nnu = 0.7\n"
        "[grid]\nx_min = -8\nx_max = 8\nn = 512\n[solver]\nkind = both\ndt = 5e-4\n"
        "[experiment]\nkind = kramers-sweep\nnu_list = 0.9, 0.7\nseed = 42\n");
    CHECK(c.potential == "doublewell");
    CHECK(c.nu == 0.7);
    CHECK(c.n == 512);
    CHECK(c.solver == SolverChoice::both);
    CHECK(c.experiment == Experiment::kramers_sweep);
    CHECK(c.nu_list == std::vector<double>{0.9, 0.7});
    CHECK(c.seed == 42);
    CHECK(parse_path(c.path).ell_star == 0.5);
}

TEST_CASE("config errors") {
    SUBCASE("tail check names the boundary density") {
        const std::string e = error_of("[grid]\nx_min = -5\nx_max = 5\n");
        CHECK(e.find("grid too narrow") != std::string::npos);
        CHECK(e.find("boundary density") != std::string::npos);
        RunConfig c;
        c.x_min = -5.0;
        c.x_max = 5.0;
        const TailReport t = tail_check(c);
        CHECK(t.boundary_density > kTailTolerance);
        CHECK(std::abs(t.x_at) == doctest::Approx(5.0).epsilon(0.01));
        CHECK(tail_check(RunConfig{}).boundary_density < kTailTolerance);
    }
    SUBCASE("duplicate key reports its line") {
        const std::string e = error_of("[model]\nnu = 1\n\nnu = 2\n");
        CHECK(e.find("config line 4") != std::string::npos);
    }
    SUBCASE("unknown keys are listed") {
        const std::string e = error_of("[model]\nnu = 1\nfoo = 2\n[grid]\nbar = 3\n");
        CHECK(e.find("unknown config keys") != std::string::npos);
        CHECK(e.find("model.foo") != std::string::npos);
        CHECK(e.find("grid.bar") != std::string::npos);
    }
    SUBCASE("bad values") {
        CHECK_FALSE(error_of("[model]\nnu = -1\n").empty());
        CHECK_FALSE(error_of("[model]\npotential = sextic\n").empty());
        CHECK_FALSE(error_of("[model]\npath = constant:1,2\n").empty());
        CHECK_FALSE(error_of("[grid]\nn = 12.5\n").empty());
        CHECK_FALSE(error_of("[solver]\nkind = spectral\n").empty());
        CHECK_FALSE(error_of("[solver]\nscheme = central\n").empty());
    }
}

TEST_CASE("echoed config round trips") {
    RunConfig c;
    c.potential = "polynomial:0.5,0,-1,0,0.5;1,1";
    c.path = "tanh_ramp:0,0.5,1,0.25";
    c.nu = 0.8;
    c.dt = 2.5e-4;
    c.solver = SolverChoice::jko;
    c.nu_list = {1.0, 0.75};
    const std::string text = echo_config(c);
    const RunConfig back = parse_config_text(text);
    CHECK(echo_config(back) == text);
    CHECK(back.potential == c.potential);
    CHECK(back.dt == c.dt);
    CHECK(back.nu_list == c.nu_list);
}

TEST_CASE("potential and path specs") {
    CHECK(parse_potential("quadratic:2").h(1.0) == doctest::Approx(1.0));
    CHECK(parse_potential("quadratic{2}").h(1.0) == doctest::Approx(1.0));
    CHECK(parse_potential("doublewell").h(0.0) == doctest::Approx(1.0));
    CHECK(parse_path("constant:0.3").ell(5.0) == 0.3);
    CHECK(parse_path("exp_decay:0.5,0.3,2").ell(0.0) == doctest::Approx(0.8));
    CHECK(parse_potential("polynomial:0.5,0,-1,0,0.5;1,2").c_plus == 2.0);
    CHECK_THROWS_AS(parse_potential("polynomial:0.5,0,-1,0,0.5"), ConfigError);
    CHECK_THROWS_AS(parse_potential("quadratic:1;1,1"), ConfigError);
    CHECK_THROWS_AS(parse_potential("quadratic"), ConfigError);
}

TEST_CASE("experiments") {
    SUBCASE("equilibrium of the quadratic potential") {
        RunConfig c;
        c.experiment = Experiment::equilibrium;
        c.path = "constant:0.7";
        const ExperimentOutput out = run_experiment(c);
        CHECK(out.ok());
        CHECK(out.results["lambda"].get<double>() == doctest::Approx(0.7).epsilon(1e-9));
        CHECK(out.results["mean"].get<double>() == doctest::Approx(0.7).epsilon(1e-9));
    }
    SUBCASE("landscape of the doublewell") {
        RunConfig c;
        c.experiment = Experiment::landscape;
        c.potential = "doublewell";
        c.nu = 0.5;
        c.x_min = -6.0;
        c.x_max = 6.0;
        const ExperimentOutput out = run_experiment(c);
        CHECK(out.ok());
        CHECK(out.results["delta_h_star"].get<double>() == doctest::Approx(1.0).epsilon(1e-3));
        CHECK(out.results["sigma_intervals"].size() == 1);
    }
    SUBCASE("short simulation with both solvers") {
        RunConfig c;
        c.solver = SolverChoice::both;
        c.path = "constant:0.5";
        c.initial = "gaussian:0.8,2.25";
        c.T = 0.2;
        const ExperimentOutput out = run_experiment(c);
        CHECK(out.ok());
        CHECK(out.files.count("trajectory_fv.csv") == 1);
        CHECK(out.files.count("trajectory_jko.csv") == 1);
        CHECK(out.summary(c)["version"] == kVersion);
    }
}

TEST_CASE("command-line tool") {
    const auto dir = std::filesystem::temp_directory_path() / "cfpk_cli_test";
    std::filesystem::remove_all(dir);
    CHECK(tool("--version") == 0);
    CHECK(tool("equilibrium --ell 0.7") == 0);
    CHECK(tool("equilibrium --nu -1") == 2);
    CHECK(tool("simulate --T 0.05 --out " + (dir / "a").string()) == 0);
    CHECK(tool("simulate --T 0.05 --out " + (dir / "b").string()) == 0);
    CHECK(std::filesystem::exists(dir / "a" / "summary.json"));
    CHECK(std::filesystem::exists(dir / "a" / "config.ini"));
    CHECK(slurp(dir / "a" / "trajectory_fv.csv") == slurp(dir / "b" / "trajectory_fv.csv"));
    CHECK_FALSE(slurp(dir / "a" / "trajectory_fv.csv").empty());
    std::filesystem::remove_all(dir);
}
