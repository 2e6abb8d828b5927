#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "cfpk/equilibrium.hpp"
#include "cfpk/functionals.hpp"
#include "cfpk/fpsolver.hpp"

using namespace cfpk;

namespace {

double max_variance_error(const FvRun& r, double v0) {
    double e = 0.0;
    for (const auto& rec : r.records) {
        const double var = rec.M2 - rec.M1 * rec.M1;
        e = std::max(e, std::abs(var - (1.0 + (v0 - 1.0) * std::exp(-2.0 * rec.t))));
    }
    return e;
}

}  // namespace

TEST_CASE("multiplier by quadrature") {
    const Grid g(-10.0, 10.0, 1024);
    const Density rho = gaussian_density(g, 0.3, 1.0);
    CHECK(sigma_of_state(rho, 0.0, quadratic_potential(2.0), constant_path(0.3), ModelParams(1.0, 1.0)) ==
          doctest::Approx(0.6).epsilon(1e-8));
    // tau l'(0) = 2 * (-0.3 * 2)
    const ConstraintPath e = exp_decay_path(0.5, 0.3, 2.0);
    CHECK(sigma_of_state(rho, 0.0, quadratic_potential(2.0), e, ModelParams(2.0, 1.0)) ==
          doctest::Approx(0.6 - 1.2).epsilon(1e-8));
    // symmetric density in a symmetric potential
    const Density sym = gaussian_density(g, 0.0, 0.7);
    CHECK(std::abs(sigma_of_state(sym, 0.0, doublewell_potential(), constant_path(0.0), ModelParams(1.0, 0.5))) <
          1e-12);
}

TEST_CASE("discrete multiplier") {
    const Grid g(-8.0, 8.0, 1024);
    const Potential d = doublewell_potential();
    const ModelParams p(1.0, 0.6);
    SUBCASE("Gibbs states have zero flux at their own tilt") {
        for (double ell : {-0.5, 0.2, 1.1}) {
            const LambdaResult lr = lambda_of_ell(ell, p.nu, d, g);
            CHECK(discrete_sigma(lr.state.density, 0.0, d, constant_path(ell), p) ==
                  doctest::Approx(lr.lambda).epsilon(1e-10));
            double jmax = 0.0;
            for (double j : fluxes(lr.state.density, lr.lambda, d, p)) jmax = std::max(jmax, std::abs(j));
            CHECK(jmax < 1e-12);
            CHECK(std::abs(discrete_dissipation(lr.state.density, lr.lambda, d, p)) < 1e-12);
        }
    }
    SUBCASE("agrees with quadrature up to discretization error") {
        const Density rho = gaussian_density(g, 0.4, 0.9);
        const ConstraintPath e = exp_decay_path(0.0, 0.4, 1.0);
        const double a = discrete_sigma(rho, 0.0, d, e, p);
        const double b = sigma_of_state(rho, 0.0, d, e, p);
        CHECK(std::abs(a - b) < 10.0 * g.dx() * g.dx() * (1.0 + std::abs(b)));
    }
    SUBCASE("dissipation is nonnegative") {
        std::mt19937_64 rng(17);
        std::uniform_real_distribution<double> m(-2.0, 2.0), v(0.2, 1.5), s(-2.0, 2.0);
        for (int k = 0; k < 10; ++k) {
            const Density rho = normalize(gaussian_density(g, m(rng), v(rng)));
            CHECK(discrete_dissipation(rho, s(rng), d, p) >= 0.0);
            CHECK(discrete_dissipation(rho, s(rng), d, p, FluxScheme::central) >= -1e-6);
        }
    }
}

TEST_CASE("solver configuration") {
    const Grid g(-5.0, 5.0, 200);
    const ModelParams p(1.0, 1.0);
    SolverConfig c;
    c.scheme = FluxScheme::central;
    c.dt = 1e-2;
    CHECK_THROWS_AS(c.validate(g, p), std::invalid_argument);
    c.dt = 0.4 * g.dx() * g.dx();
    CHECK_NOTHROW(c.validate(g, p));
    c.dt = -1.0;
    c.scheme = FluxScheme::chang_cooper;
    CHECK_THROWS(c.validate(g, p));

    CHECK(flux_scheme_from_string(to_string(FluxScheme::central)) == FluxScheme::central);
    CHECK(time_scheme_from_string(to_string(TimeScheme::backward_euler)) == TimeScheme::backward_euler);
    CHECK(multiplier_rule_from_string(to_string(MultiplierRule::quadrature)) == MultiplierRule::quadrature);
    CHECK_THROWS(flux_scheme_from_string("upwind"));
}

TEST_CASE("stationary step") {
    const Grid g(-8.0, 8.0, 1024);
    const Potential d = doublewell_potential();
    const ModelParams p(1.0, 0.7);
    const LambdaResult lr = lambda_of_ell(0.4, p.nu, d, g);
    const StepResult s = step(lr.state.density, 0.0, SolverConfig{}, d, constant_path(0.4), p);
    double l1 = 0.0;
    for (int i = 0; i < g.n; ++i) l1 += std::abs(s.rho.values[i] - lr.state.density.values[i]) * g.dx();
    CHECK(l1 <= 1e-10);
    CHECK(s.sigma == doctest::Approx(lr.lambda).epsilon(1e-10));

    RunOptions o;
    o.record_every = 5;
    const FvRun r = run(lr.state.density, constant_path(0.4), SolverConfig{}, d, p, 0.5, o);
    CHECK(r.max_eb_residual <= 1e-8);
    CHECK(r.max_constraint_error <= 1e-12);
    for (const auto& rec : r.records) CHECK(std::abs(rec.Hrel_quasistatic) < 1e-10);
}

TEST_CASE("Gaussian variance relaxation") {
    // quadratic potential, nu = tau = 1: Var' = 2 - 2 Var
    const Grid g(-10.0, 10.0, 1024);
    const Potential q = quadratic_potential(1.0);
    const ModelParams p(1.0, 1.0);
    const Density rho0 = gaussian_density(g, 0.5, 2.25);
    RunOptions o;
    o.relative_entropies = false;
    o.record_every = 10;

    SolverConfig c;
    const FvRun bdf = run(rho0, constant_path(0.5), c, q, p, 1.0, o);
    CHECK(max_variance_error(bdf, 2.25) < 1e-4);
    CHECK(bdf.max_constraint_error < 1e-10);
    CHECK(bdf.max_renorm_drift < 1e-10);
    for (const auto& rec : bdf.records) CHECK(rec.sigma == doctest::Approx(0.5).epsilon(1e-6));

    c.dt = 1e-2;
    const double err_bdf = max_variance_error(run(rho0, constant_path(0.5), c, q, p, 1.0, o), 2.25);
    c.time_scheme = TimeScheme::backward_euler;
    const double err_be = max_variance_error(run(rho0, constant_path(0.5), c, q, p, 1.0, o), 2.25);
    CHECK(err_bdf < err_be);
}

TEST_CASE("moving constraint") {
    const Grid g(-10.0, 10.0, 1024);
    const Potential q = quadratic_potential(1.0);
    const ModelParams p(1.0, 1.0);
    const ConstraintPath path = exp_decay_path(0.5, 0.3, 1.0);
    const Density rho0 = gaussian_density(g, 0.8, 2.25);
    RunOptions o;
    o.relative_entropies = false;
    o.record_every = 100;
    auto eb = [&](double dt) {
        SolverConfig c;
        c.dt = dt;
        const FvRun r = run(rho0, path, c, q, p, 1.0, o);
        CHECK(r.max_constraint_error < 1e-10);
        for (const auto& rec : r.records) CHECK(std::abs(rec.M1 - path.ell(rec.t)) < 1e-10);
        return r.max_eb_residual;
    };
    const double coarse = eb(2e-3), fine = eb(1e-3);
    CHECK(fine < 1e-4);
    CHECK(coarse / fine >= 3.0);
}

TEST_CASE("positivity from a bimodal start") {
    const Grid g(-6.0, 6.0, 512);
    const Potential d = doublewell_potential();
    const ModelParams p(1.0, 0.5);
    std::vector<double> v(g.n);
    for (int i = 0; i < g.n; ++i)
        v[i] = 0.7 * std::exp(-8.0 * (g.x(i) + 1.7) * (g.x(i) + 1.7)) + 0.3 * std::exp(-8.0 * (g.x(i) - 1.7) * (g.x(i) - 1.7));
    const Density rho0 = project_mean(normalize(Density(g, v)), 0.0);
    RunOptions o;
    o.keep_states = true;
    o.record_every = 20;
    SolverConfig c;
    c.dt = 5e-3;
    const FvRun r = run(rho0, constant_path(0.0), c, d, p, 2.0, o);
    for (const auto& s : r.states)
        for (double x : s.values) CHECK(x >= 0.0);
    CHECK(r.max_constraint_error < 1e-10);
    // free energy does not increase along a constant constraint
    for (std::size_t k = 1; k < r.records.size(); ++k) CHECK(r.records[k].F <= r.records[k - 1].F + 1e-10);
}
