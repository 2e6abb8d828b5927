#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "cfpk/equilibrium.hpp"
#include "cfpk/functionals.hpp"

using namespace cfpk;

namespace {

Density mixture(std::mt19937_64& rng, const Grid& g) {
    std::uniform_real_distribution<double> m(-2.0, 2.0), v(0.2, 1.5), w(0.2, 1.0);
    std::vector<double> vals(g.n, 0.0);
    for (int k = 0; k < 3; ++k) {
        const Density d = gaussian_density(g, m(rng), v(rng));
        const double wk = w(rng);
        for (int i = 0; i < g.n; ++i) vals[i] += wk * d.values[i];
    }
    return normalize(Density(g, vals));
}

double Phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

TEST_CASE("log partition matches a direct sum") {
    const Grid g(-8.0, 8.0, 700);
    const Potential d = doublewell_potential();
    for (double s : {-1.0, 0.0, 0.4}) {
        double z = 0.0;
        for (int i = 0; i < g.n; ++i) z += std::exp(-(d.h(g.x(i)) - s * g.x(i)) / 0.49) * g.dx();
        CHECK(log_partition(s, 0.7, d, g) == doctest::Approx(std::log(z)).epsilon(1e-12));
    }
    // large tilts stay finite thanks to the shift
    CHECK(std::isfinite(log_partition(40.0, 0.1, d, g)));
}

TEST_CASE("free energy of Gibbs states and Gaussians") {
    const Grid g(-12.0, 12.0, 2048);
    SUBCASE("unconstrained minimizer has zero free energy") {
        for (const Potential& pot : {quadratic_potential(1.0), doublewell_potential()}) {
            for (double nu : {0.5, 1.0, 2.0}) {
                const Density gamma = gibbs(0.0, nu, pot, g).density;
                CHECK(std::abs(free_energy(gamma, pot, ModelParams(1.0, nu)).F) < 1e-8);
            }
        }
    }
    SUBCASE("standard Gaussian pieces") {
        const Potential q = quadratic_potential(1.0);
        const Density rho = gaussian_density(g, 0.0, 1.0);
        const EnergyBreakdown e = free_energy(rho, q, ModelParams(1.0, 1.0));
        CHECK(e.S == doctest::Approx(-0.5 * std::log(2.0 * M_PI * M_E)).epsilon(1e-6));
        CHECK(e.E == doctest::Approx(0.5).epsilon(1e-6));
        CHECK(e.logZ0 == doctest::Approx(0.5 * std::log(2.0 * M_PI)).epsilon(1e-6));
        CHECK(std::abs(e.F) < 1e-6);
    }
    SUBCASE("strict minimality") {
        std::mt19937_64 rng(7);
        const Potential d = doublewell_potential();
        for (int i = 0; i < 10; ++i) CHECK(free_energy(mixture(rng, g), d, ModelParams(1.0, 0.8)).F > 0.0);
    }
}

TEST_CASE("relative entropy") {
    const Grid g(-12.0, 12.0, 2048);
    const Density a = gaussian_density(g, 0.5, 1.0);
    const Density b = gaussian_density(g, 0.0, 1.0);
    CHECK(std::abs(relative_entropy(b, b)) < 1e-12);
    CHECK(relative_entropy(a, b) == doctest::Approx(0.125).epsilon(1e-6));
    CHECK(relative_entropy_log(a, gibbs(0.0, 1.0, quadratic_potential(1.0), g).log_density) ==
          doctest::Approx(0.125).epsilon(1e-6));

    std::vector<double> holed(b.values);
    holed[1000] = 0.0;
    CHECK_THROWS_AS(relative_entropy(a, Density(g, holed)), std::domain_error);
}

TEST_CASE("dissipation") {
    const Grid g(-10.0, 10.0, 1024);
    const Potential q = quadratic_potential(1.0);
    const ModelParams p(1.0, 1.0);
    const double dx = g.dx();
    CHECK(std::abs(dissipation(gibbs(0.4, 1.0, q, g).density, 0.4, q, p)) < 10 * dx * dx);
    CHECK(dissipation(gibbs(0.0, 1.0, q, g).density, 1.0, q, p) == doctest::Approx(1.0).epsilon(1e-4));

    const Potential d = doublewell_potential();
    CHECK(std::abs(dissipation(gibbs(0.2, 0.7, d, g).density, 0.2, d, ModelParams(1.0, 0.7))) < 1e-4);
    std::mt19937_64 rng(3);
    for (int i = 0; i < 10; ++i) CHECK(dissipation(mixture(rng, g), 0.3, d, ModelParams(1.0, 0.7)) >= 0.0);
}

TEST_CASE("Pinsker inequality") {
    const Grid g(-12.0, 12.0, 2048);
    const Density b = gaussian_density(g, 0.0, 1.0);
    const CkpResult same = ckp_l1_bound(b, b);
    CHECK(same.l1 == 0.0);
    CHECK(std::abs(same.bound) < 1e-6);

    const CkpResult r = ckp_l1_bound(gaussian_density(g, 0.5, 1.0), b);
    CHECK(r.l1 == doctest::Approx(2.0 * (2.0 * Phi(0.25) - 1.0)).epsilon(1e-6));
    CHECK(r.bound == doctest::Approx(0.5).epsilon(1e-6));

    std::mt19937_64 rng(11);
    for (int i = 0; i < 20; ++i) {
        const CkpResult c = ckp_l1_bound(mixture(rng, g), mixture(rng, g));
        CHECK(c.l1 <= c.bound + 1e-12);
    }
}

TEST_CASE("weighted Pinsker inequality") {
    const Grid g(-8.0, 8.0, 1024);
    const Potential d = doublewell_potential();
    const Density gamma = lambda_of_ell(0.3, 0.5, d, g).state.density;

    const WeightedCkpResult same = weighted_ckp(gamma, gamma, growth_weight(d));
    CHECK(same.weighted_l1 == 0.0);

    std::mt19937_64 rng(5);
    const Density rho = mixture(rng, g);
    const WeightedCkpResult zero = weighted_ckp(rho, gamma, [](double) { return 0.0; });
    CHECK(zero.Cw == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(zero.weighted_l1 == 0.0);

    // independent quadrature of both sides
    const auto w = growth_weight(d);
    for (int k = 0; k < 20; ++k) {
        const Density r = mixture(rng, g);
        double lhs = 0.0, cw = 0.0, H = 0.0;
        for (int i = 0; i < g.n; ++i) {
            const double x = g.x(i), wi = 1.0 * (1.0 + std::abs(x));
            lhs += wi * std::abs(r.values[i] - gamma.values[i]) * g.dx();
            cw += std::exp(wi * wi) * gamma.values[i] * g.dx();
            if (r.values[i] > 0.0) H += r.values[i] * std::log(r.values[i] / gamma.values[i]) * g.dx();
        }
        const WeightedCkpResult res = weighted_ckp(r, gamma, w);
        CHECK(res.weighted_l1 == doctest::Approx(lhs).epsilon(1e-10));
        CHECK(res.Cw == doctest::Approx(cw).epsilon(1e-10));
        CHECK(std::isfinite(res.Cw));
        CHECK(lhs <= std::sqrt(2.0 * (1.0 + std::log(cw)) * H) + 1e-8);
    }

    // too strong a weight against a wide Gibbs state
    const Density wide = gibbs(0.0, 2.0, d, g).density;
    CHECK_THROWS_AS(weighted_ckp(rho, wide, [](double x) { return 30.0 * (1.0 + std::abs(x)); }),
                    std::overflow_error);
}
