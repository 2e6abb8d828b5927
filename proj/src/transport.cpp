#include "cfpk/transport.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

#include "cfpk/functionals.hpp"
#include "cfpk/tridiag.hpp"

namespace cfpk {

namespace {

// Five-point Gauss-Legendre rule on [0, 1].
constexpr std::array<double, 5> kGaussNodes{0.046910077030668004, 0.23076534494715845, 0.5, 0.7692346550528415,
                                            0.953089922969332};
constexpr std::array<double, 5> kGaussWeights{0.11846344252809454, 0.23931433524968324, 0.28444444444444444,
                                              0.23931433524968324, 0.11846344252809454};

double cell_average(const std::function<double(double)>& f, double a, double b) {
    if (b <= a) return f(a);
    double s = 0.0;
    for (std::size_t q = 0; q < kGaussNodes.size(); ++q) s += kGaussWeights[q] * f(a + kGaussNodes[q] * (b - a));
    return s;
}

double integrate_cells(const CellMeasure& c, const std::function<double(double)>& f) {
    double s = 0.0;
    for (std::size_t i = 0; i < c.cells(); ++i) s += c.mass[i] * cell_average(f, c.edges[i], c.edges[i + 1]);
    return s;
}

std::vector<double> normalized_masses(const Density& rho) {
    const double dx = rho.grid.dx();
    std::vector<double> w(rho.size());
    double total = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] = rho.values[i] * dx;
        total += w[i];
    }
    if (!(total > 0.0)) throw std::domain_error("transport: density has no mass");
    for (double& v : w) v /= total;
    return w;
}

}  // namespace

// ---------------------------------------------------------------------------------------------
// Quantile representation

QuantileRep to_quantile(const Density& rho, int m) {
    if (m < 64) throw std::invalid_argument(fmt::format("to_quantile: m = {} must be at least 64", m));
    const Grid& g = rho.grid;
    const auto w = normalized_masses(rho);
    QuantileRep q;
    q.s_nodes.resize(m);
    q.x_of_s.resize(m);
    std::size_t i = 0;
    double cdf_lo = 0.0;
    for (int j = 0; j < m; ++j) {
        const double s = (j + 0.5) / m;
        q.s_nodes[j] = s;
        while (i + 1 < w.size() && cdf_lo + w[i] < s) {
            cdf_lo += w[i];
            ++i;
        }
        const double frac = w[i] > 0.0 ? std::clamp((s - cdf_lo) / w[i], 0.0, 1.0) : 0.0;
        q.x_of_s[j] = g.edge(static_cast<int>(i)) + frac * g.dx();
    }
    return q;
}

Density from_quantile(const QuantileRep& q, const Grid& grid) {
    const std::size_t m = q.x_of_s.size();
    if (m < 2 || q.s_nodes.size() != m) throw std::invalid_argument("from_quantile: need at least two matching samples");
    CellMeasure c;
    const double s0 = q.s_nodes.front();
    const double s1 = q.s_nodes.back();
    const double left_slope = (q.x_of_s[1] - q.x_of_s[0]) / (q.s_nodes[1] - q.s_nodes[0]);
    const double right_slope = (q.x_of_s[m - 1] - q.x_of_s[m - 2]) / (q.s_nodes[m - 1] - q.s_nodes[m - 2]);
    c.edges.push_back(std::max(grid.x_min, q.x_of_s[0] - s0 * left_slope));
    c.mass.push_back(s0);
    for (std::size_t j = 0; j < m; ++j) {
        c.edges.push_back(std::clamp(q.x_of_s[j], grid.x_min, grid.x_max));
        if (j + 1 < m) c.mass.push_back(q.s_nodes[j + 1] - q.s_nodes[j]);
    }
    c.edges.push_back(std::min(grid.x_max, q.x_of_s[m - 1] + (1.0 - s1) * right_slope));
    c.mass.push_back(1.0 - s1);
    double mean = 0.0;
    for (double x : q.x_of_s) mean += x;
    mean /= static_cast<double>(m);
    return project_mean(to_grid(c, grid), mean, 1e-12);
}

double w2(const QuantileRep& a, const QuantileRep& b) {
    if (a.x_of_s.size() != b.x_of_s.size() || a.x_of_s.empty())
        throw std::invalid_argument("w2: quantile representations differ in size");
    double s = 0.0;
    for (std::size_t j = 0; j < a.x_of_s.size(); ++j) {
        const double d = a.x_of_s[j] - b.x_of_s[j];
        s += d * d;
    }
    return std::sqrt(s / static_cast<double>(a.x_of_s.size()));
}

double w2(const Density& a, const Density& b, int m) { return w2(to_quantile(a, m), to_quantile(b, m)); }

double w2(const Density& a, const Density& b) { return std::sqrt(std::max(0.0, w2_sq(cells_of(a), cells_of(b)))); }

// ---------------------------------------------------------------------------------------------
// Cell measures

double CellMeasure::mean() const {
    double s = 0.0;
    for (std::size_t i = 0; i < cells(); ++i) s += mass[i] * midpoint(i);
    return s;
}

double CellMeasure::second_moment() const {
    double s = 0.0;
    for (std::size_t i = 0; i < cells(); ++i) {
        const double a = edges[i], b = edges[i + 1];
        s += mass[i] * (a * a + a * b + b * b) / 3.0;
    }
    return s;
}

double CellMeasure::entropy() const {
    double s = 0.0;
    for (std::size_t i = 0; i < cells(); ++i) {
        if (mass[i] > 0.0) s += mass[i] * std::log(mass[i] / width(i));
    }
    return s;
}

double CellMeasure::potential_energy(const Potential& pot) const {
    double s = 0.0;
    for (std::size_t i = 0; i < cells(); ++i) s += mass[i] * pot.h(midpoint(i));
    return s;
}

CellMeasure cells_of(const Density& rho, double mass_floor) {
    const Grid& g = rho.grid;
    CellMeasure c;
    c.mass = normalized_masses(rho);
    if (mass_floor > 0.0) {
        double total = 0.0;
        for (double& w : c.mass) {
            w = std::max(w, mass_floor);
            total += w;
        }
        for (double& w : c.mass) w /= total;
    }
    c.edges.resize(g.n + 1);
    for (int i = 0; i <= g.n; ++i) c.edges[i] = g.edge(i);
    c.edges[g.n] = g.x_max;
    return c;
}

Density to_grid(const CellMeasure& c, const Grid& g) {
    const double dx = g.dx();
    std::vector<double> out(g.n, 0.0);
    auto cell_index = [&](double x) {
        const long j = static_cast<long>(std::floor((x - g.x_min) / dx));
        return std::clamp<long>(j, 0, g.n - 1);
    };
    for (std::size_t i = 0; i < c.cells(); ++i) {
        const double m = c.mass[i];
        if (m <= 0.0) continue;
        const double a = std::clamp(c.edges[i], g.x_min, g.x_max);
        const double b = std::clamp(c.edges[i + 1], g.x_min, g.x_max);
        if (!(b > a)) {
            out[cell_index(a)] += m;
            continue;
        }
        const double q = m / (b - a);
        long j = cell_index(a);
        const long j_end = cell_index(b);
        if (j == j_end) {
            out[j] += m;
            continue;
        }
        double deposited = 0.0;
        for (; j < j_end; ++j) {
            const double lo = std::max(a, g.edge(static_cast<int>(j)));
            const double hi = g.edge(static_cast<int>(j) + 1);
            const double part = q * std::max(0.0, hi - lo);
            out[j] += part;
            deposited += part;
        }
        out[j_end] += std::max(0.0, m - deposited);
    }
    for (double& v : out) v /= dx;
    return Density(g, std::move(out));
}

double w2_sq(const CellMeasure& a, const CellMeasure& b) {
    double ta = 0.0, tb = 0.0;
    for (double w : a.mass) ta += w;
    for (double w : b.mass) tb += w;
    if (!(ta > 0.0) || !(tb > 0.0)) throw std::domain_error("w2_sq: measure without mass");
    const std::size_t na = a.cells(), nb = b.cells();
    std::size_t i = 0, j = 0;
    auto skip = [](const CellMeasure& c, std::size_t k) {
        while (k < c.cells() && !(c.mass[k] > 0.0)) ++k;
        return k;
    };
    i = skip(a, 0);
    j = skip(b, 0);
    double sa0 = 0.0, sb0 = 0.0, s = 0.0, acc = 0.0;
    while (i < na && j < nb) {
        const double sa1 = sa0 + a.mass[i] / ta;
        const double sb1 = sb0 + b.mass[j] / tb;
        const double s1 = std::min(sa1, sb1);
        auto qa = [&](double u) { return a.edges[i] + a.width(i) * std::clamp((u - sa0) / (sa1 - sa0), 0.0, 1.0); };
        auto qb = [&](double u) { return b.edges[j] + b.width(j) * std::clamp((u - sb0) / (sb1 - sb0), 0.0, 1.0); };
        if (s1 > s) {
            const double d0 = qa(s) - qb(s);
            const double d1 = qa(s1) - qb(s1);
            acc += (s1 - s) * (d0 * d0 + d0 * d1 + d1 * d1) / 3.0;
        }
        s = s1;
        if (sa1 <= s1) {
            sa0 = sa1;
            i = skip(a, i + 1);
        }
        if (sb1 <= s1) {
            sb0 = sb1;
            j = skip(b, j + 1);
        }
    }
    return acc;
}

double coupled_w2_sq(const CellMeasure& from, const CellMeasure& to) {
    if (from.cells() != to.cells()) throw std::invalid_argument("coupled_w2_sq: cell counts differ");
    double acc = 0.0;
    for (std::size_t i = 0; i < from.cells(); ++i) {
        const double a0 = to.edges[i] - from.edges[i];
        const double a1 = to.edges[i + 1] - from.edges[i + 1];
        acc += from.mass[i] * (a0 * a0 + a0 * a1 + a1 * a1) / 3.0;
    }
    return acc;
}

// ---------------------------------------------------------------------------------------------
// Minimizing-movement step in Lagrangian coordinates: the edges X move, the cell masses stay fixed.

namespace {

class JkoProblem {
public:
    JkoProblem(const CellMeasure& prev, double h_scaled, double nu, const Potential& pot)
        : y_(prev.edges), w_(prev.mass), ht_(h_scaled), nu2_(nu * nu), pot_(pot) {}

    std::size_t nodes() const { return y_.size(); }

    // Objective without the constant sum of w log w.
    double value(const std::vector<double>& x) const {
        double transport = 0.0, ent = 0.0, pe = 0.0;
        for (std::size_t i = 0; i + 1 < x.size(); ++i) {
            const double d = x[i + 1] - x[i];
            if (!(d > 0.0)) return std::numeric_limits<double>::infinity();
            const double a0 = x[i] - y_[i], a1 = x[i + 1] - y_[i + 1];
            transport += w_[i] * (a0 * a0 + a0 * a1 + a1 * a1);
            ent -= w_[i] * std::log(d);
            pe += w_[i] * pot_.h(0.5 * (x[i] + x[i + 1]));
        }
        return transport / 6.0 + ht_ * (nu2_ * ent + pe);
    }

    void gradient(const std::vector<double>& x, std::vector<double>& g) const {
        std::fill(g.begin(), g.end(), 0.0);
        for (std::size_t i = 0; i + 1 < x.size(); ++i) {
            const double a0 = x[i] - y_[i], a1 = x[i + 1] - y_[i + 1];
            const double d = x[i + 1] - x[i];
            const double pressure = ht_ * nu2_ * w_[i] / d;
            const double force = 0.5 * ht_ * w_[i] * pot_.h1(0.5 * (x[i] + x[i + 1]));
            g[i] += w_[i] * (2.0 * a0 + a1) / 6.0 + pressure + force;
            g[i + 1] += w_[i] * (a0 + 2.0 * a1) / 6.0 - pressure + force;
        }
        g.front() = 0.0;
        g.back() = 0.0;
    }

    // Tridiagonal Hessian restricted to the interior nodes 1..N-2.
    void hessian(const std::vector<double>& x, std::vector<double>& lo, std::vector<double>& di,
                 std::vector<double>& up) const {
        const std::size_t n = x.size() - 2;
        lo.assign(n, 0.0);
        di.assign(n, 0.0);
        up.assign(n, 0.0);
        for (std::size_t i = 0; i + 1 < x.size(); ++i) {
            const double d = x[i + 1] - x[i];
            const double e = ht_ * nu2_ * w_[i] / (d * d);
            const double p = 0.25 * ht_ * w_[i] * pot_.h2(0.5 * (x[i] + x[i + 1]));
            const double diag = w_[i] / 3.0 + e + p;
            const double off = w_[i] / 6.0 - e + p;
            // node i is interior index i-1, node i+1 is interior index i
            if (i >= 1) di[i - 1] += diag;
            if (i + 1 <= n) di[i] += diag;
            if (i >= 1 && i + 1 <= n) {
                up[i - 1] = off;
                lo[i] = off;
            }
        }
    }

    // Gradient of the first moment with respect to the interior nodes (walls fixed).
    std::vector<double> constraint_gradient() const {
        std::vector<double> c(y_.size(), 0.0);
        for (std::size_t i = 0; i < w_.size(); ++i) {
            c[i] += 0.5 * w_[i];
            c[i + 1] += 0.5 * w_[i];
        }
        c.front() = 0.0;
        c.back() = 0.0;
        return c;
    }

private:
    const std::vector<double>& y_;
    const std::vector<double>& w_;
    double ht_;
    double nu2_;
    const Potential& pot_;
};

double scaled_kkt(const std::vector<double>& g, const std::vector<double>& c, double& mu) {
    double cg = 0.0, cc = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        cg += c[i] * g[i];
        cc += c[i] * c[i];
    }
    mu = cg / cc;
    double r = 0.0;
    for (std::size_t i = 1; i + 1 < g.size(); ++i) r = std::max(r, std::abs(g[i] - mu * c[i]) / c[i]);
    return r;
}

}  // namespace

JkoStepResult jko_step(const CellMeasure& prev, const Grid& grid, double ell_k, double h, const Potential& pot,
                       const ModelParams& params, const JkoOptions& opts) {
    if (!(h > 0.0)) throw std::invalid_argument(fmt::format("jko_step: h = {} must be positive", h));
    const std::size_t nodes = prev.edges.size();
    if (nodes < 3 || prev.mass.size() + 1 != nodes) throw std::invalid_argument("jko_step: malformed cell measure");
    if (!(ell_k > grid.x_min && ell_k < grid.x_max))
        throw std::out_of_range(fmt::format("jko_step: constraint {} outside the domain", ell_k));

    const double ht = h / params.tau;
    JkoProblem prob(prev, ht, params.nu, pot);
    const std::vector<double> c = prob.constraint_gradient();
    double csum = 0.0;
    for (double v : c) csum += v;

    // Feasible start: rigid shift of the interior nodes.
    std::vector<double> x = prev.edges;
    const double shift = (ell_k - prev.mean()) / csum;
    for (std::size_t i = 1; i + 1 < nodes; ++i) x[i] += shift;
    if (!(x[1] > x[0]) || !(x[nodes - 1] > x[nodes - 2]))
        throw std::runtime_error(fmt::format("jko_step: monotonicity lost when shifting onto constraint {}", ell_k));

    const std::size_t n_in = nodes - 2;
    std::vector<double> g(nodes), lo, di, up, d1(n_in), d2(n_in), dx(nodes, 0.0), trial(nodes);
    double mu = 0.0;
    double resid = std::numeric_limits<double>::infinity();
    int it = 0;
    for (;; ++it) {
        prob.gradient(x, g);
        resid = scaled_kkt(g, c, mu);
        if (resid <= opts.tol) break;
        if (it >= opts.max_iter)
            throw std::runtime_error(fmt::format("jko_step: no convergence in {} iterations (kkt residual {:.3e})",
                                                 opts.max_iter, resid));
        prob.hessian(x, lo, di, up);
        bool ok = false;
        for (double reg = 0.0; !ok; reg = reg == 0.0 ? 1e-8 : 10.0 * reg) {
            if (reg > 1e4) throw std::runtime_error("jko_step: Hessian could not be regularized");
            std::vector<double> dreg(di);
            for (std::size_t k = 0; k < n_in; ++k) dreg[k] += reg * (c[k + 1] > 0.0 ? c[k + 1] : 1.0);
            for (std::size_t k = 0; k < n_in; ++k) {
                d1[k] = -g[k + 1];
                d2[k] = c[k + 1];
            }
            ok = solve_tridiagonal(lo, dreg, up, d1, true) && solve_tridiagonal(lo, dreg, up, d2, true);
        }
        double cd1 = 0.0, cd2 = 0.0;
        for (std::size_t k = 0; k < n_in; ++k) {
            cd1 += c[k + 1] * d1[k];
            cd2 += c[k + 1] * d2[k];
        }
        const double theta = cd1 / cd2;
        for (std::size_t k = 0; k < n_in; ++k) dx[k + 1] = d1[k] - theta * d2[k];

        double alpha = 1.0;
        for (std::size_t i = 0; i + 1 < nodes; ++i) {
            const double dd = dx[i + 1] - dx[i];
            if (dd < 0.0) alpha = std::min(alpha, -0.99 * (x[i + 1] - x[i]) / dd);
        }
        const double f0 = prob.value(x);
        double slope = 0.0;
        for (std::size_t i = 0; i < nodes; ++i) slope += g[i] * dx[i];
        const double roundoff = 1e-14 * (1.0 + std::abs(f0));
        for (;;) {
            for (std::size_t i = 0; i < nodes; ++i) trial[i] = x[i] + alpha * dx[i];
            const double f1 = prob.value(trial);
            if (f1 <= f0 + 1e-4 * alpha * std::min(slope, 0.0) + roundoff) break;
            alpha *= 0.5;
            if (alpha < 1e-14)
                throw std::runtime_error(
                    fmt::format("jko_step: line search stalled (kkt residual {:.3e})", resid));
        }
        x.swap(trial);
    }

    JkoStepResult r;
    r.cells_next.edges = std::move(x);
    r.cells_next.mass = prev.mass;
    const CellMeasure& next = r.cells_next;
    double drift = 0.0;
    for (std::size_t i = 0; i < next.cells(); ++i) drift += next.mass[i] * pot.h1(next.midpoint(i));
    r.sigma_k = drift + params.tau * (next.mean() - prev.mean()) / h;
    r.w2_sq = coupled_w2_sq(prev, next);
    const double nu2 = params.nu * params.nu;
    r.free_energy =
        nu2 * next.entropy() + next.potential_energy(pot) + nu2 * log_partition(0.0, params.nu, pot, grid);
    r.inner_iterations = it;
    r.kkt_residual = resid;
    r.rho_next = to_grid(next, grid);
    return r;
}

JkoStepResult jko_step(const Density& rho_prev, double ell_k, double h, const Potential& pot, const ModelParams& params,
                       const JkoOptions& opts) {
    return jko_step(cells_of(rho_prev, opts.mass_floor), rho_prev.grid, ell_k, h, pot, params, opts);
}

// ---------------------------------------------------------------------------------------------

namespace {

TrajectoryRecord record_of(const CellMeasure& c, double t, double sigma, double ell, const Potential& pot,
                           const ModelParams& params, double logZ0) {
    TrajectoryRecord r;
    r.t = t;
    r.sigma = sigma;
    r.ell = ell;
    r.M1 = c.mean();
    r.M2 = c.second_moment();
    r.S = c.entropy();
    r.E = c.potential_energy(pot);
    const double nu2 = params.nu * params.nu;
    r.F = nu2 * r.S + r.E + nu2 * logZ0;
    return r;
}

}  // namespace

JkoRun jko_run(const Density& rho0, const ConstraintPath& path, double h, double T, const Potential& pot,
               const ModelParams& params, const JkoOptions& opts, bool keep_states) {
    if (!(h > 0.0) || !(T > 0.0)) throw std::invalid_argument("jko_run: h and T must be positive");
    const Grid& grid = rho0.grid;
    Density start = normalize(rho0);
    const double ell0 = path.ell(0.0);
    if (std::abs(moments(start).M1 - ell0) > 1e-14) start = project_mean(start, ell0);

    CellMeasure cur = cells_of(start, opts.mass_floor);
    const double logZ0 = log_partition(0.0, params.nu, pot, grid);
    double drift0 = 0.0;
    for (std::size_t i = 0; i < cur.cells(); ++i) drift0 += cur.mass[i] * pot.h1(cur.midpoint(i));

    JkoRun run;
    run.h = h;
    const int steps = static_cast<int>(std::ceil(T / h - 1e-12));
    run.records.reserve(steps + 1);
    run.records.push_back(record_of(cur, 0.0, drift0 + params.tau * path.ell_dot(0.0), ell0, pot, params, logZ0));
    run.max_M2 = run.records.back().M2;
    if (keep_states) run.states.push_back(cur);

    for (int k = 1; k <= steps; ++k) {
        const double t = k * h;
        JkoStepResult step;
        try {
            step = jko_step(cur, grid, path.ell(t), h, pot, params, opts);
        } catch (const std::exception& e) {
            throw std::runtime_error(fmt::format("jko_run: step {} failed: {}", k, e.what()));
        }
        TrajectoryRecord rec = record_of(step.cells_next, t, step.sigma_k, path.ell(t), pot, params, logZ0);
        rec.W2sq_step = step.w2_sq;
        rec.kkt_residual = step.kkt_residual;
        run.records.push_back(rec);
        run.sum_w2_sq += step.w2_sq;
        run.max_M2 = std::max(run.max_M2, rec.M2);
        run.max_abs_sigma = std::max(run.max_abs_sigma, std::abs(step.sigma_k));
        cur = std::move(step.cells_next);
        if (keep_states) run.states.push_back(cur);
    }
    return run;
}

// ---------------------------------------------------------------------------------------------

double SigmaSeries::piecewise(double t) const {
    if (values.empty()) throw std::logic_error("SigmaSeries: empty");
    if (t <= 0.0) return values.front();
    const auto k = static_cast<std::size_t>(std::ceil(t / h - 1e-12));
    return values[std::min(k, values.size() - 1)];
}

double SigmaSeries::linear(double t) const {
    if (values.empty()) throw std::logic_error("SigmaSeries: empty");
    if (t <= 0.0) return values.front();
    const double u = t / h;
    const auto k = static_cast<std::size_t>(std::floor(u));
    if (k + 1 >= values.size()) return values.back();
    const double frac = u - static_cast<double>(k);
    return (1.0 - frac) * values[k] + frac * values[k + 1];
}

SigmaSeries discrete_sigma_series(const std::vector<TrajectoryRecord>& records, double h) {
    if (records.empty()) throw std::invalid_argument("discrete_sigma_series: empty trajectory");
    SigmaSeries s;
    s.h = h;
    for (const auto& r : records) {
        s.times.push_back(r.t);
        s.values.push_back(r.sigma);
    }
    for (std::size_t k = 1; k < s.values.size(); ++k) {
        const double jump = std::abs(s.values[k] - s.values[k - 1]);
        // Between (k-1)h and kh the step function sits at sigma^k while the interpolant starts at sigma^{k-1}.
        s.sup_gap = std::max(s.sup_gap, jump);
        if (k >= 2) s.max_increment_rate = std::max(s.max_increment_rate, jump / h);
    }
    return s;
}

WeakFormReport weak_form_residual(const CellMeasure& prev, const CellMeasure& next, double sigma_k, double h,
                                  const TestFunction& zeta, const Potential& pot, const ModelParams& params,
                                  double kkt_residual) {
    if (prev.cells() != next.cells()) throw std::invalid_argument("weak_form_residual: cell counts differ");
    const double change = integrate_cells(next, zeta.f) - integrate_cells(prev, zeta.f);
    double diffusion = 0.0, drift = 0.0;
    for (std::size_t i = 0; i < next.cells(); ++i) {
        const double a = next.edges[i], b = next.edges[i + 1];
        const double w = next.mass[i];
        if (b > a) diffusion += w * (zeta.d1(b) - zeta.d1(a)) / (b - a);
        else diffusion += w * zeta.d2(a);
        drift += w * (pot.h1(0.5 * (a + b)) - sigma_k) * 0.5 * (zeta.d1(a) + zeta.d1(b));
    }
    const double nu2 = params.nu * params.nu;
    // Zero-flux walls leave the boundary term nu^2 [zeta' rho] from integrating the diffusion by parts.
    const std::size_t last = next.cells() - 1;
    const double boundary = zeta.d1(next.edges[last + 1]) * next.mass[last] / next.width(last) -
                            zeta.d1(next.edges[0]) * next.mass[0] / next.width(0);
    WeakFormReport rep;
    rep.residual = std::abs(params.tau * change / h + drift - nu2 * diffusion + nu2 * boundary);
    rep.w2_sq = coupled_w2_sq(prev, next);
    rep.bound = params.tau * zeta.sup_d2 / 2.0 * rep.w2_sq / h;
    double weighted = 0.0;
    for (std::size_t i = 1; i < next.cells(); ++i)
        weighted += 0.5 * (next.mass[i - 1] + next.mass[i]) * std::abs(zeta.d1(next.edges[i]));
    rep.solver_allowance = 2.0 * params.tau / h * kkt_residual * weighted;
    return rep;
}

}  // namespace cfpk
