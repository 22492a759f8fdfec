#include "stefan/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "stefan/error.hpp"
#include "stefan/quadrature.hpp"

namespace stefan {

namespace {

double sq(double x) { return x * x; }

/// sum_i h_i u_i^2 over cells [lo, hi) of row k.
double mass(const DiscreteState& st, int k, int lo, int hi) {
    const auto u = st.row(k);
    double acc = 0.0;
    for (int i = lo; i < hi; ++i) acc += st.grid->hs[static_cast<std::size_t>(i)] * sq(u[static_cast<std::size_t>(i)]);
    return acc;
}

double dirichlet(const DiscreteState& st, int k, int hi) {
    const auto u = st.row(k);
    const auto& hs = st.grid->hs;
    double acc = 0.0;
    for (std::size_t i = 0; i < static_cast<std::size_t>(hi); ++i) acc += sq(u[i + 1] - u[i]) / hs[i];
    return acc;
}

double phi_mass(const DiscreteState& st, const ProblemData& data) {
    double acc = 0.0;
    for (int i = 0; i < st.active(0); ++i) {
        const auto ui = static_cast<std::size_t>(i);
        acc += st.grid->hs[ui] * sq(data.phi(st.grid->xs[ui], 0.0));
    }
    return acc;
}

double g_mass(const DiscreteControl& v, double tau) {
    double acc = 0.0;
    for (std::size_t k = 1; k < v.g.size(); ++k)
        acc += tau / 3.0 * (sq(v.g[k - 1]) + v.g[k - 1] * v.g[k] + sq(v.g[k]));
    return acc;
}

double trace_mass(const DiscreteState& st) {
    double acc = 0.0;
    for (int k = 1; k <= st.n(); ++k) {
        const auto& tr = st.coefficients(k).trace;
        acc += st.time.tau * (sq(tr.gamma_sprime) + sq(tr.chi));
    }
    return acc;
}

/// Constant continuation of row k at node i.
double tilde(const DiscreteState& st, int k, int i) {
    const int m = st.active(k);
    return st.u(static_cast<std::size_t>(k), static_cast<std::size_t>(std::min(i, m)));
}

template <class F>
double gauss(const F& f, double a, double b, int panels) {
    return quad::integrate_gl5(f, a, b, panels);
}

}  // namespace

EnergySides first_energy_sides(const DiscreteState& st, const DiscreteControl& v, const ProblemData& data) {
    const int n = st.n(), N = st.grid->cells();
    EnergySides out;
    double peak = 0.0, grad = 0.0;
    for (int k = 0; k <= n; ++k) peak = std::max(peak, mass(st, k, 0, N));
    for (int k = 1; k <= n; ++k) grad += st.time.tau * dirichlet(st, k, N);
    out.lhs = peak + grad;

    double activation = 0.0;
    for (int k = 1; k < n; ++k)
        if (v.s[static_cast<std::size_t>(k + 1)] > v.s[static_cast<std::size_t>(k)])
            activation += mass(st, k, st.active(k), st.active(k + 1));
    out.rhs_data = phi_mass(st, data) + g_mass(v, st.time.tau) + sq(norm_l2_cells(v.f, *st.grid, st.time.tau)) +
                   trace_mass(st) + activation;
    return out;
}

double second_energy_lhs(const DiscreteState& st) {
    const int n = st.n();
    const auto& hs = st.grid->hs;
    const double tau = st.time.tau;
    double peak = 0.0, dt_term = 0.0, dxt_term = 0.0;
    for (int k = 1; k <= n; ++k) {
        const int m = st.active(k);
        peak = std::max(peak, dirichlet(st, k, m));
        for (int i = 0; i < m; ++i) {
            const double h = hs[static_cast<std::size_t>(i)];
            const double ut = (tilde(st, k, i) - tilde(st, k - 1, i)) / tau;
            const double ux_now = (tilde(st, k, i + 1) - tilde(st, k, i)) / h;
            const double ux_old = (tilde(st, k - 1, i + 1) - tilde(st, k - 1, i)) / h;
            dt_term += tau * h * ut * ut;
            dxt_term += tau * tau * h * sq((ux_now - ux_old) / tau);
        }
    }
    return peak + dt_term + dxt_term;
}

double b2_quarter_norm_sq(const TimeFn& h, double T, int mesh) {
    if (mesh < 2) throw InvalidArgument("Gagliardo mesh needs at least 2 points");
    const double dt = T / mesh;
    std::vector<double> vals(static_cast<std::size_t>(mesh));
    for (int j = 0; j < mesh; ++j) vals[static_cast<std::size_t>(j)] = h((j + 0.5) * dt);
    double l2 = 0.0, semi = 0.0;
    for (int a = 0; a < mesh; ++a) {
        l2 += dt * sq(vals[static_cast<std::size_t>(a)]);
        for (int b = 0; b < mesh; ++b) {
            if (a == b) continue;
            const double dist = std::abs(a - b) * dt;
            semi += dt * dt * sq(vals[static_cast<std::size_t>(a)] - vals[static_cast<std::size_t>(b)]) /
                    std::pow(dist, 1.5);
        }
    }
    return l2 + semi;
}

double second_energy_rhs(const DiscreteState& st, const DiscreteControl& v, const ProblemData& data, int mesh) {
    const double T = st.time.T, tau = st.time.tau;
    const double s0 = data.bounds.s0;
    const double phi_b21 = gauss(
        [&](double x) {
            const double d = 1e-6 * std::max(1.0, s0);
            const double slope = (data.phi(x + d, 0.0) - data.phi(x - d, 0.0)) / (2.0 * d);
            return sq(data.phi(x, 0.0)) + sq(slope);
        },
        0.0, s0, 64);

    const std::vector<double> g = v.g;
    const TimeFn gn = [g, tau](double t) {
        const int k = std::clamp(static_cast<int>(std::ceil(t / tau - 1e-12)), 1, static_cast<int>(g.size()) - 1);
        const auto uk = static_cast<std::size_t>(k);
        return g[uk - 1] + (g[uk] - g[uk - 1]) * (t - (k - 1) * tau) / tau;
    };
    const BoundaryCurve curve = boundary_curve(v.s, tau);
    const TimeFn gamma_sp = [&](double t) { return data.gamma(curve.value(t), t) * curve.slope(t); };
    const TimeFn chi_s = [&](double t) { return data.chi(curve.value(t), t); };

    // p in B_2^{0,1}: \int\int p^2 + p_t^2 over D.
    double p_norm = 0.0;
    if (!data.p.is_zero()) {
        const double ell = data.bounds.ell;
        const double d = 1e-6 * std::max(1.0, T);
        p_norm = gauss(
            [&](double x) {
                return gauss(
                    [&](double t) {
                        const double pt = (data.p(x, t + d) - data.p(x, t - d)) / (2.0 * d);
                        return sq(data.p(x, t)) + sq(pt);
                    },
                    0.0, T, 32);
            },
            0.0, ell, 32);
    }

    return phi_mass(st, data) + phi_b21 + sq(norm_l2_cells(v.f, *st.grid, tau)) + b2_quarter_norm_sq(gn, T, mesh) +
           p_norm + b2_quarter_norm_sq(gamma_sp, T, mesh) + b2_quarter_norm_sq(chi_s, T, mesh);
}

EnergyReport energy_report(const DiscreteState& st, const DiscreteControl& v, const ProblemData& data) {
    EnergyReport r;
    r.n = st.n();
    const EnergySides first = first_energy_sides(st, v, data);
    r.lhs_first = first.lhs;
    r.rhs_data_first = first.rhs_data;
    r.lhs_second = second_energy_lhs(st);
    r.rhs_data_second = second_energy_rhs(st, v, data);
    return r;
}

std::vector<TestFunction> polynomial_test_family(double T) {
    std::vector<TestFunction> out;
    for (int deg = 0; deg <= 3; ++deg)
        for (int i = deg; i >= 0; --i) {
            const int j = deg - i;
            out.push_back({"x^" + std::to_string(i) + " t^" + std::to_string(j),
                           [i, j](double x, double t) { return std::pow(x, i) * std::pow(t, j); },
                           [i, j](double x, double t) { return i == 0 ? 0.0 : i * std::pow(x, i - 1) * std::pow(t, j); }});
        }
    out.push_back({"(T - t)(1 + x)", [T](double x, double t) { return (T - t) * (1.0 + x); },
                   [T](double, double t) { return T - t; }});
    return out;
}

WeakResidual weak_form_residual(const DiscreteState& st, const ContinuousControl& v, const ProblemData& data,
                                const std::vector<TestFunction>& tests) {
    const StateInterpolation I(st);
    const MovingGrid& grid = *st.grid;
    const double T = st.time.T;
    const int n = st.n();
    const TimeFn s_prime = v.s_prime ? v.s_prime : TimeFn([&](double t) {
        const double d = 1e-6 * T;
        return (v.s(std::min(t + d, T)) - v.s(std::max(t - d, 0.0))) / (std::min(t + d, T) - std::max(t - d, 0.0));
    });

    WeakResidual out;
    out.values.assign(tests.size(), 0.0);
    constexpr int kTimeSub = 2;
#pragma omp parallel for schedule(dynamic)
    for (std::size_t q = 0; q < tests.size(); ++q) {
        const TestFunction& phi = tests[q];
        double total = 0.0;
        for (int k = 1; k <= n; ++k) {
            const double t0 = st.time.t(k - 1), t1 = st.time.t(k);
            total += quad::integrate_gl5(
                [&](double t) {
                    const double s = v.s(t);
                    // space integral over cells of the grid cut at s(t)
                    double inner = 0.0;
                    for (std::size_t i = 0; i < grid.hs.size() && grid.xs[i] < s; ++i) {
                        const double a = grid.xs[i], b = std::min(grid.xs[i + 1], s);
                        if (b <= a) continue;
                        inner += quad::integrate_gl5(
                            [&](double x) {
                                const double ux = I.u_hat_x(x, t), u = I.u_hat(x, t), ut = I.u_hat_t(x, t);
                                const double P = phi.value(x, t), Px = phi.dx(x, t);
                                return data.a(x, t) * ux * Px - v.b(x, t) * ux * P - v.c(x, t) * u * P + ut * P +
                                       v.f(x, t) * P + data.p(x, t) * Px;
                            },
                            a, b, 1);
                    }
                    const double bdry = (data.gamma(s, t) * s_prime(t) - data.chi(s, t)) * phi.value(s, t);
                    const double flux = (v.g ? v.g(t) : 0.0) * phi.value(0.0, t);
                    return inner + bdry + flux;
                },
                t0, t1, kTimeSub);
        }
        out.values[q] = total;
    }
    for (const double r : out.values) out.max_abs = std::max(out.max_abs, std::abs(r));
    return out;
}

std::vector<double> boundary_uniform_gap(const std::vector<std::vector<double>>& boundaries, double T, int points) {
    if (boundaries.size() < 2) throw InvalidArgument("boundary gap needs at least two levels");
    if (points < 2) throw InvalidArgument("boundary gap needs at least two evaluation points");
    std::vector<BoundaryCurve> curves;
    for (const auto& s : boundaries) {
        if (s.size() < 2) throw InvalidArgument("boundary vector too short");
        curves.push_back(boundary_curve(s, T / static_cast<double>(s.size() - 1)));
    }
    std::vector<double> out;
    for (std::size_t j = 1; j < curves.size(); ++j) {
        double gap = 0.0;
        for (int p = 0; p < points; ++p) {
            const double t = T * p / (points - 1);
            gap = std::max(gap, std::abs(curves[j].value(t) - curves[j - 1].value(t)));
        }
        out.push_back(gap);
    }
    return out;
}

InclusionReport inclusion_threshold(const ContinuousControl& v, const ProblemData& data, const GridOptions& gopt,
                                  const std::vector<int>& levels) {
    InclusionReport rep;
    rep.levels = levels;
    const auto& b = data.bounds;
    for (const int n : levels) {
        const TimeGrid time = build_time_grid(data.T, n);
        const CoefficientBasis basis(b.ell, data.T, n + 1);
        bool ok = false;
        double norm = std::numeric_limits<double>::infinity();
        try {
            const std::vector<double> s = sample_boundary(v.s, b.s0, time);
            const MovingGrid grid = build_moving_grid(s, b.ell, b.delta, time.tau, gopt);
            const DiscreteControl dv = q_n(v, b.s0, time, grid, basis);
            const AdmissibilityReport ar = is_admissible(dv, grid, time.tau, b);
            ok = ar.admissible;
            norm = ar.norms.max();
        } catch (const ConstraintViolation&) {
            ok = false;
        }
        rep.admissible.push_back(ok);
        rep.max_norm.push_back(norm);
    }
    for (std::size_t j = levels.size(); j-- > 0;) {
        if (!rep.admissible[j]) break;
        rep.threshold = levels[j];
    }
    return rep;
}

LipschitzReport lipschitz_check(std::span<const double> s, const TimeGrid& time) {
    LipschitzReport r;
    r.lipschitz = boundary_lipschitz(s, time.tau);
    r.bound = lipschitz_bound(time.T, norm_b2_2(s, time.tau));
    r.ok = r.lipschitz <= r.bound * (1.0 + 1e-12);
    return r;
}

}  // namespace stefan
