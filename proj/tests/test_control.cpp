#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "stefan/basis.hpp"
#include "stefan/control.hpp"
#include "stefan/error.hpp"
#include "stefan/grid.hpp"
#include "stefan/quadrature.hpp"

using namespace stefan;

TEST_CASE("b_2^1 and b_2^2 norms by hand") {
    const std::vector<double> g{0.0, 0.5};
    CHECK(norm_b2_1(g, 0.5) * norm_b2_1(g, 0.5) == doctest::Approx(0.5));
    // tau (1 + 1) + (0 + 1) + second difference 1
    const std::vector<double> s{1.0, 1.0, 2.0};
    CHECK(norm_b2_2(s, 1.0) == doctest::Approx(2.0));
    CHECK(norm_b2_coeff(std::vector<double>{3.0, 4.0}) == doctest::Approx(5.0));
}

TEST_CASE("l2 cell norm weights by h tau") {
    const MovingGrid g = build_moving_grid(std::vector<double>{1.0, 1.0, 1.5}, 2.0, 0.5, 2);
    CellField f(2, g.cells(), 2.0);
    // 4 * tau * ell * steps
    CHECK(norm_l2_cells(f, g, 0.5) == doctest::Approx(std::sqrt(4.0 * 0.5 * 2.0 * 2.0)));
}

namespace {
DiscreteControl zero_control(int n, const MovingGrid& g, double s0) {
    DiscreteControl v;
    v.s.assign(n + 1, s0);
    v.g.assign(n + 1, 0.0);
    v.f = CellField(n, g.cells());
    v.b.assign(n + 1, 0.0);
    v.c.assign(n + 1, 0.0);
    return v;
}
}  // namespace

TEST_CASE("admissibility closed at R and rejects bad boundary") {
    const ControlBounds bounds{1.0, 0.5, 2.0, 1.0};
    const int n = 4;
    const TimeGrid t = build_time_grid(1.0, n);
    const MovingGrid g = build_moving_grid(std::vector<double>(n + 1, 1.0), 2.0, 0.5, 4);
    DiscreteControl v = zero_control(n, g, 1.0);
    v.s.assign(n + 1, 1.0);
    // ||s||_{b_2^2} = sqrt(T) for the constant 1
    CHECK(is_admissible(v, g, t.tau, bounds).admissible);
    v.b[0] = 1.0;
    CHECK(is_admissible(v, g, t.tau, bounds).admissible);
    v.b[0] = 1.01;
    CHECK_FALSE(is_admissible(v, g, t.tau, bounds).admissible);
    v.b[0] = 0.0;
    v.s[1] = 1.1;
    const auto rep = is_admissible(v, g, t.tau, bounds);
    CHECK_FALSE(rep.admissible);
    CHECK_FALSE(rep.violations.empty());
}

TEST_CASE("P_n boundary curve follows the piecewise quadratic") {
    const std::vector<double> s{1.0, 1.0, 1.2, 1.5};
    const double tau = 0.25;
    const BoundaryCurve c = boundary_curve(s, tau);
    auto at = [&](std::size_t k) { return k == 0 ? s[0] : s[k - 1]; };  // s_{-1} = s_0
    for (std::size_t k = 1; k <= 3; ++k) {
        const double back = (s[k - 1] - at(k - 1)) / tau;
        const double curv = (s[k] - 2 * s[k - 1] + at(k - 1)) / (tau * tau);
        for (double r : {0.1, 0.5, 0.9}) {
            const double dt = r * tau;
            CHECK(c.value((k - 1) * tau + dt) == doctest::Approx(s[k - 1] + (dt - 0.5 * tau) * back + 0.5 * dt * dt * curv));
            CHECK(c.curvature((k - 1) * tau + dt) == doctest::Approx(curv));
        }
    }
    for (int k = 1; k < 3; ++k)
        CHECK(c.value(k * tau - 1e-13) == doctest::Approx(c.value(k * tau + 1e-13)).epsilon(1e-11));
    const BoundaryCurve flat = boundary_curve(std::vector<double>(5, 1.3), tau);
    CHECK(flat.value(0.37) == doctest::Approx(1.3));
    CHECK(flat.slope(0.37) == 0.0);
}

TEST_CASE("Q_n then P_n reproduces samples") {
    const int n = 8;
    const TimeGrid t = build_time_grid(1.0, n);
    ContinuousControl v;
    v.s = [](double tt) { return 1.0 + 0.1 * tt * tt; };
    v.g = [](double tt) { return std::sin(tt); };
    v.f = Field([](double x, double tt) { return x + tt; });
    const auto s = sample_boundary(v.s, 1.0, t);
    CHECK(s[0] == 1.0);
    CHECK(s[1] == 1.0);
    CHECK(s[3] == doctest::Approx(1.0 + 0.1 * 9.0 / 64.0));
    const MovingGrid g = build_moving_grid(s, 2.0, 0.5, t.tau, GridOptions{});
    const CoefficientBasis basis(2.0, 1.0, n + 1);
    const DiscreteControl d = q_n(v, 1.0, t, g, basis);
    for (int k = 0; k <= n; ++k) CHECK(d.g[k] == doctest::Approx(std::sin(t.t(k))));
    const ContinuousControl back = p_n(d, t, g, basis);
    for (int k = 0; k <= n; ++k) CHECK(back.g(t.t(k)) == doctest::Approx(d.g[k]));
    // cell mean of x + t
    CHECK(d.f(0, 1) == doctest::Approx(0.5 * (g.xs[0] + g.xs[1]) + 0.5 * t.tau));
}

TEST_CASE("basis is orthonormal in the surrogate inner product") {
    const double ell = 2.0, T = 1.0;
    const CoefficientBasis basis(ell, T, 10);
    // quadrature oracle for <psi_a, psi_b>
    auto inner = [&](int a, int b) {
        auto fx = [&](double x) {
            return quad::integrate_gl5(
                [&](double tt) {
                    const auto p = basis.psi(a, x, tt), q = basis.psi(b, x, tt);
                    return p.v * q.v + p.dx * q.dx + p.dt * q.dt;
                },
                0.0, T, 16);
        };
        return quad::integrate_gl5(fx, 0.0, ell, 16);
    };
    for (int a = 0; a < 10; a += 3)
        for (int b = 0; b < 10; b += 2) CHECK(inner(a, b) == doctest::Approx(a == b ? 1.0 : 0.0).epsilon(1e-9));
}

TEST_CASE("basis raw round trip and sup bound") {
    const CoefficientBasis basis(2.0, 1.0, 12);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> N;
    std::vector<double> d(12);
    for (auto& v : d) v = N(rng);
    const auto e = basis.to_raw(d);
    const auto back = basis.from_raw(e);
    for (int k = 0; k < 12; ++k) CHECK(back[k] == doctest::Approx(d[k]).epsilon(1e-10));
    const double C = basis.sup_constant() * norm_b2_coeff(d);
    for (int a = 0; a <= 20; ++a)
        for (int b = 0; b <= 10; ++b) CHECK(std::abs(basis.expansion(d, 0.1 * a, 0.1 * b).v) <= C);
}

TEST_CASE("basis projection of a known expansion") {
    const CoefficientBasis basis(2.0, 1.0, 6);
    const std::vector<double> d{0.3, -0.2, 0.5, 0.1, 0.0, -0.4};
    const Field u([&](double x, double t) { return basis.expansion(d, x, t).v; });
    const auto p = basis.project(u);
    for (int k = 0; k < 6; ++k) CHECK(p[k] == doctest::Approx(d[k]).epsilon(1e-8));
}

TEST_CASE("remap preserves integrals") {
    const MovingGrid a = build_moving_grid(std::vector<double>{1.0, 1.0, 1.3}, 2.0, 0.5, 3);
    const MovingGrid b = build_moving_grid(std::vector<double>{1.0, 1.0, 0.7}, 2.0, 0.5, 5);
    CellField f(2, a.cells());
    for (int k = 1; k <= 2; ++k)
        for (int i = 0; i < a.cells(); ++i) f(i, k) = std::sin(i + k);
    const CellField r = remap_cells(f, a, b);
    for (int k = 1; k <= 2; ++k) {
        double ia = 0, ib = 0;
        for (int i = 0; i < a.cells(); ++i) ia += a.hs[i] * f(i, k);
        for (int i = 0; i < b.cells(); ++i) ib += b.hs[i] * r(i, k);
        CHECK(ia == doctest::Approx(ib));
    }
}

TEST_CASE("Lipschitz bound holds for admissible controls") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(-0.05, 0.05);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 16;
        const TimeGrid t = build_time_grid(1.0, n);
        std::vector<double> s(n + 1, 1.0);
        for (int k = 2; k <= n; ++k) s[k] = s[k - 1] + U(rng);
        CHECK(boundary_lipschitz(s, t.tau) <= lipschitz_bound(1.0, norm_b2_2(s, t.tau)) * (1 + 1e-12));
    }
}

TEST_CASE("projection is idempotent and lands in the admissible set") {
    const ControlBounds bounds{1.0, 0.5, 2.0, 2.0};
    const int n = 8;
    const TimeGrid t = build_time_grid(1.0, n);
    std::vector<double> s{1.0, 1.3, 1.9, 0.2, 1.0, 1.0, 2.5, 1.0, 1.0};
    const MovingGrid g0 = build_moving_grid(std::vector<double>(n + 1, 1.0), 2.0, 0.5, t.tau, GridOptions{});
    DiscreteControl v;
    v.s = s;
    v.g.assign(n + 1, 5.0);
    v.f = CellField(n, g0.cells(), 3.0);
    v.b.assign(n + 1, 1.0);
    v.c.assign(n + 1, -1.0);
    const ProjectionResult p = project_admissible(v, g0, t, bounds, GridOptions{});
    CHECK(p.changed);
    CHECK(is_admissible(p.control, p.grid, t.tau, bounds).admissible);
    const ProjectionResult q = project_admissible(p.control, p.grid, t, bounds, GridOptions{});
    CHECK_FALSE(q.changed);
    CHECK(q.control == p.control);
}
