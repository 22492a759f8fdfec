#include "stefan/control.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

#include "stefan/error.hpp"
#include "stefan/quadrature.hpp"
#include "stefan/steklov.hpp"

namespace stefan {

namespace {

constexpr double kNormSlack = 1e-12;

double sq(double x) { return x * x; }

// s^n from a boundary vector; s_{-1} = s_0.
struct BoundaryInterpolant {
    std::vector<double> s;
    double tau;

    int cell(double t) const {
        const int n = static_cast<int>(s.size()) - 1;
        return std::clamp(static_cast<int>(std::floor(t / tau)) + 1, 1, n);
    }
    double at(int k) const { return k < 0 ? s.front() : s[static_cast<std::size_t>(k)]; }
    // (s_{k-1,tbar}, s_{k-1,tbar t}) on cell k
    std::pair<double, double> diffs(int k) const {
        const double d1 = (at(k - 1) - at(k - 2)) / tau;
        const double d2 = (at(k) - 2.0 * at(k - 1) + at(k - 2)) / (tau * tau);
        return {d1, d2};
    }
    double value(double t) const {
        const int k = cell(t);
        const auto [d1, d2] = diffs(k);
        const double r = t - (k - 1) * tau;
        return at(k - 1) + (r - 0.5 * tau) * d1 + 0.5 * r * r * d2;
    }
    double slope(double t) const {
        const int k = cell(t);
        const auto [d1, d2] = diffs(k);
        return d1 + (t - (k - 1) * tau) * d2;
    }
    double curvature(double t) const { return diffs(cell(t)).second; }
};

struct LinearInterpolant {
    std::vector<double> g;
    double tau;

    int cell(double t) const {
        const int n = static_cast<int>(g.size()) - 1;
        return std::clamp(static_cast<int>(std::floor(t / tau)) + 1, 1, n);
    }
    double value(double t) const {
        const int k = cell(t);
        const auto uk = static_cast<std::size_t>(k);
        return g[uk - 1] + (g[uk] - g[uk - 1]) / tau * (t - (k - 1) * tau);
    }
    double slope(double t) const {
        const auto uk = static_cast<std::size_t>(cell(t));
        return (g[uk] - g[uk - 1]) / tau;
    }
};

double derivative(const TimeFn& f, double t, double h) { return (f(t + h) - f(t - h)) / (2.0 * h); }
double second_derivative(const TimeFn& f, double t, double h) {
    return (f(t + h) - 2.0 * f(t) + f(t - h)) / (h * h);
}

// \int_0^T F(t) dt split at breakpoints (or `panels` uniform panels).
template <class F>
double integrate_time(const F& f, double T, const std::vector<double>& breaks, int panels) {
    if (breaks.size() < 2) return quad::integrate_gl5(f, 0.0, T, panels);
    double sum = 0.0;
    for (std::size_t q = 0; q + 1 < breaks.size(); ++q) sum += quad::integrate_gl5(f, breaks[q], breaks[q + 1], 1);
    return sum;
}

template <class F>
double integrate_domain(const F& f, double ell, double T, const std::vector<double>& xb,
                        const std::vector<double>& tb, int panels) {
    std::vector<double> xs = xb, ts = tb;
    if (xs.size() < 2) {
        xs.clear();
        for (int p = 0; p <= panels; ++p) xs.push_back(ell * p / panels);
    }
    if (ts.size() < 2) {
        ts.clear();
        for (int p = 0; p <= panels; ++p) ts.push_back(T * p / panels);
    }
    double sum = 0.0;
    for (std::size_t q = 0; q + 1 < ts.size(); ++q)
        sum += quad::integrate_gl5(
            [&](double t) {
                double inner = 0.0;
                for (std::size_t p = 0; p + 1 < xs.size(); ++p)
                    inner += quad::integrate_gl5([&](double x) { return f(x, t); }, xs[p], xs[p + 1], 1);
                return inner;
            },
            ts[q], ts[q + 1], 1);
    return sum;
}

double surrogate_norm(const Field& d, const GradientFn& grad, double ell, double T, int panels) {
    if (d.is_zero()) return 0.0;
    const double hx = 1e-5 * ell, ht = 1e-5 * T;
    auto integrand = [&](double x, double t) {
        const double v = d(x, t);
        double dx, dt;
        if (grad) {
            const auto gr = grad(x, t);
            dx = gr[0];
            dt = gr[1];
        } else {
            dx = (d(x + hx, t) - d(x - hx, t)) / (2.0 * hx);
            dt = (d(x, t + ht) - d(x, t - ht)) / (2.0 * ht);
        }
        return v * v + dx * dx + dt * dt;
    };
    return std::sqrt(integrate_domain(integrand, ell, T, {}, {}, panels));
}

void check_lengths(const DiscreteControl& v) {
    if (v.s.size() < 3) throw InvalidArgument("discrete control needs n >= 2");
    if (v.g.size() != v.s.size()) throw InvalidArgument("flux vector length differs from boundary vector");
}

}  // namespace

double norm_b2_1(std::span<const double> g, double tau) {
    if (g.size() < 2) throw InvalidArgument("b_2^1 norm needs at least 2 values");
    const std::size_t n = g.size() - 1;
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) sum += tau * sq(g[k]);
    for (std::size_t k = 1; k <= n; ++k) sum += tau * sq((g[k] - g[k - 1]) / tau);
    return std::sqrt(sum);
}

double norm_b2_2(std::span<const double> s, double tau) {
    if (s.size() < 3) throw InvalidArgument("b_2^2 norm needs at least 3 values");
    const std::size_t n = s.size() - 1;
    double sum = sq(norm_b2_1(s, tau));
    for (std::size_t k = 1; k < n; ++k) sum += tau * sq((s[k + 1] - 2.0 * s[k] + s[k - 1]) / (tau * tau));
    return std::sqrt(sum);
}

double norm_l2_cells(const CellField& f, const MovingGrid& grid, double tau) {
    if (f.cells() != grid.cells())
        throw InvalidArgument("source field has " + std::to_string(f.cells()) + " cells, grid has " +
                              std::to_string(grid.cells()));
    double sum = 0.0;
    for (int k = 1; k <= f.steps(); ++k)
        for (int i = 0; i < f.cells(); ++i) sum += tau * grid.hs[static_cast<std::size_t>(i)] * sq(f(i, k));
    return std::sqrt(sum);
}

double norm_b2_coeff(std::span<const double> d) {
    double sum = 0.0;
    for (double x : d) sum += x * x;
    return std::sqrt(sum);
}

double ControlNorms::max() const { return std::max({s, g, f, b, c}); }

ControlNorms discrete_norms(const DiscreteControl& v, const MovingGrid& grid, double tau) {
    check_lengths(v);
    if (v.f.steps() != v.n()) throw InvalidArgument("source field has wrong number of time steps");
    return {norm_b2_2(v.s, tau), norm_b2_1(v.g, tau), norm_l2_cells(v.f, grid, tau),
            norm_b2_coeff(v.b), norm_b2_coeff(v.c)};
}

AdmissibilityReport is_admissible(const DiscreteControl& v, const MovingGrid& grid, double tau,
                                  const ControlBounds& bounds) {
    AdmissibilityReport rep;
    rep.norms = discrete_norms(v, grid, tau);
    auto violate = [&](std::string what) {
        rep.admissible = false;
        rep.violations.push_back(std::move(what));
    };
    for (std::size_t k = 0; k < v.s.size(); ++k) {
        std::ostringstream msg;
        if (v.s[k] < bounds.delta) {
            msg << "boundary: s_" << k << " = " << v.s[k] << " < delta = " << bounds.delta;
            violate(msg.str());
        } else if (v.s[k] > bounds.ell) {
            msg << "boundary: s_" << k << " = " << v.s[k] << " > ell = " << bounds.ell;
            violate(msg.str());
        }
    }
    const double tol = 1e-12 * std::max(1.0, std::abs(bounds.s0));
    for (std::size_t k = 0; k <= 1; ++k)
        if (std::abs(v.s[k] - bounds.s0) > tol) {
            std::ostringstream msg;
            msg << "initial boundary: s_" << k << " = " << v.s[k] << " != s0 = " << bounds.s0;
            violate(msg.str());
        }
    const double limit = bounds.R * (1.0 + kNormSlack);
    const std::pair<const char*, double> blocks[] = {
        {"s (b_2^2)", rep.norms.s}, {"g (b_2^1)", rep.norms.g}, {"f (l_2)", rep.norms.f},
        {"b (b_2)", rep.norms.b},   {"c (b_2)", rep.norms.c}};
    for (const auto& [name, value] : blocks)
        if (value > limit) {
            std::ostringstream msg;
            msg << "norm: " << name << " = " << value << " > R = " << bounds.R;
            violate(msg.str());
        }
    return rep;
}

BoundaryCurve boundary_curve(std::span<const double> s, double tau) {
    if (s.size() < 2) throw InvalidArgument("boundary curve needs at least 2 values");
    auto interp = std::make_shared<BoundaryInterpolant>(
        BoundaryInterpolant{std::vector<double>(s.begin(), s.end()), tau});
    return {[interp](double t) { return interp->value(t); },
            [interp](double t) { return interp->slope(t); },
            [interp](double t) { return interp->curvature(t); }};
}

std::vector<double> sample_boundary(const TimeFn& s, double s0, const TimeGrid& time) {
    std::vector<double> out(static_cast<std::size_t>(time.n) + 1, s0);
    for (int k = 2; k <= time.n; ++k) out[static_cast<std::size_t>(k)] = s(time.t(k));
    return out;
}

DiscreteControl q_n(const ContinuousControl& v, double s0, const TimeGrid& time,
                    const MovingGrid& grid, const CoefficientBasis& basis) {
    DiscreteControl out;
    out.s = sample_boundary(v.s, s0, time);
    if (grid.levels() != time.n + 1) throw InvalidArgument("grid was built for a different n");
    for (int k = 0; k <= time.n; ++k)
        if (grid.xs[static_cast<std::size_t>(grid.active(k))] != out.s[static_cast<std::size_t>(k)] &&
            grid.snaps.empty())
            throw InvalidArgument("grid does not match the sampled boundary");
    out.g.resize(out.s.size());
    for (int k = 0; k <= time.n; ++k) out.g[static_cast<std::size_t>(k)] = v.g ? v.g(time.t(k)) : 0.0;
    out.f = cell_averages(v.f, grid, time, CellRange::All).values;
    out.b = basis.project(v.b);
    out.c = basis.project(v.c);
    return out;
}

ContinuousControl p_n(const DiscreteControl& v, const TimeGrid& time, const MovingGrid& grid,
                      const CoefficientBasis& basis) {
    check_lengths(v);
    ContinuousControl out;
    auto curve = boundary_curve(v.s, time.tau);
    out.s = std::move(curve.value);
    out.s_prime = std::move(curve.slope);
    out.s_second = std::move(curve.curvature);
    auto g = std::make_shared<LinearInterpolant>(LinearInterpolant{v.g, time.tau});
    out.g = [g](double t) { return g->value(t); };
    out.g_prime = [g](double t) { return g->slope(t); };

    auto cells = std::make_shared<std::pair<CellField, MovingGrid>>(v.f, grid);
    const double T = time.T, tau = time.tau;
    out.f = Field([cells, T, tau](double x, double t) {
        const auto& [f, gr] = *cells;
        if (x < 0.0 || x > gr.ell() || t < 0.0 || t > T) return 0.0;
        const int k = std::clamp(static_cast<int>(std::floor(t / tau)) + 1, 1, f.steps());
        return f(gr.cell_of(x), k);
    });

    auto basis_ptr = std::make_shared<CoefficientBasis>(basis);
    auto bc = std::make_shared<std::pair<std::vector<double>, std::vector<double>>>(v.b, v.c);
    out.b = Field([basis_ptr, bc](double x, double t) { return basis_ptr->expansion(bc->first, x, t).v; });
    out.c = Field([basis_ptr, bc](double x, double t) { return basis_ptr->expansion(bc->second, x, t).v; });
    out.b_grad = [basis_ptr, bc](double x, double t) {
        const auto e = basis_ptr->expansion(bc->first, x, t);
        return std::array<double, 2>{e.dx, e.dt};
    };
    out.c_grad = [basis_ptr, bc](double x, double t) {
        const auto e = basis_ptr->expansion(bc->second, x, t);
        return std::array<double, 2>{e.dx, e.dt};
    };
    out.t_breaks = time.nodes;
    out.x_breaks = grid.xs;
    return out;
}

ControlNorms continuous_norms(const ContinuousControl& v, double T, double ell, int panels) {
    ControlNorms out;
    const double h = 1e-4 * T;
    out.s = std::sqrt(integrate_time(
        [&](double t) {
            const double d1 = v.s_prime ? v.s_prime(t) : derivative(v.s, t, h);
            const double d2 = v.s_second ? v.s_second(t) : second_derivative(v.s, t, h);
            return sq(v.s(t)) + sq(d1) + sq(d2);
        },
        T, v.t_breaks, panels));
    if (v.g)
        out.g = std::sqrt(integrate_time(
            [&](double t) {
                const double d1 = v.g_prime ? v.g_prime(t) : derivative(v.g, t, h);
                return sq(v.g(t)) + sq(d1);
            },
            T, v.t_breaks, panels));
    if (!v.f.is_zero())
        out.f = std::sqrt(integrate_domain([&](double x, double t) { return sq(v.f(x, t)); }, ell, T,
                                           v.x_breaks, v.t_breaks, panels));
    out.b = surrogate_norm(v.b, v.b_grad, ell, T, panels);
    out.c = surrogate_norm(v.c, v.c_grad, ell, T, panels);
    return out;
}

CellField remap_cells(const CellField& f, const MovingGrid& from, const MovingGrid& to) {
    if (f.cells() != from.cells()) throw InvalidArgument("source field does not match its grid");
    CellField out(f.steps(), to.cells());
    for (int k = 1; k <= f.steps(); ++k) {
        std::size_t i = 0;
        for (std::size_t j = 0; j < to.hs.size(); ++j) {
            const double a = to.xs[j], b = to.xs[j + 1];
            while (i + 1 < from.hs.size() && from.xs[i + 1] <= a) ++i;
            double acc = 0.0;
            for (std::size_t q = i; q < from.hs.size() && from.xs[q] < b; ++q) {
                const double overlap = std::min(b, from.xs[q + 1]) - std::max(a, from.xs[q]);
                if (overlap > 0.0) acc += overlap * f(static_cast<int>(q), k);
            }
            out(static_cast<int>(j), k) = acc / (b - a);
        }
    }
    return out;
}

double boundary_lipschitz(std::span<const double> s, double tau) {
    double out = 0.0;
    for (std::size_t k = 1; k < s.size(); ++k) out = std::max(out, std::abs(s[k] - s[k - 1]) / tau);
    return out;
}

double lipschitz_bound(double T, double s_norm_b22) { return std::sqrt(T) * s_norm_b22; }

ProjectionResult project_admissible(const DiscreteControl& v, const MovingGrid& grid,
                                    const TimeGrid& time, const ControlBounds& bounds,
                                    const GridOptions& grid_options) {
    check_lengths(v);
    if (bounds.s0 < bounds.delta || bounds.s0 > bounds.ell)
        throw ConstraintViolation("s0 lies outside [delta, ell]");
    const double limit = bounds.R * (1.0 + kNormSlack);
    const double baseline_norm = bounds.s0 * std::sqrt(time.T);
    if (baseline_norm > limit)
        throw ConstraintViolation("constant boundary s0 already violates the norm bound R");

    ProjectionResult out{v, grid, false};
    DiscreteControl& w = out.control;
    for (std::size_t k = 0; k < w.s.size(); ++k) {
        const double clipped = k <= 1 ? bounds.s0 : std::clamp(w.s[k], bounds.delta, bounds.ell);
        if (clipped != w.s[k]) {
            w.s[k] = clipped;
            out.changed = true;
        }
    }

    if (norm_b2_2(w.s, time.tau) > limit) {
        const std::vector<double> dir = [&] {
            std::vector<double> d(w.s.size());
            for (std::size_t k = 0; k < d.size(); ++k) d[k] = w.s[k] - bounds.s0;
            return d;
        }();
        auto scaled = [&](double lambda) {
            std::vector<double> s(dir.size());
            for (std::size_t k = 0; k < s.size(); ++k) s[k] = bounds.s0 + lambda * dir[k];
            return s;
        };
        double lo = 0.0, hi = 1.0;
        for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
            const double mid = 0.5 * (lo + hi);
            (norm_b2_2(scaled(mid), time.tau) <= bounds.R ? lo : hi) = mid;
        }
        w.s = scaled(lo);
        out.changed = true;
    }

    if (w.s != v.s) {
        MovingGrid fresh = build_moving_grid(w.s, bounds.ell, bounds.delta, time.tau, grid_options);
        if (w.f.cells() == grid.cells()) w.f = remap_cells(w.f, grid, fresh);
        out.grid = std::move(fresh);
    }

    auto shrink = [&](std::vector<double>& block, double norm) {
        if (norm <= limit) return;
        const double factor = bounds.R / norm;
        for (double& x : block) x *= factor;
        out.changed = true;
    };
    shrink(w.g, norm_b2_1(w.g, time.tau));
    shrink(w.b, norm_b2_coeff(w.b));
    shrink(w.c, norm_b2_coeff(w.c));
    const double fnorm = norm_l2_cells(w.f, out.grid, time.tau);
    if (fnorm > limit) {
        const double factor = bounds.R / fnorm;
        for (double& x : w.f.matrix().values()) x *= factor;
        out.changed = true;
    }
    return out;
}

}  // namespace stefan
