#include "stefan/forward.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "stefan/error.hpp"

namespace stefan {

TridiagonalSystem assemble_step(const MovingGrid& grid, int k, std::span<const double> prev_row,
                                const StepCoefficients& co, double tau) {
    if (k < 1 || k >= grid.levels()) throw InvalidArgument("assemble_step: level outside 1..n");
    const int m = grid.active(k);
    if (static_cast<int>(co.a.size()) < m || static_cast<int>(co.f.size()) < m)
        throw InvalidArgument("assemble_step: coefficients do not cover the active cells of level " +
                              std::to_string(k));
    if (static_cast<int>(prev_row.size()) < m + 1)
        throw InvalidArgument("assemble_step: previous level is shorter than the active range");

    const auto& hs = grid.hs;
    const auto um = static_cast<std::size_t>(m);
    TridiagonalSystem sys;
    sys.lower.assign(um + 1, 0.0);
    sys.diag.assign(um + 1, 0.0);
    sys.upper.assign(um + 1, 0.0);
    sys.rhs.assign(um + 1, 0.0);

    // Row 0, flux boundary.
    const double h = hs[0];
    sys.diag[0] = co.a[0] + h * co.b[0] - h * h * co.c[0] + h * h / tau;
    sys.upper[0] = -(co.a[0] + h * co.b[0]);
    sys.rhs[0] = h * h / tau * prev_row[0] - h * h * co.f[0] - h * co.flux + h * co.p[0];

    for (std::size_t i = 1; i < um; ++i) {
        const double hi = hs[i], hm = hs[i - 1];
        const double a_prev = co.a[i - 1], a_i = co.a[i], b_i = co.b[i], c_i = co.c[i];
        sys.lower[i] = -a_prev * hi;
        sys.diag[i] = a_prev * hi + a_i * hm + b_i * hi * hm - c_i * hi * hi * hm + hi * hi * hm / tau;
        sys.upper[i] = -(a_i * hm + b_i * hi * hm);
        sys.rhs[i] = -hi * hi * hm * co.f[i] + hi * hm * (co.p[i] - co.p[i - 1]) +
                     hi * hi * hm / tau * prev_row[i];
    }

    // Row m, Stefan condition along s^n.
    const double hl = hs[um - 1], al = co.a[um - 1];
    sys.lower[um] = -al;
    sys.diag[um] = al;
    sys.rhs[um] = -hl * (co.trace.gamma_sprime - co.trace.chi) - hl * co.p[um - 1];
    return sys;
}

bool diagonally_dominant(const TridiagonalSystem& sys) {
    const std::size_t n = sys.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double off = std::abs(sys.lower[i]) + std::abs(sys.upper[i]);
        const double d = std::abs(sys.diag[i]);
        if (i + 1 < n) {
            if (!(d > off)) return false;
        } else if (!(d >= off * (1.0 - 1e-14))) {
            return false;
        }
    }
    return true;
}

std::vector<double> solve_step(const TridiagonalSystem& sys, int level) {
    const std::size_t n = sys.size();
    if (n == 0) return {};
    std::vector<double> cp(n, 0.0), dp(n, 0.0), x(n, 0.0);
    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        scale = std::max({scale, std::abs(sys.diag[i]), std::abs(sys.lower[i]), std::abs(sys.upper[i])});
    const double tiny = std::numeric_limits<double>::epsilon() * scale;
    auto pivot_fail = [&](std::size_t row) {
        throw SingularSystem(level, "zero pivot in row " + std::to_string(row) + " of level " +
                                        std::to_string(level) + "; the time step is too large, try halving tau");
    };
    double denom = sys.diag[0];
    if (!(std::abs(denom) > tiny)) pivot_fail(0);
    cp[0] = sys.upper[0] / denom;
    dp[0] = sys.rhs[0] / denom;
    for (std::size_t i = 1; i < n; ++i) {
        denom = sys.diag[i] - sys.lower[i] * cp[i - 1];
        if (!(std::abs(denom) > tiny)) pivot_fail(i);
        cp[i] = sys.upper[i] / denom;
        dp[i] = (sys.rhs[i] - sys.lower[i] * dp[i - 1]) / denom;
    }
    x[n - 1] = dp[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) x[i] = dp[i] - cp[i] * x[i + 1];
    return x;
}

ReflectedInterpolant::ReflectedInterpolant(std::span<const double> xs, std::span<const double> values)
    : xs_(xs), values_(values), s_(xs.empty() ? 0.0 : xs.back()) {
    if (xs.size() < 2 || xs.size() != values.size())
        throw InvalidArgument("reflected interpolant needs matching node and value arrays of length >= 2");
    if (!(s_ > 0.0)) throw InvalidArgument("reflected interpolant needs a positive boundary");
}

double ReflectedInterpolant::fold(double x, int* reflections) const {
    int count = 0;
    x = std::abs(x);
    while (x > s_) {
        // smallest r with x <= 2^r s, then mirror about 2^r s
        double top = 2.0 * s_;
        while (top < x) top *= 2.0;
        x = top - x;
        ++count;
    }
    if (reflections) *reflections = count;
    return x;
}

namespace {
std::size_t segment(std::span<const double> xs, double x) {
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    const auto idx = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - xs.begin() - 1, 0));
    return std::min(idx, xs.size() - 2);
}
}  // namespace

double ReflectedInterpolant::operator()(double x) const {
    const double y = fold(x);
    const std::size_t i = segment(xs_, y);
    const double w = (y - xs_[i]) / (xs_[i + 1] - xs_[i]);
    return values_[i] + w * (values_[i + 1] - values_[i]);
}

double ReflectedInterpolant::slope(double x) const {
    int r = 0;
    const double y = fold(x, &r);
    const std::size_t i = segment(xs_, y);
    const double d = (values_[i + 1] - values_[i]) / (xs_[i + 1] - xs_[i]);
    return (r % 2 == 0) ? d : -d;
}

ReflectedInterpolant reflect_extend(std::span<const double> xs, std::span<const double> values) {
    return ReflectedInterpolant(xs, values);
}

LevelSetup prepare_level(const ProblemData& data, const TimeGrid& time, const MovingGrid& grid,
                         std::span<const double> s, std::shared_ptr<const CoefficientBasis> basis) {
    if (static_cast<int>(s.size()) != time.n + 1 || grid.levels() != time.n + 1)
        throw InvalidArgument("boundary vector, grid and time grid disagree on n");
    LevelSetup setup;
    setup.time = time;
    setup.s.assign(s.begin(), s.end());
    setup.grid = std::make_shared<const MovingGrid>(grid);
    setup.basis = std::move(basis);
    setup.a = cell_averages(data.a, grid, time, CellRange::Active).values;
    setup.p = cell_averages(data.p, grid, time, CellRange::Active).values;
    const auto curve = boundary_curve(s, time.tau);
    setup.traces.resize(static_cast<std::size_t>(time.n) + 1);
    for (int k = 1; k <= time.n; ++k)
        setup.traces[static_cast<std::size_t>(k)] =
            trace_averages(curve.value, curve.slope, data.chi, data.gamma, time, k, data.bounds.ell);
    return setup;
}

LevelSetup prepare_level(const ProblemData& data, const TimeGrid& time, std::span<const double> s,
                         const GridOptions& grid_options,
                         std::shared_ptr<const CoefficientBasis> basis) {
    const MovingGrid grid = build_moving_grid(s, data.bounds.ell, data.bounds.delta, time.tau, grid_options);
    return prepare_level(data, time, grid, s, std::move(basis));
}

ReflectedInterpolant DiscreteState::spatial(int k) const {
    const auto m = static_cast<std::size_t>(active(k));
    return ReflectedInterpolant(std::span<const double>(grid->xs).first(m + 1), row(k).first(m + 1));
}

namespace {

void extend_row(const MovingGrid& grid, std::span<double> row, int m) {
    const auto um = static_cast<std::size_t>(m);
    const ReflectedInterpolant hat(std::span<const double>(grid.xs).first(um + 1),
                                   std::span<const double>(row.data(), um + 1));
    for (std::size_t i = um + 1; i < row.size(); ++i) row[i] = hat(grid.xs[i]);
}

}  // namespace

DiscreteState run_forward(const DiscreteControl& v, const LevelSetup& setup, const ProblemData& data,
                          const SolveOptions& options) {
    const int n = setup.time.n;
    if (v.n() != n) throw InvalidArgument("control resolution differs from the level setup");
    if (v.s != setup.s) throw InvalidArgument("control boundary differs from the level setup");
    const MovingGrid& grid = *setup.grid;
    const int N = grid.cells();
    if (v.f.steps() != n || v.f.cells() != N) throw InvalidArgument("source field does not match the grid");
    const double tau = setup.time.tau;

    DiscreteState st;
    st.time = setup.time;
    st.grid = setup.grid;
    st.u = Matrix(static_cast<std::size_t>(n) + 1, static_cast<std::size_t>(N) + 1);

    {
        auto row0 = st.u.row(0);
        const int m0 = grid.active(0);
        for (int i = 0; i <= m0; ++i)
            row0[static_cast<std::size_t>(i)] = data.phi(grid.xs[static_cast<std::size_t>(i)], 0.0);
        extend_row(grid, row0, m0);
    }

    const bool has_b = std::any_of(v.b.begin(), v.b.end(), [](double x) { return x != 0.0; });
    const bool has_c = std::any_of(v.c.begin(), v.c.end(), [](double x) { return x != 0.0; });
    if ((has_b || has_c) && !setup.basis) throw InvalidArgument("coefficient controls need a basis");
    const CellField b_avg = has_b ? coefficient_cell_averages(v.b, *setup.basis, grid, setup.time).values
                                  : CellField(n, N);
    const CellField c_avg = has_c ? coefficient_cell_averages(v.c, *setup.basis, grid, setup.time).values
                                  : CellField(n, N);

    st.steps.resize(static_cast<std::size_t>(n));
    for (int k = 1; k <= n; ++k) {
        const int m = grid.active(k);
        StepCoefficients& co = st.steps[static_cast<std::size_t>(k - 1)];
        auto take = [&](const CellField& field) {
            const auto lvl = field.level(k);
            return std::vector<double>(lvl.begin(), lvl.begin() + m);
        };
        co.a = take(setup.a);
        co.p = take(setup.p);
        co.b = take(b_avg);
        co.c = take(c_avg);
        co.f = take(v.f);
        co.flux = 0.5 * (v.g[static_cast<std::size_t>(k - 1)] + v.g[static_cast<std::size_t>(k)]);
        co.trace = setup.traces[static_cast<std::size_t>(k)];

        const TridiagonalSystem sys = assemble_step(grid, k, st.u.row(static_cast<std::size_t>(k - 1)), co, tau);
        if (!diagonally_dominant(sys))
            throw SingularSystem(k, "step system at level " + std::to_string(k) +
                                        " is not diagonally dominant; the time step is too large, try halving tau");
        const std::vector<double> sol = options.step_solver ? options.step_solver(sys) : solve_step(sys, k);
        auto row = st.u.row(static_cast<std::size_t>(k));
        std::copy(sol.begin(), sol.end(), row.begin());
        extend_row(grid, row, m);
    }
    return st;
}

DiscreteState run_forward(const DiscreteControl& v, const ProblemData& data, const MovingGrid& grid,
                          const TimeGrid& time, std::shared_ptr<const CoefficientBasis> basis) {
    const LevelSetup setup = prepare_level(data, time, grid, v.s, std::move(basis));
    return run_forward(v, setup, data);
}

int StateInterpolation::level_of(double t) const {
    const auto& time = state_->time;
    if (t <= 0.0) return 0;
    if (t >= time.T) return time.n;
    return std::clamp(static_cast<int>(std::ceil(t / time.tau - 1e-12)), 1, time.n);
}

double StateInterpolation::u_tau(double x, double t) const { return state_->spatial(level_of(t))(x); }

double StateInterpolation::u_tau_x(double x, double t) const {
    return state_->spatial(level_of(t)).slope(x);
}

double StateInterpolation::u_hat(double x, double t) const {
    const auto& time = state_->time;
    if (t <= 0.0) return state_->spatial(0)(x);
    if (t >= time.T) return state_->spatial(time.n)(x);
    const int k = level_of(t);
    const double lo = state_->spatial(k - 1)(x), hi = state_->spatial(k)(x);
    return lo + (hi - lo) / time.tau * (t - time.t(k - 1));
}

double StateInterpolation::u_hat_x(double x, double t) const {
    const auto& time = state_->time;
    if (t <= 0.0) return state_->spatial(0).slope(x);
    if (t >= time.T) return state_->spatial(time.n).slope(x);
    const int k = level_of(t);
    const double lo = state_->spatial(k - 1).slope(x), hi = state_->spatial(k).slope(x);
    return lo + (hi - lo) / time.tau * (t - time.t(k - 1));
}

double StateInterpolation::u_hat_t(double x, double t) const {
    const auto& time = state_->time;
    if (t <= 0.0 || t >= time.T) return 0.0;
    const int k = level_of(t);
    return (state_->spatial(k)(x) - state_->spatial(k - 1)(x)) / time.tau;
}

double StateInterpolation::u_tilde(double x, double t) const {
    const int k = std::max(level_of(t), 1);
    const int i = state_->grid->cell_of(x);
    return state_->u(static_cast<std::size_t>(k), static_cast<std::size_t>(i));
}

IdentityResidual summation_identity_residual(const DiscreteState& state, int k,
                                             std::span<const double> eta) {
    if (k < 1 || k > state.n()) throw InvalidArgument("identity residual needs 1 <= k <= n");
    const int m = state.active(k);
    if (static_cast<int>(eta.size()) != m + 1)
        throw InvalidArgument("test vector must have m(k)+1 = " + std::to_string(m + 1) + " entries");
    const auto& co = state.coefficients(k);
    const auto& hs = state.grid->hs;
    const auto u = state.row(k);
    const auto u_old = state.row(k - 1);
    const double tau = state.time.tau;

    IdentityResidual r;
    auto add = [&](double term) {
        r.value += term;
        r.scale += std::abs(term);
    };
    for (std::size_t i = 0; i < static_cast<std::size_t>(m); ++i) {
        const double h = hs[i];
        const double ux = (u[i + 1] - u[i]) / h;
        const double ex = (eta[i + 1] - eta[i]) / h;
        const double ut = (u[i] - u_old[i]) / tau;
        add(h * co.a[i] * ux * ex);
        add(-h * co.b[i] * ux * eta[i]);
        add(-h * co.c[i] * u[i] * eta[i]);
        add(h * co.f[i] * eta[i]);
        add(h * co.p[i] * ex);
        add(h * ut * eta[i]);
    }
    add((co.trace.gamma_sprime - co.trace.chi) * eta[static_cast<std::size_t>(m)]);
    add(co.flux * eta[0]);
    return r;
}

double max_canonical_residual(const DiscreteState& state) {
    double worst = 0.0;
    for (int k = 1; k <= state.n(); ++k) {
        const int m = state.active(k);
        std::vector<double> eta(static_cast<std::size_t>(m) + 1, 0.0);
        for (int i = 0; i <= m; ++i) {
            eta[static_cast<std::size_t>(i)] = 1.0;
            const auto r = summation_identity_residual(state, k, eta);
            worst = std::max(worst, std::abs(r.value) / (r.scale + 1e-300));
            eta[static_cast<std::size_t>(i)] = 0.0;
        }
    }
    return worst;
}

}  // namespace stefan
