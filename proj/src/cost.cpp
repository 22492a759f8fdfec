#include "stefan/cost.hpp"

#include <algorithm>
#include <cmath>

#include "stefan/error.hpp"
#include "stefan/quadrature.hpp"
#include "stefan/steklov.hpp"

namespace stefan {

namespace {

template <class F>
double split_mean(const F& f, double a, double b, const std::vector<double>& breaks) {
    auto lo = std::upper_bound(breaks.begin(), breaks.end(), a);
    const auto hi = std::lower_bound(breaks.begin(), breaks.end(), b);
    if (lo >= hi) return quad::mean_1d(f, a, b);
    double acc = 0.0, left = a;
    for (; lo != hi; ++lo) {
        acc += (*lo - left) * quad::mean_1d(f, left, *lo);
        left = *lo;
    }
    acc += (b - left) * quad::mean_1d(f, left, b);
    return acc / (b - a);
}

/// Kinks of the reflected interpolant of nodes xs on [0, ell].
std::vector<double> reflected_kinks(std::vector<double> kinks, double ell) {
    const double s = kinks.back();
    double top = s;
    while (top < ell) {
        const std::size_t count = kinks.size();
        for (std::size_t j = count; j-- > 0;) {
            const double y = 2.0 * top - kinks[j];
            if (y > top) kinks.push_back(y);
        }
        top *= 2.0;
    }
    std::sort(kinks.begin(), kinks.end());
    kinks.erase(std::unique(kinks.begin(), kinks.end()), kinks.end());
    return kinks;
}

}  // namespace

DiscreteMeasurements discretize(const Measurements& meas, const MovingGrid& grid, const TimeGrid& time) {
    DiscreteMeasurements out;
    out.s_bar = meas.s_bar;
    out.w.resize(static_cast<std::size_t>(grid.cells()));
    const bool w_const = meas.w.constant_value().has_value();
    for (int i = 0; i < grid.cells(); ++i) {
        const auto ui = static_cast<std::size_t>(i);
        out.w[ui] = w_const ? *meas.w.constant_value()
                            : split_mean([&](double x) { return meas.w(x, 0.0); }, grid.xs[ui], grid.xs[ui + 1],
                                         meas.w_breaks);
    }
    out.mu.assign(static_cast<std::size_t>(time.n) + 1, 0.0);
    if (meas.mu)
        for (int k = 1; k <= time.n; ++k)
            out.mu[static_cast<std::size_t>(k)] = split_mean(meas.mu, time.t(k - 1), time.t(k), meas.mu_breaks);
    return out;
}

CostBreakdown eval_discrete_cost(const DiscreteState& state, const DiscreteControl& v,
                                 const DiscreteMeasurements& meas, const CostWeights& weights) {
    const int n = state.n();
    if (v.n() != n) throw InvalidArgument("control and state have different n");
    if (static_cast<int>(meas.w.size()) != state.grid->cells())
        throw InvalidArgument("final-temperature data has " + std::to_string(meas.w.size()) +
                              " cells, grid has " + std::to_string(state.grid->cells()));
    if (static_cast<int>(meas.mu.size()) != n + 1)
        throw InvalidArgument("boundary-temperature data does not match n");

    CostBreakdown out;
    out.weights = weights;
    out.resolution = n;
    const auto& hs = state.grid->hs;
    const auto un = state.row(n);
    const int mn = state.active(n);
    for (int i = 0; i < mn; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        const double d = un[ui] - meas.w[ui];
        out.term_final_temp += hs[ui] * d * d;
    }
    const double tau = state.time.tau;
    for (int k = 1; k <= n; ++k) {
        const double d = state.u(static_cast<std::size_t>(k), static_cast<std::size_t>(state.active(k))) -
                         meas.mu[static_cast<std::size_t>(k)];
        out.term_boundary_temp += tau * d * d;
    }
    const double ds = v.s.back() - meas.s_bar;
    out.term_final_position = ds * ds;
    out.total = weights.beta0 * out.term_final_temp + weights.beta1 * out.term_boundary_temp +
                weights.beta2 * out.term_final_position;
    return out;
}

CostBreakdown eval_discrete_cost(const DiscreteState& state, const DiscreteControl& v,
                                 const Measurements& meas, const CostWeights& weights) {
    return eval_discrete_cost(state, v, discretize(meas, *state.grid, state.time), weights);
}

CostBreakdown eval_continuous_cost(const ContinuousControl& v, const ProblemData& data,
                                   const Measurements& meas, const CostWeights& weights,
                                   const FineSolve& fine) {
    const auto& bd = data.bounds;
    if (!v.s) throw InvalidArgument("continuous control has no boundary function");
    if (std::abs(v.s(0.0) - bd.s0) > 1e-12 * std::max(1.0, std::abs(bd.s0)))
        throw ConstraintViolation("s(0) differs from s0");
    const TimeGrid time = build_time_grid(data.T, fine.fine_n);
    const std::vector<double> s = sample_boundary(v.s, bd.s0, time);
    const MovingGrid grid = build_moving_grid(s, bd.ell, bd.delta, time.tau, fine.grid);
    auto basis = std::make_shared<const CoefficientBasis>(bd.ell, data.T, fine.fine_n + 1);
    const DiscreteControl dv = q_n(v, bd.s0, time, grid, *basis);
    const DiscreteState state = run_forward(dv, data, grid, time, basis);
    return eval_discrete_cost(state, dv, meas, weights);
}

Measurements measurements_from_state(const DiscreteState& state, const DiscreteControl& v) {
    Measurements out;
    const int n = state.n();
    const auto m = static_cast<std::size_t>(state.active(n));
    auto xs = std::make_shared<std::vector<double>>(state.grid->xs.begin(), state.grid->xs.begin() + m + 1);
    const auto row = state.row(n);
    auto vals = std::make_shared<std::vector<double>>(row.begin(), row.begin() + m + 1);
    out.w = Field([xs, vals](double x, double) { return ReflectedInterpolant(*xs, *vals)(x); });
    auto mu = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n) + 1, 0.0);
    for (int k = 1; k <= n; ++k)
        (*mu)[static_cast<std::size_t>(k)] =
            state.u(static_cast<std::size_t>(k), static_cast<std::size_t>(state.active(k)));
    const double tau = state.time.tau;
    out.mu = [mu, tau, n](double t) {
        const int k = std::clamp(static_cast<int>(std::ceil(t / tau - 1e-12)), 1, n);
        return (*mu)[static_cast<std::size_t>(k)];
    };
    out.s_bar = v.s.back();
    out.w_breaks = reflected_kinks(*xs, state.grid->ell());
    out.mu_breaks = state.time.nodes;
    return out;
}

DiscreteMeasurements discrete_measurements_from_state(const DiscreteState& state, const DiscreteControl& v) {
    DiscreteMeasurements out;
    const int n = state.n();
    const auto row = state.row(n);
    out.w.assign(row.begin(), row.begin() + state.grid->cells());
    out.mu.assign(static_cast<std::size_t>(n) + 1, 0.0);
    for (int k = 1; k <= n; ++k)
        out.mu[static_cast<std::size_t>(k)] =
            state.u(static_cast<std::size_t>(k), static_cast<std::size_t>(state.active(k)));
    out.s_bar = v.s.back();
    return out;
}

}  // namespace stefan
