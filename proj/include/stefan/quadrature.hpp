#pragma once

#include <array>
#include <cmath>
#include <string>

#include "stefan/error.hpp"

namespace stefan::quad {

/// Composite 2-point Gauss rule refined by panel doubling until the mean
/// changes by less than `rel_tol` relative to the mean of |f|.
struct AdaptiveRule {
    double rel_tol = 1e-10;
    int initial_panels = 8;
    int max_panels = 1024;
};

namespace detail {
inline constexpr double kGauss2 = 0.57735026918962576451;  // 1/sqrt(3)

template <class F>
void gauss2_1d(const F& f, double a, double b, int panels, double& mean, double& abs_mean) {
    const double w = (b - a) / panels;
    double sum = 0.0, abs_sum = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double mid = a + (p + 0.5) * w;
        const double off = 0.5 * w * kGauss2;
        const double f0 = f(mid - off), f1 = f(mid + off);
        if (!std::isfinite(f0) || !std::isfinite(f1))
            throw NumericError("non-finite integrand value");
        sum += f0 + f1;
        abs_sum += std::abs(f0) + std::abs(f1);
    }
    mean = sum / (2.0 * panels);
    abs_mean = abs_sum / (2.0 * panels);
}

template <class F>
void gauss2_2d(const F& f, double x0, double x1, double t0, double t1, int panels,
               double& mean, double& abs_mean) {
    const double wx = (x1 - x0) / panels, wt = (t1 - t0) / panels;
    double sum = 0.0, abs_sum = 0.0;
    for (int q = 0; q < panels; ++q) {
        const double tm = t0 + (q + 0.5) * wt, to = 0.5 * wt * kGauss2;
        const double ts[2] = {tm - to, tm + to};
        for (int p = 0; p < panels; ++p) {
            const double xm = x0 + (p + 0.5) * wx, xo = 0.5 * wx * kGauss2;
            const double xs[2] = {xm - xo, xm + xo};
            for (double t : ts)
                for (double x : xs) {
                    const double v = f(x, t);
                    if (!std::isfinite(v)) throw NumericError("non-finite integrand value");
                    sum += v;
                    abs_sum += std::abs(v);
                }
        }
    }
    const double count = 4.0 * panels * panels;
    mean = sum / count;
    abs_mean = abs_sum / count;
}

inline bool converged(double prev, double cur, double scale, double rel_tol) {
    return std::abs(cur - prev) <= rel_tol * scale || scale == 0.0;
}
}  // namespace detail

/// Mean of f over [a, b].
template <class F>
double mean_1d(const F& f, double a, double b, const AdaptiveRule& rule = {}) {
    if (!(b > a)) return f(a);
    double prev = 0.0, scale = 0.0;
    detail::gauss2_1d(f, a, b, rule.initial_panels, prev, scale);
    for (int panels = 2 * rule.initial_panels; panels <= rule.max_panels; panels *= 2) {
        double cur = 0.0;
        detail::gauss2_1d(f, a, b, panels, cur, scale);
        if (detail::converged(prev, cur, scale, rule.rel_tol)) return cur;
        prev = cur;
    }
    throw NumericError("1-d quadrature did not reach tolerance on [" + std::to_string(a) + ", " +
                       std::to_string(b) + "]");
}

/// Mean of f over the rectangle [x0, x1] x [t0, t1].
template <class F>
double mean_2d(const F& f, double x0, double x1, double t0, double t1,
               const AdaptiveRule& rule = {}) {
    double prev = 0.0, scale = 0.0;
    detail::gauss2_2d(f, x0, x1, t0, t1, rule.initial_panels, prev, scale);
    for (int panels = 2 * rule.initial_panels; panels <= rule.max_panels; panels *= 2) {
        double cur = 0.0;
        detail::gauss2_2d(f, x0, x1, t0, t1, panels, cur, scale);
        if (detail::converged(prev, cur, scale, rule.rel_tol)) return cur;
        prev = cur;
    }
    throw NumericError("2-d quadrature did not reach tolerance on cell [" + std::to_string(x0) +
                       ", " + std::to_string(x1) + "] x [" + std::to_string(t0) + ", " +
                       std::to_string(t1) + "]");
}

/// 5-point Gauss-Legendre nodes/weights on [-1, 1]; exact to degree 9.
inline constexpr std::array<double, 5> kGL5Nodes = {
    -0.90617984593866399280, -0.53846931010568309104, 0.0,
    0.53846931010568309104, 0.90617984593866399280};
inline constexpr std::array<double, 5> kGL5Weights = {
    0.23692688505618908751, 0.47862867049936646804, 0.56888888888888888889,
    0.47862867049936646804, 0.23692688505618908751};

/// Integral of f over [a, b] with a fixed composite 5-point rule.
template <class F>
double integrate_gl5(const F& f, double a, double b, int panels) {
    const double w = (b - a) / panels;
    double sum = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double mid = a + (p + 0.5) * w;
        for (std::size_t q = 0; q < 5; ++q) sum += kGL5Weights[q] * f(mid + 0.5 * w * kGL5Nodes[q]);
    }
    return 0.5 * w * sum;
}

}  // namespace stefan::quad
