#include "stefan/steklov.hpp"

#include <cmath>

#include "stefan/error.hpp"

namespace stefan {

namespace {

int cell_limit(const MovingGrid& grid, int k, CellRange range) {
    return range == CellRange::All ? grid.cells() : grid.active(k);
}

void check_cell(const MovingGrid& grid, const TimeGrid& time, int i, int k) {
    if (k < 1 || k > time.n) throw InvalidArgument("time cell " + std::to_string(k) + " outside 1..n");
    if (i < 0 || i >= grid.cells())
        throw InvalidArgument("spatial cell " + std::to_string(i) + " outside the grid");
}

double cell_mean_unchecked(const Field& d, const MovingGrid& grid, const TimeGrid& time, int i,
                           int k, const quad::AdaptiveRule& rule) {
    if (const auto c = d.constant_value()) return *c;
    const auto ui = static_cast<std::size_t>(i);
    return quad::mean_2d([&](double x, double t) { return d(x, t); }, grid.xs[ui], grid.xs[ui + 1],
                         time.t(k - 1), time.t(k), rule);
}

std::string describe(const MovingGrid& grid, const TimeGrid& time, const char* what) {
    return std::string(what) + " on " + std::to_string(grid.cells()) + " cells x " +
           std::to_string(time.n) + " steps";
}

}  // namespace

double cell_average(const Field& d, const MovingGrid& grid, const TimeGrid& time, int i, int k,
                    const quad::AdaptiveRule& rule) {
    check_cell(grid, time, i, k);
    return cell_mean_unchecked(d, grid, time, i, k, rule);
}

double time_average(const TimeFn& h, const TimeGrid& time, int k, const quad::AdaptiveRule& rule) {
    if (k < 1 || k > time.n) throw InvalidArgument("time cell " + std::to_string(k) + " outside 1..n");
    return quad::mean_1d(h, time.t(k - 1), time.t(k), rule);
}

double space_average(const Field& w, const MovingGrid& grid, int i, const quad::AdaptiveRule& rule) {
    if (i < 0 || i >= grid.cells()) throw InvalidArgument("spatial cell outside the grid");
    if (const auto c = w.constant_value()) return *c;
    const auto ui = static_cast<std::size_t>(i);
    return quad::mean_1d([&](double x) { return w(x, 0.0); }, grid.xs[ui], grid.xs[ui + 1], rule);
}

CellAverages cell_averages(const Field& d, const MovingGrid& grid, const TimeGrid& time,
                           CellRange range, const quad::AdaptiveRule& rule) {
    CellAverages out{CellField(time.n, grid.cells()), describe(grid, time, "field average")};
    if (d.is_zero()) return out;
    const int n = time.n, N = grid.cells();
    // Errors thrown inside the parallel region are captured and rethrown.
    std::exception_ptr failure;
#pragma omp parallel for collapse(2) schedule(dynamic, 16)
    for (int k = 1; k <= n; ++k)
        for (int i = 0; i < N; ++i) {
            if (i >= cell_limit(grid, k, range)) continue;
            try {
                out.values(i, k) = cell_mean_unchecked(d, grid, time, i, k, rule);
            } catch (...) {
#pragma omp critical(stefan_steklov_failure)
                if (!failure) failure = std::current_exception();
            }
        }
    if (failure) std::rethrow_exception(failure);
    return out;
}

CellAverages cell_averages_serial(const Field& d, const MovingGrid& grid, const TimeGrid& time,
                                  CellRange range, const quad::AdaptiveRule& rule) {
    CellAverages out{CellField(time.n, grid.cells()), describe(grid, time, "field average")};
    if (d.is_zero()) return out;
    for (int k = 1; k <= time.n; ++k)
        for (int i = 0; i < cell_limit(grid, k, range); ++i)
            out.values(i, k) = cell_mean_unchecked(d, grid, time, i, k, rule);
    return out;
}

TraceAverages trace_averages(const TimeFn& s, const TimeFn& s_prime, const Field& chi,
                             const Field& gamma, const TimeGrid& time, int k, double ell,
                             const quad::AdaptiveRule& rule) {
    if (k < 1 || k > time.n) throw InvalidArgument("time cell " + std::to_string(k) + " outside 1..n");
    const double t0 = time.t(k - 1), t1 = time.t(k);
    auto position = [&](double t) {
        const double x = s(t);
        if (!(x >= 0.0 && x <= ell))
            throw ConstraintViolation("boundary s(" + std::to_string(t) + ") = " + std::to_string(x) +
                                      " leaves [0, ell]");
        return x;
    };
    auto slope = [&](double t) {
        if (s_prime) return s_prime(t);
        const double eps = 1e-6 * time.T;
        return (s(t + eps) - s(t - eps)) / (2.0 * eps);
    };
    TraceAverages out;
    out.chi = quad::mean_1d([&](double t) { return chi(position(t), t); }, t0, t1, rule);
    if (gamma.is_zero()) {
        // still validate the boundary range for the whole step
        quad::mean_1d(position, t0, t1, rule);
    } else {
        out.gamma_sprime = quad::mean_1d(
            [&](double t) { return gamma(position(t), t) * slope(t); }, t0, t1, rule);
    }
    return out;
}

namespace {

void coefficient_cell(const std::vector<double>& raw, const CoefficientBasis& basis,
                      const MovingGrid& grid, const TimeGrid& time, int i, int k, CellField& out) {
    const auto ui = static_cast<std::size_t>(i);
    double sum = 0.0;
    for (std::size_t r = 0; r < raw.size(); ++r) {
        if (raw[r] == 0.0) continue;
        sum += raw[r] * basis.raw_cell_mean(static_cast<int>(r), grid.xs[ui], grid.xs[ui + 1],
                                            time.t(k - 1), time.t(k));
    }
    out(i, k) = sum;
}

bool all_zero(std::span<const double> v) {
    for (double x : v)
        if (x != 0.0) return false;
    return true;
}

}  // namespace

CellAverages coefficient_cell_averages(std::span<const double> coords,
                                       const CoefficientBasis& basis, const MovingGrid& grid,
                                       const TimeGrid& time, CellRange range) {
    CellAverages out{CellField(time.n, grid.cells()), describe(grid, time, "basis expansion average")};
    if (all_zero(coords)) return out;
    const auto raw = basis.to_raw(coords);
    const int n = time.n, N = grid.cells();
#pragma omp parallel for collapse(2) schedule(static)
    for (int k = 1; k <= n; ++k)
        for (int i = 0; i < N; ++i)
            if (i < cell_limit(grid, k, range)) coefficient_cell(raw, basis, grid, time, i, k, out.values);
    return out;
}

CellAverages coefficient_cell_averages_serial(std::span<const double> coords,
                                              const CoefficientBasis& basis,
                                              const MovingGrid& grid, const TimeGrid& time,
                                              CellRange range) {
    CellAverages out{CellField(time.n, grid.cells()), describe(grid, time, "basis expansion average")};
    if (all_zero(coords)) return out;
    const auto raw = basis.to_raw(coords);
    for (int k = 1; k <= time.n; ++k)
        for (int i = 0; i < cell_limit(grid, k, range); ++i)
            coefficient_cell(raw, basis, grid, time, i, k, out.values);
    return out;
}

double p_backward_x_difference(const CellField& p_avgs, const MovingGrid& grid, int i, int k) {
    if (i < 1 || i >= grid.cells())
        throw InvalidArgument("backward x-difference needs 1 <= i < N, got i = " + std::to_string(i));
    return (p_avgs(i, k) - p_avgs(i - 1, k)) / grid.hs[static_cast<std::size_t>(i - 1)];
}

}  // namespace stefan
