#pragma once

#include <span>
#include <string>

#include "stefan/basis.hpp"
#include "stefan/control.hpp"
#include "stefan/field.hpp"
#include "stefan/grid.hpp"
#include "stefan/quadrature.hpp"

namespace stefan {

/// Space-time cell averages together with what produced them.
struct CellAverages {
    CellField values;
    std::string provenance;
};

enum class CellRange {
    Active,  ///< only i < m(k) at level k; other entries are zero
    All,     ///< every cell of the grid
};

/// Mean of d over (x_i, x_{i+1}) x (t_{k-1}, t_k).
double cell_average(const Field& d, const MovingGrid& grid, const TimeGrid& time, int i, int k,
                    const quad::AdaptiveRule& rule = {});

/// Mean of h over (t_{k-1}, t_k), k >= 1.
double time_average(const TimeFn& h, const TimeGrid& time, int k,
                    const quad::AdaptiveRule& rule = {});

/// Mean of w over (x_i, x_{i+1}).
double space_average(const Field& w, const MovingGrid& grid, int i,
                     const quad::AdaptiveRule& rule = {});

/// Cell averages of d over the selected cells, OpenMP-parallel over (i, k).
/// Each entry depends only on its own cell, so the result is independent of
/// scheduling.
CellAverages cell_averages(const Field& d, const MovingGrid& grid, const TimeGrid& time,
                           CellRange range, const quad::AdaptiveRule& rule = {});

/// Serial reference for cell_averages.
CellAverages cell_averages_serial(const Field& d, const MovingGrid& grid, const TimeGrid& time,
                                  CellRange range, const quad::AdaptiveRule& rule = {});

struct TraceAverages {
    double chi = 0.0;          ///< (1/tau) \int chi(s(t), t) dt
    double gamma_sprime = 0.0; ///< (1/tau) \int gamma(s(t), t) s'(t) dt
};

/// Boundary-trace averages on (t_{k-1}, t_k). `s_prime` may be empty, in
/// which case a central difference of `s` is used. Throws
/// ConstraintViolation when s leaves [0, ell].
TraceAverages trace_averages(const TimeFn& s, const TimeFn& s_prime, const Field& chi,
                             const Field& gamma, const TimeGrid& time, int k, double ell,
                             const quad::AdaptiveRule& rule = {});

/// Cell averages of sum_q d_q psi_q, in closed form from the raw cosines.
/// Linear in the coordinates.
CellAverages coefficient_cell_averages(std::span<const double> coords,
                                       const CoefficientBasis& basis, const MovingGrid& grid,
                                       const TimeGrid& time, CellRange range = CellRange::Active);

/// Serial reference for coefficient_cell_averages.
CellAverages coefficient_cell_averages_serial(std::span<const double> coords,
                                              const CoefficientBasis& basis,
                                              const MovingGrid& grid, const TimeGrid& time,
                                              CellRange range = CellRange::Active);

/// (p_{ik} - p_{i-1,k}) / h_{i-1}, i >= 1.
double p_backward_x_difference(const CellField& p_avgs, const MovingGrid& grid, int i, int k);

}  // namespace stefan
