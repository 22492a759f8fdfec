#pragma once

#include <memory>
#include <vector>

#include "stefan/basis.hpp"
#include "stefan/control.hpp"
#include "stefan/field.hpp"
#include "stefan/forward.hpp"
#include "stefan/grid.hpp"
#include "stefan/problem.hpp"

namespace stefan {

/// Final-time temperature w(x), boundary temperature mu(t) and final
/// boundary position s_bar.
struct Measurements {
    Field w;
    TimeFn mu;
    double s_bar = 1.0;
    /// Known kinks or jumps; averages are split there.
    std::vector<double> w_breaks, mu_breaks;
};

/// Measurements averaged on a particular grid: w_i over spatial cells and
/// mu_k over (t_{k-1}, t_k).
struct DiscreteMeasurements {
    std::vector<double> w;   ///< one entry per cell of the grid
    std::vector<double> mu;  ///< index k = 1..n, entry 0 unused
    double s_bar = 1.0;
};

DiscreteMeasurements discretize(const Measurements& meas, const MovingGrid& grid, const TimeGrid& time);

struct CostWeights {
    double beta0 = 1.0;
    double beta1 = 1.0;
    double beta2 = 1.0;
};

struct CostBreakdown {
    double term_final_temp = 0.0;
    double term_boundary_temp = 0.0;
    double term_final_position = 0.0;
    double total = 0.0;
    CostWeights weights;
    int resolution = 0;  ///< n of the solve that produced the terms
};

/// I_n for the state computed from v.
CostBreakdown eval_discrete_cost(const DiscreteState& state, const DiscreteControl& v,
                                 const DiscreteMeasurements& meas, const CostWeights& weights);

CostBreakdown eval_discrete_cost(const DiscreteState& state, const DiscreteControl& v,
                                 const Measurements& meas, const CostWeights& weights);

/// Settings of the fine solve standing in for J.
struct FineSolve {
    int fine_n = 64;
    GridOptions grid;
};

/// J(v), approximated by I_{fine_n}(Q_{fine_n}(v)). Throws
/// ConstraintViolation when s leaves [delta, ell] or s(0) != s0.
CostBreakdown eval_continuous_cost(const ContinuousControl& v, const ProblemData& data,
                                   const Measurements& meas, const CostWeights& weights,
                                   const FineSolve& fine);

/// Measurements reproduced by a forward solve: the reflected final-level
/// interpolant, the boundary-node values as a piecewise-constant mu and
/// s_bar = s_n, with the interpolant's kinks and mu's jumps as breaks.
Measurements measurements_from_state(const DiscreteState& state, const DiscreteControl& v);

/// w_i := u_i(n) on every cell, mu_k := u_{m(k)}(k), s_bar := s_n.
DiscreteMeasurements discrete_measurements_from_state(const DiscreteState& state, const DiscreteControl& v);

}  // namespace stefan
