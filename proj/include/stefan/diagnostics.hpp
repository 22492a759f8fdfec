#pragma once

#include <functional>
#include <string>
#include <vector>

#include "stefan/basis.hpp"
#include "stefan/control.hpp"
#include "stefan/forward.hpp"
#include "stefan/grid.hpp"
#include "stefan/problem.hpp"

namespace stefan {

struct EnergySides {
    double lhs = 0.0;
    double rhs_data = 0.0;
};

struct EnergyReport {
    int n = 0;
    double lhs_first = 0.0, rhs_data_first = 0.0;
    double lhs_second = 0.0, rhs_data_second = 0.0;
};

/// max_k sum_i h_i u_i^2(k) + sum_k tau sum_i h_i u_ix^2(k) over all N cells,
/// and the data functional of the first energy estimate (without its
/// constant), including the cells activated between consecutive levels.
EnergySides first_energy_sides(const DiscreteState& state, const DiscreteControl& v, const ProblemData& data);

/// The three-term left side of the second energy estimate for the constant
/// continuation of the state.
double second_energy_lhs(const DiscreteState& state);

/// Data functional of the second energy estimate. B_2^{1/4}(0,T) norms use
/// the Gagliardo double integral on a midpoint mesh of `mesh` points.
double second_energy_rhs(const DiscreteState& state, const DiscreteControl& v, const ProblemData& data,
                         int mesh = 400);

EnergyReport energy_report(const DiscreteState& state, const DiscreteControl& v, const ProblemData& data);

/// ||h||^2_{L_2(0,T)} + \int\int |h(t) - h(t')|^2 / |t - t'|^{3/2}.
double b2_quarter_norm_sq(const TimeFn& h, double T, int mesh = 400);

struct TestFunction {
    std::string name;
    std::function<double(double, double)> value;
    std::function<double(double, double)> dx;
};

/// x^i t^j for i + j <= 3, then (T - t)(1 + x).
std::vector<TestFunction> polynomial_test_family(double T);

struct WeakResidual {
    std::vector<double> values;  ///< one per test function
    double max_abs = 0.0;
};

/// Right side of the weak-form identity with u replaced by \hat u^tau and
/// the given control, by Gauss quadrature over {0 < x < s(t)}.
WeakResidual weak_form_residual(const DiscreteState& state, const ContinuousControl& v, const ProblemData& data,
                                const std::vector<TestFunction>& tests);

/// max_t |s^{n_{j+1}}(t) - s^{n_j}(t)| on `points` uniform points of [0, T]
/// for consecutive entries of `boundaries` (each of length n_j + 1).
std::vector<double> boundary_uniform_gap(const std::vector<std::vector<double>>& boundaries, double T,
                                         int points = 1000);

struct InclusionReport {
    std::vector<int> levels;
    std::vector<bool> admissible;
    std::vector<double> max_norm;
    int threshold = -1;  ///< smallest level from which every later level is admissible, -1 if none
};

/// Q_n(v) membership in V_R^n over the given levels.
InclusionReport inclusion_threshold(const ContinuousControl& v, const ProblemData& data, const GridOptions& grid,
                                  const std::vector<int>& levels);

struct LipschitzReport {
    double lipschitz = 0.0;
    double bound = 0.0;
    bool ok = true;
};

/// max_k |s_k - s_{k-1}| / tau against sqrt(T) ||[s]_n||_{b_2^2}.
LipschitzReport lipschitz_check(std::span<const double> s, const TimeGrid& time);

}  // namespace stefan
