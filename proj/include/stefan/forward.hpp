#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "stefan/basis.hpp"
#include "stefan/control.hpp"
#include "stefan/field.hpp"
#include "stefan/grid.hpp"
#include "stefan/problem.hpp"
#include "stefan/steklov.hpp"

namespace stefan {

/// Averaged coefficients of one time level k over its active cells
/// i = 0..m(k)-1.
struct StepCoefficients {
    std::vector<double> a, b, c, f, p;
    double flux = 0.0;     ///< g^n_k, the mean of g^n over (t_{k-1}, t_k)
    TraceAverages trace;   ///< chi^k and (gamma s')^k along s^n
};

/// Tridiagonal system of m+1 equations; lower[0] and upper[m] are unused.
struct TridiagonalSystem {
    std::vector<double> lower, diag, upper, rhs;

    std::size_t size() const { return diag.size(); }
};

/// Rows of the implicit step at level k, obtained by testing the discrete
/// identity with the unit vectors e_0..e_m and scaling row 0 by h_0^2,
/// interior rows by h_i h_{i-1}, the last row by h_{m-1}.
/// `prev_row` holds u_i(k-1) for all nodes i = 0..N.
TridiagonalSystem assemble_step(const MovingGrid& grid, int k, std::span<const double> prev_row,
                                const StepCoefficients& coeffs, double tau);

/// Rows 0..m-1 strictly and row m weakly diagonally dominant.
bool diagonally_dominant(const TridiagonalSystem& sys);

/// Thomas elimination. Throws SingularSystem (tagged with `level`) on a
/// vanishing pivot.
std::vector<double> solve_step(const TridiagonalSystem& sys, int level = -1);

/// Piecewise-linear interpolant on [0, s] continued to [0, inf) by iterated
/// even reflection about 2^r s.
class ReflectedInterpolant {
public:
    ReflectedInterpolant(std::span<const double> xs, std::span<const double> values);

    double operator()(double x) const;
    double slope(double x) const;

    /// Maps x into [0, s]; `reflections` receives the number of mirror steps.
    double fold(double x, int* reflections = nullptr) const;
    double boundary() const { return s_; }

private:
    std::span<const double> xs_;
    std::span<const double> values_;
    double s_;
};

ReflectedInterpolant reflect_extend(std::span<const double> xs, std::span<const double> values);

/// Grid-dependent precomputation for one boundary vector: the grid and the
/// averages of a, p and the boundary traces along s^n. Reused across
/// forward solves whose control has this boundary.
struct LevelSetup {
    TimeGrid time;
    std::vector<double> s;
    std::shared_ptr<const MovingGrid> grid;
    std::shared_ptr<const CoefficientBasis> basis;
    CellField a, p;
    std::vector<TraceAverages> traces;  ///< index k, entry 0 unused
};

LevelSetup prepare_level(const ProblemData& data, const TimeGrid& time, const MovingGrid& grid,
                         std::span<const double> s, std::shared_ptr<const CoefficientBasis> basis);

LevelSetup prepare_level(const ProblemData& data, const TimeGrid& time, std::span<const double> s,
                         const GridOptions& grid_options,
                         std::shared_ptr<const CoefficientBasis> basis);

/// Discrete state vector: row k holds u_0(k)..u_N(k); entries beyond m(k)
/// come from the reflected interpolant of the active part.
struct DiscreteState {
    TimeGrid time;
    std::shared_ptr<const MovingGrid> grid;
    Matrix u;
    std::vector<StepCoefficients> steps;  ///< index k-1

    int n() const { return time.n; }
    int active(int k) const { return grid->active(k); }
    std::span<const double> row(int k) const { return u.row(static_cast<std::size_t>(k)); }
    const StepCoefficients& coefficients(int k) const { return steps[static_cast<std::size_t>(k - 1)]; }

    /// \hat u(.; k) on [0, ell].
    ReflectedInterpolant spatial(int k) const;
};

struct SolveOptions {
    /// Replaces the Thomas solve of each step (tests plug in a dense oracle).
    std::function<std::vector<double>(const TridiagonalSystem&)> step_solver;
};

DiscreteState run_forward(const DiscreteControl& v, const LevelSetup& setup,
                          const ProblemData& data, const SolveOptions& options = {});

/// Convenience: builds the level setup for v.s and the given grid.
DiscreteState run_forward(const DiscreteControl& v, const ProblemData& data, const MovingGrid& grid,
                          const TimeGrid& time, std::shared_ptr<const CoefficientBasis> basis);

/// u^tau, \hat u^tau and \tilde u^tau of a state.
class StateInterpolation {
public:
    explicit StateInterpolation(const DiscreteState& state) : state_(&state) {}

    double u_tau(double x, double t) const;
    double u_hat(double x, double t) const;
    double u_hat_x(double x, double t) const;
    double u_hat_t(double x, double t) const;
    double u_tau_x(double x, double t) const;
    double u_tilde(double x, double t) const;

private:
    int level_of(double t) const;
    const DiscreteState* state_;
};

struct IdentityResidual {
    double value = 0.0;
    double scale = 0.0;  ///< sum of absolute values of all terms
};

/// Left side of the discrete summation identity at level k for the test
/// vector eta (length m(k)+1).
IdentityResidual summation_identity_residual(const DiscreteState& state, int k,
                                             std::span<const double> eta);

/// max over k and canonical eta = e_i of |value| / (scale + tiny).
double max_canonical_residual(const DiscreteState& state);

}  // namespace stefan
