#pragma once

#include <array>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "stefan/basis.hpp"
#include "stefan/field.hpp"
#include "stefan/grid.hpp"

namespace stefan {

/// Constraints defining the admissible control sets.
struct ControlBounds {
    double s0 = 1.0;
    double delta = 0.5;
    double ell = 2.0;
    double R = 10.0;
};

using GradientFn = std::function<std::array<double, 2>(double x, double t)>;

/// v = (s, g, f, b, c) as functions. Derivative members may be left empty;
/// consumers then fall back to central differences. Break lists name known
/// kinks (piecewise definitions) so quadrature can split there.
struct ContinuousControl {
    TimeFn s, s_prime, s_second;
    TimeFn g, g_prime;
    Field f, b, c;
    GradientFn b_grad, c_grad;
    std::vector<double> t_breaks, x_breaks;
};

/// ([s]_n, [g]_n, [f]_{nN}, [b]_n, [c]_n).
struct DiscreteControl {
    std::vector<double> s;  ///< n+1 boundary values
    std::vector<double> g;  ///< n+1 flux values
    CellField f;            ///< cell-constant source, cells of grid built from s
    std::vector<double> b;  ///< basis coordinates
    std::vector<double> c;

    int n() const { return static_cast<int>(s.size()) - 1; }

    friend bool operator==(const DiscreteControl&, const DiscreteControl&) = default;
};

double norm_b2_1(std::span<const double> g, double tau);
double norm_b2_2(std::span<const double> s, double tau);
double norm_l2_cells(const CellField& f, const MovingGrid& grid, double tau);
double norm_b2_coeff(std::span<const double> d);

struct ControlNorms {
    double s = 0.0, g = 0.0, f = 0.0, b = 0.0, c = 0.0;
    double max() const;
};

ControlNorms discrete_norms(const DiscreteControl& v, const MovingGrid& grid, double tau);

struct AdmissibilityReport {
    bool admissible = true;
    std::vector<std::string> violations;
    ControlNorms norms;
};

/// Membership in V_R^n: s_k >= delta, s_k <= ell, s_0 = s_1 = s0 and
/// max of the five discrete norms <= R (closed set).
AdmissibilityReport is_admissible(const DiscreteControl& v, const MovingGrid& grid, double tau,
                                  const ControlBounds& bounds);

/// s^n of P_n with its first two derivatives; remains valid after the
/// source vector is destroyed.
struct BoundaryCurve {
    TimeFn value, slope, curvature;
};

BoundaryCurve boundary_curve(std::span<const double> s, double tau);

/// Boundary samples s_k = s(t_k) for k >= 2, s_0 = s_1 = s0.
std::vector<double> sample_boundary(const TimeFn& s, double s0, const TimeGrid& time);

/// Q_n. `grid` must be the grid of sample_boundary(v.s, s0, time).
DiscreteControl q_n(const ContinuousControl& v, double s0, const TimeGrid& time,
                    const MovingGrid& grid, const CoefficientBasis& basis);

/// P_n: piecewise-quadratic s^n, piecewise-linear g^n, cell-constant f^n
/// (zero outside D), basis expansions b^n, c^n.
ContinuousControl p_n(const DiscreteControl& v, const TimeGrid& time, const MovingGrid& grid,
                      const CoefficientBasis& basis);

/// Continuous norms (B_2^2, B_2^1, L_2(D), surrogate, surrogate) by
/// composite quadrature with `panels` panels per unit of breakpoints.
ControlNorms continuous_norms(const ContinuousControl& v, double T, double ell, int panels = 64);

/// Exact overlap average of a cell-constant field onto another grid over
/// the same [0, ell].
CellField remap_cells(const CellField& f, const MovingGrid& from, const MovingGrid& to);

/// max_k |s_k - s_{k-1}| / tau.
double boundary_lipschitz(std::span<const double> s, double tau);

/// Bound on boundary_lipschitz implied by s_0 = s_1 and the b_2^2 norm:
/// |s_{k,tbar}| <= sqrt(T) ||[s]_n||_{b_2^2}.
double lipschitz_bound(double T, double s_norm_b22);

struct ProjectionResult {
    DiscreteControl control;
    MovingGrid grid;
    bool changed = false;
};

/// Projection used by the optimizer: clip s into [delta, ell], reset
/// s_0 = s_1 = s0, then shrink any block whose norm exceeds R toward its
/// baseline (s toward the constant s0, others toward 0). Idempotent.
ProjectionResult project_admissible(const DiscreteControl& v, const MovingGrid& grid,
                                    const TimeGrid& time, const ControlBounds& bounds,
                                    const GridOptions& grid_options);

}  // namespace stefan
