#pragma once

#include "stefan/control.hpp"
#include "stefan/field.hpp"

namespace stefan {

/// Given data of the moving-boundary problem
///
///   (a u_x)_x + b u_x + c u - u_t = f - p_x   in 0 < x < s(t), 0 < t <= T
///   u(x, 0) = phi(x),  a u_x(0, t) = g(t),
///   a u_x(s(t), t) + gamma s'(t) = chi(s(t), t).
///
/// phi is a Field evaluated with t = 0.
struct ProblemData {
    Field a = Field::constant(1.0);
    Field p;
    Field gamma;
    Field chi;
    Field phi;
    double T = 1.0;
    ControlBounds bounds;
};

}  // namespace stefan
