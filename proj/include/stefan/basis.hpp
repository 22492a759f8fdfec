#pragma once

#include <span>
#include <vector>

#include "stefan/field.hpp"

namespace stefan {

/// Orthonormal family psi_0..psi_K on D = [0, ell] x [0, T] under the
/// first-order Sobolev inner product
///
///     <u, v> = \int_D (u v + u_x v_x + u_t v_t) dx dt.
///
/// Built from the tensor cosines cos(i pi x / ell) cos(j pi t / T),
/// enumerated by total degree i + j, by Gram-Schmidt (Cholesky of the
/// quadrature Gram matrix). psi_k = sum_r L^{-1}(k, r) raw_r.
class CoefficientBasis {
public:
    struct Mode {
        int i;  ///< spatial wavenumber
        int j;  ///< temporal wavenumber
    };

    struct Value {
        double v = 0.0, dx = 0.0, dt = 0.0;
    };

    CoefficientBasis() = default;
    CoefficientBasis(double ell, double T, int count);

    int size() const { return static_cast<int>(modes_.size()); }
    double ell() const { return ell_; }
    double T() const { return T_; }
    const std::vector<Mode>& modes() const { return modes_; }

    /// Gram matrix of the raw cosines under the surrogate inner product.
    const Matrix& raw_gram() const { return gram_; }

    Value raw(int r, double x, double t) const;
    Value psi(int k, double x, double t) const;

    /// sum_k d_k psi_k at (x, t), with gradient.
    Value expansion(std::span<const double> coords, double x, double t) const;

    /// Raw-cosine coefficients e of sum_k d_k psi_k: e = L^{-T} d.
    std::vector<double> to_raw(std::span<const double> coords) const;
    /// Coordinates <u, psi_k> of u = sum_r e_r raw_r (e may be shorter than
    /// size(); missing entries are zero). This is L^T e.
    std::vector<double> from_raw(std::span<const double> raw_coeffs) const;

    /// Mean of raw_r over [x0, x1] x [t0, t1], in closed form.
    double raw_cell_mean(int r, double x0, double x1, double t0, double t1) const;

    /// <d, psi_k> for k = 0..K. The x- and t-derivatives of every raw cosine
    /// vanish on the boundary of D, so <d, raw_r> = lambda_r \int_D d raw_r
    /// and no derivatives of d are needed. Quadrature is a composite
    /// 5-point rule refined once; throws NumericError when the refinement
    /// changes any coordinate by more than `rel_tol`.
    std::vector<double> project(const Field& d, double rel_tol = 1e-8) const;

    /// C with max |sum d_k psi_k| <= C ||d||_2 on D: sqrt(sum_k sup|psi_k|^2),
    /// with sup|psi_k| bounded by sum_r |L^{-1}(k, r)|.
    double sup_constant() const;

private:
    double ell_ = 1.0, T_ = 1.0;
    std::vector<Mode> modes_;
    std::vector<double> lambda_;  ///< 1 + (i pi/ell)^2 + (j pi/T)^2
    Matrix gram_;
    Matrix chol_;      ///< L, G = L L^T
    Matrix chol_inv_;  ///< L^{-1}
};

}  // namespace stefan
