#include "stefan/basis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "stefan/error.hpp"
#include "stefan/quadrature.hpp"

namespace stefan {

namespace {

constexpr double kPi = std::numbers::pi;

// Mean of cos(w x) over [a, b] without cancellation for thin cells.
double cos_mean(double w, double a, double b) {
    if (w == 0.0) return 1.0;
    const double half = 0.5 * w * (b - a);
    if (half == 0.0) return std::cos(w * a);
    return std::cos(0.5 * w * (a + b)) * std::sin(half) / half;
}

}  // namespace

CoefficientBasis::CoefficientBasis(double ell, double T, int count) : ell_(ell), T_(T) {
    if (count < 1) throw InvalidArgument("basis needs at least one function");
    if (!(ell > 0.0) || !(T > 0.0)) throw InvalidArgument("basis domain must be nondegenerate");

    for (int degree = 0; static_cast<int>(modes_.size()) < count; ++degree)
        for (int i = degree; i >= 0 && static_cast<int>(modes_.size()) < count; --i)
            modes_.push_back({i, degree - i});

    const int K = size();
    int max_wave = 0;
    for (const auto& m : modes_) max_wave = std::max({max_wave, m.i, m.j});
    lambda_.resize(static_cast<std::size_t>(K));
    for (int r = 0; r < K; ++r) {
        const double wx = modes_[r].i * kPi / ell_, wt = modes_[r].j * kPi / T_;
        lambda_[static_cast<std::size_t>(r)] = 1.0 + wx * wx + wt * wt;
    }

    // Raw Gram matrix from separable 1-d integrals.
    const int panels = 8 * (max_wave + 1);
    auto integral = [&](double L, int a, int b, bool sines) {
        const double wa = a * kPi / L, wb = b * kPi / L;
        return quad::integrate_gl5(
            [&](double x) {
                return sines ? std::sin(wa * x) * std::sin(wb * x) : std::cos(wa * x) * std::cos(wb * x);
            },
            0.0, L, panels);
    };
    const int W = max_wave + 1;
    auto table = [&](double L, bool sines) {
        Matrix m(static_cast<std::size_t>(W), static_cast<std::size_t>(W));
        for (int a = 0; a < W; ++a)
            for (int b = 0; b <= a; ++b) m(a, b) = m(b, a) = integral(L, a, b, sines);
        return m;
    };
    const Matrix cos_x = table(ell_, false), sin_x = table(ell_, true);
    const Matrix cos_t = table(T_, false), sin_t = table(T_, true);
    gram_ = Matrix(static_cast<std::size_t>(K), static_cast<std::size_t>(K));
    for (int r = 0; r < K; ++r)
        for (int q = 0; q <= r; ++q) {
            const Mode a = modes_[r], b = modes_[q];
            const double cx = cos_x(a.i, b.i), sx = sin_x(a.i, b.i);
            const double ct = cos_t(a.j, b.j), st = sin_t(a.j, b.j);
            const double value = cx * ct + (a.i * kPi / ell_) * (b.i * kPi / ell_) * sx * ct +
                                 (a.j * kPi / T_) * (b.j * kPi / T_) * cx * st;
            gram_(r, q) = gram_(q, r) = value;
        }

    chol_ = Matrix(static_cast<std::size_t>(K), static_cast<std::size_t>(K));
    for (int r = 0; r < K; ++r) {
        for (int q = 0; q <= r; ++q) {
            double sum = gram_(r, q);
            for (int p = 0; p < q; ++p) sum -= chol_(r, p) * chol_(q, p);
            if (r == q) {
                if (!(sum > 0.0)) throw NumericError("basis Gram matrix is not positive definite");
                chol_(r, r) = std::sqrt(sum);
            } else {
                chol_(r, q) = sum / chol_(q, q);
            }
        }
    }
    chol_inv_ = Matrix(static_cast<std::size_t>(K), static_cast<std::size_t>(K));
    for (int col = 0; col < K; ++col) {
        for (int r = col; r < K; ++r) {
            double sum = (r == col) ? 1.0 : 0.0;
            for (int p = col; p < r; ++p) sum -= chol_(r, p) * chol_inv_(p, col);
            chol_inv_(r, col) = sum / chol_(r, r);
        }
    }
}

CoefficientBasis::Value CoefficientBasis::raw(int r, double x, double t) const {
    const Mode m = modes_[static_cast<std::size_t>(r)];
    const double wx = m.i * kPi / ell_, wt = m.j * kPi / T_;
    const double cx = std::cos(wx * x), ct = std::cos(wt * t);
    return {cx * ct, -wx * std::sin(wx * x) * ct, -wt * cx * std::sin(wt * t)};
}

CoefficientBasis::Value CoefficientBasis::psi(int k, double x, double t) const {
    Value out;
    for (int r = 0; r <= k; ++r) {
        const double w = chol_inv_(k, r);
        if (w == 0.0) continue;
        const Value v = raw(r, x, t);
        out.v += w * v.v;
        out.dx += w * v.dx;
        out.dt += w * v.dt;
    }
    return out;
}

CoefficientBasis::Value CoefficientBasis::expansion(std::span<const double> coords, double x,
                                                    double t) const {
    const auto e = to_raw(coords);
    Value out;
    for (std::size_t r = 0; r < e.size(); ++r) {
        if (e[r] == 0.0) continue;
        const Value v = raw(static_cast<int>(r), x, t);
        out.v += e[r] * v.v;
        out.dx += e[r] * v.dx;
        out.dt += e[r] * v.dt;
    }
    return out;
}

std::vector<double> CoefficientBasis::to_raw(std::span<const double> coords) const {
    const int K = std::min(size(), static_cast<int>(coords.size()));
    std::vector<double> e(static_cast<std::size_t>(K), 0.0);
    for (int r = 0; r < K; ++r)
        for (int k = r; k < K; ++k) e[static_cast<std::size_t>(r)] += chol_inv_(k, r) * coords[static_cast<std::size_t>(k)];
    return e;
}

std::vector<double> CoefficientBasis::from_raw(std::span<const double> raw_coeffs) const {
    const int K = size();
    const int R = std::min(K, static_cast<int>(raw_coeffs.size()));
    std::vector<double> d(static_cast<std::size_t>(K), 0.0);
    for (int k = 0; k < K; ++k)
        for (int r = k; r < R; ++r) d[static_cast<std::size_t>(k)] += chol_(r, k) * raw_coeffs[static_cast<std::size_t>(r)];
    return d;
}

double CoefficientBasis::raw_cell_mean(int r, double x0, double x1, double t0, double t1) const {
    const Mode m = modes_[static_cast<std::size_t>(r)];
    return cos_mean(m.i * kPi / ell_, x0, x1) * cos_mean(m.j * kPi / T_, t0, t1);
}

std::vector<double> CoefficientBasis::project(const Field& d, double rel_tol) const {
    const int K = size();
    int max_wave = 0;
    for (const auto& m : modes_) max_wave = std::max({max_wave, m.i, m.j});

    auto raw_integrals = [&](int panels) {
        std::vector<double> acc(static_cast<std::size_t>(K), 0.0);
        std::vector<double> cx(static_cast<std::size_t>(max_wave) + 1), ct(cx.size());
        const double wx = ell_ / panels, wt = T_ / panels;
        for (int q = 0; q < panels; ++q)
            for (std::size_t b = 0; b < 5; ++b) {
                const double t = (q + 0.5) * wt + 0.5 * wt * quad::kGL5Nodes[b];
                const double weight_t = 0.5 * wt * quad::kGL5Weights[b];
                for (std::size_t j = 0; j < ct.size(); ++j) ct[j] = std::cos(static_cast<double>(j) * kPi / T_ * t);
                for (int p = 0; p < panels; ++p)
                    for (std::size_t a = 0; a < 5; ++a) {
                        const double x = (p + 0.5) * wx + 0.5 * wx * quad::kGL5Nodes[a];
                        const double w = weight_t * 0.5 * wx * quad::kGL5Weights[a];
                        const double value = w * d(x, t);
                        if (!std::isfinite(value)) throw NumericError("non-finite coefficient field value");
                        for (std::size_t i = 0; i < cx.size(); ++i) cx[i] = std::cos(static_cast<double>(i) * kPi / ell_ * x);
                        for (int r = 0; r < K; ++r) {
                            const Mode m = modes_[static_cast<std::size_t>(r)];
                            acc[static_cast<std::size_t>(r)] += value * cx[static_cast<std::size_t>(m.i)] * ct[static_cast<std::size_t>(m.j)];
                        }
                    }
            }
        std::vector<double> coords(static_cast<std::size_t>(K), 0.0);
        for (int k = 0; k < K; ++k)
            for (int r = 0; r <= k; ++r)
                coords[static_cast<std::size_t>(k)] += chol_inv_(k, r) * lambda_[static_cast<std::size_t>(r)] * acc[static_cast<std::size_t>(r)];
        return coords;
    };

    if (const auto c = d.constant_value(); c && *c == 0.0) return std::vector<double>(static_cast<std::size_t>(K), 0.0);
    const int panels = std::max(8, 2 * (max_wave + 1));
    const auto coarse = raw_integrals(panels);
    const auto fine = raw_integrals(2 * panels);
    double scale = 0.0, change = 0.0;
    for (int k = 0; k < K; ++k) {
        scale = std::max(scale, std::abs(fine[static_cast<std::size_t>(k)]));
        change = std::max(change, std::abs(fine[static_cast<std::size_t>(k)] - coarse[static_cast<std::size_t>(k)]));
    }
    if (change > rel_tol * std::max(scale, 1e-300) && change > 1e-300)
        throw NumericError("coefficient projection quadrature did not converge");
    return fine;
}

double CoefficientBasis::sup_constant() const {
    double sum = 0.0;
    for (int k = 0; k < size(); ++k) {
        double sup = 0.0;
        for (int r = 0; r <= k; ++r) sup += std::abs(chol_inv_(k, r));
        sum += sup * sup;
    }
    return std::sqrt(sum);
}

}  // namespace stefan
