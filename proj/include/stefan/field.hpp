#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "stefan/expression.hpp"

namespace stefan {

/// A scalar function of (x, t). Functions of one variable ignore the other.
class Field {
public:
    using Fn = std::function<double(double x, double t)>;

    Field() : constant_(0.0) {}
    explicit Field(Fn fn) : fn_(std::move(fn)) {}
    explicit Field(const expr::Expr& e);

    static Field constant(double value) {
        Field f;
        f.constant_ = value;
        return f;
    }

    double operator()(double x, double t) const { return constant_ ? *constant_ : fn_(x, t); }

    /// Present only when the field is known to be constant; lets the
    /// averaging kernels skip quadrature.
    std::optional<double> constant_value() const { return constant_; }
    bool is_zero() const { return constant_ && *constant_ == 0.0; }

private:
    Fn fn_;
    std::optional<double> constant_;
};

using TimeFn = std::function<double(double t)>;

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<const double> values() const { return data_; }
    std::span<double> values() { return data_; }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Values on space-time cells (x_i, x_{i+1}) x (t_{k-1}, t_k), i = 0..N-1,
/// k = 1..n.
class CellField {
public:
    CellField() = default;
    CellField(int n_steps, int n_cells, double fill = 0.0)
        : values_(static_cast<std::size_t>(n_steps), static_cast<std::size_t>(n_cells), fill) {}

    int steps() const { return static_cast<int>(values_.rows()); }
    int cells() const { return static_cast<int>(values_.cols()); }

    double& operator()(int i, int k) { return values_(static_cast<std::size_t>(k - 1), static_cast<std::size_t>(i)); }
    double operator()(int i, int k) const { return values_(static_cast<std::size_t>(k - 1), static_cast<std::size_t>(i)); }

    std::span<const double> level(int k) const { return values_.row(static_cast<std::size_t>(k - 1)); }
    std::span<double> level(int k) { return values_.row(static_cast<std::size_t>(k - 1)); }

    const Matrix& matrix() const { return values_; }
    Matrix& matrix() { return values_; }

    friend bool operator==(const CellField&, const CellField&) = default;

private:
    Matrix values_;
};

}  // namespace stefan
