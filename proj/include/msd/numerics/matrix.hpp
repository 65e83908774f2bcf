// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace msd {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
///
/// All training math in this project runs in 64-bit; 32-bit floats only
/// appear in serialized embedding files.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix identity(std::size_t n);
    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    void fill(double v);
    std::string shape() const;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Standard product a·b. Throws DimensionError naming both shapes when
/// a.cols() != b.rows(), NumericError when the result is not finite.
Matrix matmul(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& m);
Matrix add(const Matrix& a, const Matrix& b);
Matrix scaled(const Matrix& m, double s);

/// y = m·x
Vector matvec(const Matrix& m, std::span<const double> x);
/// y += m·x (no allocation)
void matvec_acc(const Matrix& m, std::span<const double> x, std::span<double> y);
/// y = mᵀ·x
Vector matvec_t(const Matrix& m, std::span<const double> x);
/// y += mᵀ·x
void matvec_t_acc(const Matrix& m, std::span<const double> x, std::span<double> y);
/// m += s·a·bᵀ
void add_outer(Matrix& m, std::span<const double> a, std::span<const double> b, double s = 1.0);

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);
/// Cosine similarity; NaN when either vector has zero norm.
double cosine(std::span<const double> a, std::span<const double> b);
void axpy(double s, std::span<const double> x, std::span<double> y);

bool all_finite(std::span<const double> v) noexcept;
/// Throws NumericError mentioning `what` when any entry is NaN/Inf.
void require_finite(std::span<const double> v, const char* what);

}  // namespace msd
