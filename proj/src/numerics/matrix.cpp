// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#include "msd/numerics/matrix.hpp"

#include <cmath>
#include <limits>

#include "msd/error.hpp"

namespace msd {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols) {
        throw DimensionError("matrix data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw DimensionError("ragged initializer for Matrix");
        data.insert(data.end(), row.begin(), row.end());
    }
    return Matrix(r, c, std::move(data));
}

void Matrix::fill(double v) {
    for (double& x : data_) x = v;
}

std::string Matrix::shape() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul: cannot multiply " + a.shape() + " by " + b.shape());
    }
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto orow = out.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            auto brow = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
        }
    }
    require_finite(out.values(), "matmul");
    return out;
}

Matrix transpose(const Matrix& m) {
    Matrix t(m.cols(), m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
    return t;
}

Matrix add(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw DimensionError("add: shapes " + a.shape() + " and " + b.shape() + " differ");
    }
    Matrix out = a;
    auto ov = out.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] += bv[i];
    return out;
}

Matrix scaled(const Matrix& m, double s) {
    Matrix out = m;
    for (double& x : out.values()) x *= s;
    return out;
}

Vector matvec(const Matrix& m, std::span<const double> x) {
    Vector y(m.rows(), 0.0);
    matvec_acc(m, x, y);
    return y;
}

void matvec_acc(const Matrix& m, std::span<const double> x, std::span<double> y) {
    if (x.size() != m.cols() || y.size() != m.rows()) {
        throw DimensionError("matvec: matrix " + m.shape() + " with input length " +
                             std::to_string(x.size()) + " and output length " +
                             std::to_string(y.size()));
    }
    for (std::size_t i = 0; i < m.rows(); ++i) {
        auto r = m.row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < r.size(); ++j) acc += r[j] * x[j];
        y[i] += acc;
    }
}

Vector matvec_t(const Matrix& m, std::span<const double> x) {
    Vector y(m.cols(), 0.0);
    matvec_t_acc(m, x, y);
    return y;
}

void matvec_t_acc(const Matrix& m, std::span<const double> x, std::span<double> y) {
    if (x.size() != m.rows() || y.size() != m.cols()) {
        throw DimensionError("matvec_t: matrix " + m.shape() + " with input length " +
                             std::to_string(x.size()) + " and output length " +
                             std::to_string(y.size()));
    }
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const double xi = x[i];
        if (xi == 0.0) continue;
        auto r = m.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) y[j] += r[j] * xi;
    }
}

void add_outer(Matrix& m, std::span<const double> a, std::span<const double> b, double s) {
    if (a.size() != m.rows() || b.size() != m.cols()) {
        throw DimensionError("add_outer: matrix " + m.shape() + " with vectors of length " +
                             std::to_string(a.size()) + " and " + std::to_string(b.size()));
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double ai = s * a[i];
        if (ai == 0.0) continue;
        auto r = m.row(i);
        for (std::size_t j = 0; j < b.size(); ++j) r[j] += ai * b[j];
    }
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw DimensionError("dot: lengths " + std::to_string(a.size()) + " and " +
                             std::to_string(b.size()));
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double cosine(std::span<const double> a, std::span<const double> b) {
    const double na = norm(a);
    const double nb = norm(b);
    if (na == 0.0 || nb == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return dot(a, b) / (na * nb);
}

void axpy(double s, std::span<const double> x, std::span<double> y) {
    if (x.size() != y.size()) {
        throw DimensionError("axpy: lengths " + std::to_string(x.size()) + " and " +
                             std::to_string(y.size()));
    }
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += s * x[i];
}

bool all_finite(std::span<const double> v) noexcept {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

void require_finite(std::span<const double> v, const char* what) {
    if (!all_finite(v)) throw NumericError(std::string(what) + ": non-finite value produced");
}

}  // namespace msd
