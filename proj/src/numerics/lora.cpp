// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#include "msd/numerics/lora.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "msd/error.hpp"

namespace msd {

namespace {

void check_rank(std::size_t rank, const Matrix& w0, bool allow_full_rank) {
    const std::size_t limit = std::min(w0.rows(), w0.cols());
    if (rank == 0 || rank > limit || (rank == limit && !allow_full_rank)) {
        throw ConfigError("lora.rank", "rank " + std::to_string(rank) +
                                           " must satisfy 0 < r < min(d_out, d_in) for w0 " +
                                           w0.shape());
    }
}

}  // namespace

LoraLayer LoraLayer::wrap(Matrix w0, std::size_t rank, double alpha, Rng& rng,
                          bool allow_full_rank) {
    check_rank(rank, w0, allow_full_rank);
    Matrix a(rank, w0.cols());
    const double s = 1.0 / std::sqrt(static_cast<double>(w0.cols()));
    for (double& v : a.values()) v = rng.uniform(-s, s);
    Matrix b(w0.rows(), rank);
    return LoraLayer(std::move(w0), std::move(a), std::move(b), alpha, allow_full_rank);
}

LoraLayer::LoraLayer(Matrix w0, Matrix a, Matrix b, double alpha, bool allow_full_rank)
    : w0_(std::move(w0)), a_(std::move(a)), b_(std::move(b)), alpha_(alpha) {
    check_rank(a_.rows(), w0_, allow_full_rank);
    if (a_.cols() != w0_.cols() || b_.rows() != w0_.rows() || b_.cols() != a_.rows()) {
        throw DimensionError("LoraLayer: w0 " + w0_.shape() + ", a " + a_.shape() + ", b " +
                             b_.shape() + " are inconsistent");
    }
    if (!std::isfinite(alpha_) || alpha_ <= 0.0) {
        throw ConfigError("lora.alpha", "must be positive and finite");
    }
}

Matrix LoraLayer::effective_weight() const {
    return add(w0_, scaled(matmul(b_, a_), scale()));
}

LoraGrads LoraGrads::like(const LoraLayer& layer) {
    return LoraGrads{Matrix(layer.a().rows(), layer.a().cols()),
                     Matrix(layer.b().rows(), layer.b().cols())};
}

void LoraGrads::zero() {
    a.fill(0.0);
    b.fill(0.0);
}

void lora_delta_acc(const LoraLayer& layer, std::span<const double> x, std::span<double> y,
                    LoraTape* tape) {
    if (x.size() != layer.in_dim()) {
        throw DimensionError("lora_forward: input length " + std::to_string(x.size()) +
                             " but layer expects " + std::to_string(layer.in_dim()));
    }
    Vector ax = matvec(layer.a(), x);
    const double s = layer.scale();
    for (std::size_t i = 0; i < layer.out_dim(); ++i) {
        auto brow = layer.b().row(i);
        double acc = 0.0;
        for (std::size_t k = 0; k < brow.size(); ++k) acc += brow[k] * ax[k];
        y[i] += s * acc;
    }
    if (tape) {
        tape->origin = &layer;
        tape->input.assign(x.begin(), x.end());
        tape->projected = std::move(ax);
    }
}

Vector lora_forward(const LoraLayer& layer, std::span<const double> x, LoraTape* tape) {
    if (x.size() != layer.in_dim()) {
        throw DimensionError("lora_forward: input length " + std::to_string(x.size()) +
                             " but layer expects " + std::to_string(layer.in_dim()));
    }
    Vector y = matvec(layer.w0(), x);
    lora_delta_acc(layer, x, y, tape);
    require_finite(y, "lora_forward");
    return y;
}

void lora_backward_params(const LoraLayer& layer, const LoraTape& tape,
                          std::span<const double> upstream, LoraGrads& acc) {
    if (tape.origin != &layer || tape.input.size() != layer.in_dim() ||
        tape.projected.size() != layer.rank()) {
        throw TapeError("lora_backward: tape was not produced by this layer");
    }
    if (upstream.size() != layer.out_dim()) {
        throw DimensionError("lora_backward: upstream length " + std::to_string(upstream.size()) +
                             " but layer output is " + std::to_string(layer.out_dim()));
    }
    const double s = layer.scale();
    // y = w0 x + s b (a x):  dL/db = s g (a x)^T,  dL/da = s (b^T g) x^T
    add_outer(acc.b, upstream, tape.projected, s);
    Vector btg = matvec_t(layer.b(), upstream);
    add_outer(acc.a, btg, tape.input, s);
}

Vector lora_backward(const LoraLayer& layer, const LoraTape& tape,
                     std::span<const double> upstream, LoraGrads& acc) {
    lora_backward_params(layer, tape, upstream, acc);
    // dL/dx = w0^T g + s a^T (b^T g)
    Vector dx = matvec_t(layer.w0(), upstream);
    Vector btg = matvec_t(layer.b(), upstream);
    for (double& v : btg) v *= layer.scale();
    matvec_t_acc(layer.a(), btg, dx);
    require_finite(dx, "lora_backward");
    return dx;
}

}  // namespace msd
