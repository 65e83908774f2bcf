// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>

#include "msd/numerics/matrix.hpp"
#include "msd/numerics/rng.hpp"

namespace msd {

/// Low-rank adapter around a frozen weight:
///
///     W_eff = w0 + (alpha / rank) · b · a
///
/// w0 is d_out × d_in and never receives gradients; a (rank × d_in) and
/// b (d_out × rank) are the trainable factors. With the default
/// alpha == rank the scale is 1 and W_eff = w0 + b·a.
class LoraLayer {
public:
    LoraLayer() = default;

    /// Wraps `w0`. a ~ Uniform(-1/sqrt(d_in), 1/sqrt(d_in)), b = 0, so a freshly
    /// wrapped layer computes exactly w0·x. Requires 0 < rank < min(d_out, d_in)
    /// unless `allow_full_rank` is set (used only by tests of the full-rank case).
    static LoraLayer wrap(Matrix w0, std::size_t rank, double alpha, Rng& rng,
                          bool allow_full_rank = false);

    /// Construct from explicit factors (shapes validated).
    LoraLayer(Matrix w0, Matrix a, Matrix b, double alpha, bool allow_full_rank = false);

    const Matrix& w0() const noexcept { return w0_; }
    const Matrix& a() const noexcept { return a_; }
    const Matrix& b() const noexcept { return b_; }
    Matrix& a() noexcept { return a_; }
    Matrix& b() noexcept { return b_; }

    std::size_t rank() const noexcept { return a_.rows(); }
    double alpha() const noexcept { return alpha_; }
    double scale() const noexcept { return alpha_ / static_cast<double>(rank()); }
    std::size_t in_dim() const noexcept { return w0_.cols(); }
    std::size_t out_dim() const noexcept { return w0_.rows(); }

    /// Dense w0 + scale·b·a. For oracles and export; forward never builds it.
    Matrix effective_weight() const;

private:
    Matrix w0_;
    Matrix a_;
    Matrix b_;
    double alpha_ = 1.0;
};

struct LoraTape {
    const LoraLayer* origin = nullptr;
    Vector input;
    Vector projected;  // a·x
};

struct LoraGrads {
    Matrix a;
    Matrix b;

    static LoraGrads like(const LoraLayer& layer);
    void zero();
};

/// (w0 + scale·b·a)·x computed as w0·x + scale·b·(a·x).
Vector lora_forward(const LoraLayer& layer, std::span<const double> x, LoraTape* tape = nullptr);

/// Adds only the low-rank term scale·b·(a·x) into `y`. Callers that cache
/// w0·x for a fixed input use this to avoid recomputing the frozen part.
void lora_delta_acc(const LoraLayer& layer, std::span<const double> x, std::span<double> y,
                    LoraTape* tape = nullptr);

/// Accumulates dL/da and dL/db into `acc` and returns dL/dx (through W_eff).
/// w0 has no gradient slot: it cannot be updated by construction.
Vector lora_backward(const LoraLayer& layer, const LoraTape& tape,
                     std::span<const double> upstream, LoraGrads& acc);

/// Same as lora_backward but skips dL/dx for callers whose input is frozen.
void lora_backward_params(const LoraLayer& layer, const LoraTape& tape,
                          std::span<const double> upstream, LoraGrads& acc);

}  // namespace msd
