// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "msd/numerics/matrix.hpp"
#include "msd/numerics/rng.hpp"

namespace msd {

enum class Activation { ReLU, Identity, Sigmoid, Softmax };

std::string_view activation_name(Activation a) noexcept;
Activation parse_activation(std::string_view name);

/// Fully connected layer y = act(W·x + b), W is d_out × d_in.
struct MlpLayer {
    Matrix weight;
    Vector bias;
    Activation activation = Activation::Identity;

    std::size_t in_dim() const noexcept { return weight.cols(); }
    std::size_t out_dim() const noexcept { return weight.rows(); }

    /// Uniform(-s, s) weights with s = sqrt(6 / (d_in + d_out)), zero bias.
    static MlpLayer random(std::size_t d_in, std::size_t d_out, Activation act, Rng& rng);
    static MlpLayer zeros(std::size_t d_in, std::size_t d_out, Activation act);
};

/// Everything backward needs from a forward call.
struct MlpTape {
    const MlpLayer* origin = nullptr;
    Vector input;
    Vector output;
};

struct MlpGrads {
    Matrix weight;
    Vector bias;

    static MlpGrads like(const MlpLayer& layer);
    void zero();
};

struct MlpForward {
    Vector output;
    MlpTape tape;
};

struct MlpBackward {
    Vector input_grad;
    MlpGrads grads;
};

MlpForward mlp_forward(const MlpLayer& layer, std::span<const double> x);

/// Gradients of a scalar loss given dL/dy. Throws TapeError when `tape` was
/// not produced by `layer`.
MlpBackward mlp_backward(const MlpLayer& layer, const MlpTape& tape,
                         std::span<const double> upstream);

/// Same as mlp_backward, but adds the parameter gradients into `acc` and
/// returns only dL/dx.
Vector mlp_backward_acc(const MlpLayer& layer, const MlpTape& tape,
                        std::span<const double> upstream, MlpGrads& acc);

/// In-place activations, exposed for callers that build their own
/// pre-activations (the student's LoRA-wrapped hidden layer).
void apply_activation(Activation act, std::span<double> v);
/// dL/dpre given dL/dy and y = act(pre), written into `grad` in place.
void activation_backward(Activation act, std::span<const double> output,
                         std::span<double> grad);

/// A stack of fully connected layers applied in order.
struct Mlp {
    std::vector<MlpLayer> layers;

    std::size_t in_dim() const { return layers.front().in_dim(); }
    std::size_t out_dim() const { return layers.back().out_dim(); }

    /// dims = {d_in, h1, ..., d_out}; hidden layers use `hidden`, last uses `last`.
    static Mlp random(std::span<const std::size_t> dims, Activation hidden, Activation last,
                      Rng& rng);
};

struct MlpStackTape {
    std::vector<MlpTape> layers;
};

Vector mlp_stack_forward(const Mlp& mlp, std::span<const double> x, MlpStackTape* tape);
Vector mlp_stack_backward(const Mlp& mlp, const MlpStackTape& tape,
                          std::span<const double> upstream, std::vector<MlpGrads>& acc);
std::vector<MlpGrads> zero_grads(const Mlp& mlp);

}  // namespace msd
