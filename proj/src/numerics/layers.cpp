// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#include "msd/numerics/layers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "msd/error.hpp"

namespace msd {

std::string_view activation_name(Activation a) noexcept {
    switch (a) {
        case Activation::ReLU: return "relu";
        case Activation::Identity: return "identity";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Softmax: return "softmax";
    }
    return "?";
}

Activation parse_activation(std::string_view name) {
    if (name == "relu") return Activation::ReLU;
    if (name == "identity") return Activation::Identity;
    if (name == "sigmoid") return Activation::Sigmoid;
    if (name == "softmax") return Activation::Softmax;
    throw ConfigError("activation", "unknown activation '" + std::string(name) + "'");
}

MlpLayer MlpLayer::random(std::size_t d_in, std::size_t d_out, Activation act, Rng& rng) {
    MlpLayer layer = zeros(d_in, d_out, act);
    const double s = std::sqrt(6.0 / static_cast<double>(d_in + d_out));
    for (double& w : layer.weight.values()) w = rng.uniform(-s, s);
    return layer;
}

MlpLayer MlpLayer::zeros(std::size_t d_in, std::size_t d_out, Activation act) {
    return MlpLayer{Matrix(d_out, d_in), Vector(d_out, 0.0), act};
}

MlpGrads MlpGrads::like(const MlpLayer& layer) {
    return MlpGrads{Matrix(layer.out_dim(), layer.in_dim()), Vector(layer.out_dim(), 0.0)};
}

void MlpGrads::zero() {
    weight.fill(0.0);
    std::fill(bias.begin(), bias.end(), 0.0);
}

void apply_activation(Activation act, std::span<double> v) {
    switch (act) {
        case Activation::Identity: break;
        case Activation::ReLU:
            for (double& x : v) x = x > 0.0 ? x : 0.0;
            break;
        case Activation::Sigmoid:
            for (double& x : v) {
                // Branch keeps exp() from overflowing on large |x|.
                if (x >= 0.0) {
                    x = 1.0 / (1.0 + std::exp(-x));
                } else {
                    const double e = std::exp(x);
                    x = e / (1.0 + e);
                }
            }
            break;
        case Activation::Softmax: {
            if (v.empty()) break;
            const double mx = *std::max_element(v.begin(), v.end());
            double sum = 0.0;
            for (double& x : v) {
                x = std::exp(x - mx);
                sum += x;
            }
            for (double& x : v) x /= sum;
            break;
        }
    }
}

void activation_backward(Activation act, std::span<const double> output,
                         std::span<double> grad) {
    switch (act) {
        case Activation::Identity: break;
        case Activation::ReLU:
            for (std::size_t i = 0; i < grad.size(); ++i)
                if (output[i] <= 0.0) grad[i] = 0.0;
            break;
        case Activation::Sigmoid:
            for (std::size_t i = 0; i < grad.size(); ++i)
                grad[i] *= output[i] * (1.0 - output[i]);
            break;
        case Activation::Softmax: {
            // dL/dz_i = y_i (g_i - sum_j y_j g_j)
            double yg = 0.0;
            for (std::size_t i = 0; i < grad.size(); ++i) yg += output[i] * grad[i];
            for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = output[i] * (grad[i] - yg);
            break;
        }
    }
}

MlpForward mlp_forward(const MlpLayer& layer, std::span<const double> x) {
    if (x.size() != layer.in_dim()) {
        throw DimensionError("mlp_forward: input length " + std::to_string(x.size()) +
                             " but layer expects " + std::to_string(layer.in_dim()));
    }
    Vector y = layer.bias;
    matvec_acc(layer.weight, x, y);
    apply_activation(layer.activation, y);
    require_finite(y, "mlp_forward");
    MlpForward out;
    out.tape.origin = &layer;
    out.tape.input.assign(x.begin(), x.end());
    out.tape.output = y;
    out.output = std::move(y);
    return out;
}

Vector mlp_backward_acc(const MlpLayer& layer, const MlpTape& tape,
                        std::span<const double> upstream, MlpGrads& acc) {
    if (tape.origin != &layer || tape.input.size() != layer.in_dim() ||
        tape.output.size() != layer.out_dim()) {
        throw TapeError("mlp_backward: tape was not produced by this layer");
    }
    if (upstream.size() != layer.out_dim()) {
        throw DimensionError("mlp_backward: upstream length " + std::to_string(upstream.size()) +
                             " but layer output is " + std::to_string(layer.out_dim()));
    }
    Vector g(upstream.begin(), upstream.end());
    activation_backward(layer.activation, tape.output, g);
    add_outer(acc.weight, g, tape.input);
    axpy(1.0, g, acc.bias);
    Vector dx = matvec_t(layer.weight, g);
    require_finite(dx, "mlp_backward");
    return dx;
}

MlpBackward mlp_backward(const MlpLayer& layer, const MlpTape& tape,
                         std::span<const double> upstream) {
    MlpBackward out;
    out.grads = MlpGrads::like(layer);
    out.input_grad = mlp_backward_acc(layer, tape, upstream, out.grads);
    return out;
}

Mlp Mlp::random(std::span<const std::size_t> dims, Activation hidden, Activation last, Rng& rng) {
    if (dims.size() < 2) throw ConfigError("mlp.dims", "need at least input and output widths");
    Mlp mlp;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        const bool is_last = i + 2 == dims.size();
        mlp.layers.push_back(MlpLayer::random(dims[i], dims[i + 1], is_last ? last : hidden, rng));
    }
    return mlp;
}

Vector mlp_stack_forward(const Mlp& mlp, std::span<const double> x, MlpStackTape* tape) {
    Vector cur(x.begin(), x.end());
    if (tape) tape->layers.clear();
    for (const auto& layer : mlp.layers) {
        auto fwd = mlp_forward(layer, cur);
        cur = std::move(fwd.output);
        if (tape) tape->layers.push_back(std::move(fwd.tape));
    }
    return cur;
}

Vector mlp_stack_backward(const Mlp& mlp, const MlpStackTape& tape,
                          std::span<const double> upstream, std::vector<MlpGrads>& acc) {
    if (tape.layers.size() != mlp.layers.size() || acc.size() != mlp.layers.size()) {
        throw TapeError("mlp_stack_backward: tape/grad depth does not match the stack");
    }
    Vector g(upstream.begin(), upstream.end());
    for (std::size_t i = mlp.layers.size(); i-- > 0;) {
        g = mlp_backward_acc(mlp.layers[i], tape.layers[i], g, acc[i]);
    }
    return g;
}

std::vector<MlpGrads> zero_grads(const Mlp& mlp) {
    std::vector<MlpGrads> out;
    out.reserve(mlp.layers.size());
    for (const auto& l : mlp.layers) out.push_back(MlpGrads::like(l));
    return out;
}

}  // namespace msd
