// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace msd {

/// A named trainable tensor: its values and the matching gradient buffer.
/// Frozen tensors are simply never turned into a ParamBlock.
struct ParamBlock {
    std::string name;
    std::span<double> value;
    std::span<double> grad;
};

enum class OptimizerKind { SGD, Adam };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::Adam;
    double learning_rate = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    /// Global L2-norm gradient clip; <= 0 disables.
    double clip_norm = 0.0;
    /// Decoupled weight decay: every step also applies value -= lr·wd·value.
    double weight_decay = 0.0;
};

/// SGD or Adam over a fixed list of ParamBlocks. Adam moments are keyed by
/// block position, so every step must pass the blocks in the same order.
class Optimizer {
public:
    explicit Optimizer(OptimizerConfig cfg) : cfg_(cfg) {}

    void step(std::span<const ParamBlock> params);

    std::uint64_t steps() const noexcept { return step_; }
    const OptimizerConfig& config() const noexcept { return cfg_; }

private:
    OptimizerConfig cfg_;
    std::uint64_t step_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

void zero_grads(std::span<const ParamBlock> params);
double grad_norm(std::span<const ParamBlock> params);

}  // namespace msd
