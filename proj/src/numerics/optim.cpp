// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#include "msd/numerics/optim.hpp"

#include <algorithm>
#include <cmath>

#include "msd/error.hpp"

namespace msd {

void zero_grads(std::span<const ParamBlock> params) {
    for (const auto& p : params) std::fill(p.grad.begin(), p.grad.end(), 0.0);
}

double grad_norm(std::span<const ParamBlock> params) {
    double acc = 0.0;
    for (const auto& p : params)
        for (double g : p.grad) acc += g * g;
    return std::sqrt(acc);
}

void Optimizer::step(std::span<const ParamBlock> params) {
    const double gn = grad_norm(params);
    if (!std::isfinite(gn)) throw NumericError("optimizer: non-finite gradient");
    const double clip = (cfg_.clip_norm > 0.0 && gn > cfg_.clip_norm) ? cfg_.clip_norm / gn : 1.0;
    ++step_;
    const double decay = 1.0 - cfg_.learning_rate * cfg_.weight_decay;
    if (cfg_.weight_decay > 0.0) {
        for (const auto& p : params)
            for (double& v : p.value) v *= decay;
    }

    if (cfg_.kind == OptimizerKind::SGD) {
        for (const auto& p : params) {
            for (std::size_t i = 0; i < p.value.size(); ++i)
                p.value[i] -= cfg_.learning_rate * clip * p.grad[i];
        }
        return;
    }

    if (m_.empty()) {
        for (const auto& p : params) {
            m_.emplace_back(p.value.size(), 0.0);
            v_.emplace_back(p.value.size(), 0.0);
        }
    }
    if (m_.size() != params.size()) {
        throw Error("optimizer: parameter list changed between steps");
    }
    const double t = static_cast<double>(step_);
    const double bc1 = 1.0 - std::pow(cfg_.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, t);
    for (std::size_t b = 0; b < params.size(); ++b) {
        const auto& p = params[b];
        auto& m = m_[b];
        auto& v = v_[b];
        if (m.size() != p.value.size()) throw Error("optimizer: block '" + p.name + "' resized");
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double g = p.grad[i] * clip;
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p.value[i] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon);
        }
    }
}

}  // namespace msd
