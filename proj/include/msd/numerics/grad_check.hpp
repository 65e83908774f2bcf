// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>

namespace msd {

/// One parameter tensor of the fragment under test. For frozen tensors the
/// fragment must still expose a gradient buffer; the check asserts that it
/// stays exactly zero and skips the finite-difference comparison.
struct GradCheckBlock {
    std::string name;
    std::span<double> value;
    std::span<double> grad;
    bool frozen = false;
};

struct GradCheckOptions {
    double step = 1e-6;
    /// Relative error is |analytic - numeric| / max(|analytic|, |numeric|, floor).
    double floor = 1e-3;
    /// Check at most this many entries per block (evenly strided); 0 = all.
    std::size_t max_per_block = 0;
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::string worst;  // "block[index]"
    std::size_t checked = 0;
    bool frozen_grads_zero = true;
};

/// `loss(true)` must zero every grad buffer, then fill it with the analytic
/// gradient and return the loss; `loss(false)` only returns the loss.
/// Throws NumericError if any evaluated loss is non-finite.
using GradCheckLoss = std::function<double(bool with_grads)>;

GradCheckReport grad_check(std::span<const GradCheckBlock> blocks, const GradCheckLoss& loss,
                           const GradCheckOptions& opts = {});

}  // namespace msd
