// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#include "msd/numerics/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "msd/error.hpp"

namespace msd {

namespace {

double finite_loss(const GradCheckLoss& loss, bool with_grads) {
    const double v = loss(with_grads);
    if (!std::isfinite(v)) throw NumericError("grad_check: loss is not finite");
    return v;
}

}  // namespace

GradCheckReport grad_check(std::span<const GradCheckBlock> blocks, const GradCheckLoss& loss,
                           const GradCheckOptions& opts) {
    finite_loss(loss, true);
    std::vector<std::vector<double>> analytic;
    analytic.reserve(blocks.size());
    for (const auto& b : blocks) analytic.emplace_back(b.grad.begin(), b.grad.end());

    GradCheckReport report;
    for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
        const auto& block = blocks[bi];
        if (block.frozen) {
            for (double g : analytic[bi])
                if (g != 0.0) report.frozen_grads_zero = false;
            continue;
        }
        const std::size_t n = block.value.size();
        const std::size_t stride =
            (opts.max_per_block == 0 || n <= opts.max_per_block) ? 1 : n / opts.max_per_block;
        for (std::size_t i = 0; i < n; i += stride) {
            const double saved = block.value[i];
            block.value[i] = saved + opts.step;
            const double up = finite_loss(loss, false);
            block.value[i] = saved - opts.step;
            const double down = finite_loss(loss, false);
            block.value[i] = saved;
            const double numeric = (up - down) / (2.0 * opts.step);
            const double a = analytic[bi][i];
            const double denom = std::max({std::abs(a), std::abs(numeric), opts.floor});
            const double rel = std::abs(a - numeric) / denom;
            ++report.checked;
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst = block.name + "[" + std::to_string(i) + "]";
            }
        }
    }
    return report;
}

}  // namespace msd
