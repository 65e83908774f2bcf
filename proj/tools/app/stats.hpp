// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <vector>

namespace msd::app {

double mean(std::span<const double> xs);
/// Sample standard deviation (n - 1); 0 for fewer than two values.
double stdev(std::span<const double> xs);

/// 1-based ranks; tied values share the average of their ranks.
std::vector<double> average_ranks(std::span<const double> xs);

/// Pearson correlation of the average ranks. nullopt when either side has
/// zero variance or there are fewer than two points.
std::optional<double> spearman(std::span<const double> xs, std::span<const double> ys);

}  // namespace msd::app
