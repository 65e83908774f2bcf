// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>

namespace msd::ctr {

/// Area under the ROC curve by the rank-sum (Mann-Whitney) formula:
/// sort scores once (O(n log n)), give tied scores their average rank r_i,
/// then AUC = (Σ_{positives} r_i − n_pos(n_pos+1)/2) / (n_pos · n_neg).
/// Ties between a positive and a negative therefore count 1/2.
/// Throws NumericError when the labels hold a single class or a score is NaN.
double auc(std::span<const double> scores, std::span<const int> labels);

/// ((auc_model − 0.5) / (auc_base − 0.5) − 1) · 100. Throws NumericError
/// when auc_base <= 0.5.
double relaimpr(double auc_model, double auc_base);

/// Mean binary cross-entropy; probabilities are clamped to [1e-15, 1 − 1e-15].
double logloss(std::span<const double> probs, std::span<const int> labels);

struct EvalReport {
    std::string variant;
    std::uint64_t seed = 0;
    std::size_t n_examples = 0;
    double auc = 0.0;
    double logloss = 0.0;
    std::string baseline;              // empty: no comparison
    std::optional<double> relaimpr;    // set when the baseline AUC > 0.5

    /// "key=value" lines in a fixed order.
    std::string to_key_value() const;
    /// TAB-separated header and row with the same fields.
    static std::string tsv_header();
    std::string to_tsv_row() const;
};

}  // namespace msd::ctr
