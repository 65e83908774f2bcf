// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#include "msd/ctr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "msd/error.hpp"
#include "msd/io/text.hpp"

namespace msd::ctr {

double auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size())
        throw DimensionError("auc: " + std::to_string(scores.size()) + " scores for " +
                             std::to_string(labels.size()) + " labels");
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (std::isnan(scores[i])) throw NumericError("auc: NaN score at index " + std::to_string(i));
        n_pos += labels[i] != 0;
    }
    const std::size_t n_neg = labels.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) throw NumericError("auc: undefined with a single class");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    // Twice the rank sum is an integer (tied ranks average to half-integers),
    // so the ratio below is the exact rational U / (n_pos · n_neg).
    std::uint64_t twice_rank_sum = 0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        // Ranks i+1..j share their average (i+1+j)/2.
        for (std::size_t k = i; k < j; ++k)
            if (labels[order[k]]) twice_rank_sum += i + 1 + j;
        i = j;
    }
    const std::uint64_t twice_u = twice_rank_sum - static_cast<std::uint64_t>(n_pos) * (n_pos + 1);
    return static_cast<double>(twice_u) / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double relaimpr(double auc_model, double auc_base) {
    if (!(auc_base > 0.5))
        throw NumericError("relaimpr: baseline AUC " + io::format_double(auc_base) + " is not above 0.5");
    return ((auc_model - 0.5) / (auc_base - 0.5) - 1.0) * 100.0;
}

double logloss(std::span<const double> probs, std::span<const int> labels) {
    if (probs.size() != labels.size() || probs.empty())
        throw DimensionError("logloss: need equally many non-zero probabilities and labels");
    double total = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double p = std::clamp(probs[i], 1e-15, 1.0 - 1e-15);
        total -= labels[i] ? std::log(p) : std::log(1.0 - p);
    }
    return total / static_cast<double>(probs.size());
}

std::string EvalReport::to_key_value() const {
    std::string out = "variant=" + variant + "\nseed=" + std::to_string(seed) +
                      "\nn_examples=" + std::to_string(n_examples) + "\nauc=" + io::format_double(auc) +
                      "\nlogloss=" + io::format_double(logloss) + "\n";
    if (!baseline.empty()) {
        out += "baseline=" + baseline + "\n";
        out += "relaimpr_pct=" + (relaimpr ? io::format_double(*relaimpr) : std::string("undefined")) + "\n";
    }
    return out;
}

std::string EvalReport::tsv_header() { return "variant\tseed\tn_examples\tauc\tlogloss\tbaseline\trelaimpr_pct\n"; }

std::string EvalReport::to_tsv_row() const {
    return variant + "\t" + std::to_string(seed) + "\t" + std::to_string(n_examples) + "\t" +
           io::format_double(auc) + "\t" + io::format_double(logloss) + "\t" + baseline + "\t" +
           (relaimpr ? io::format_double(*relaimpr) : std::string()) + "\n";
}

}  // namespace msd::ctr
