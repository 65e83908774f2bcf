// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "msd/numerics/rng.hpp"
#include "msd/synth/corpus.hpp"

namespace msd::knowledge {

struct SamplingConfig {
    std::size_t n = 200;                 // total sample size
    std::size_t per_category_min = 5;    // floor per stratum
};

/// Stratified + importance sampling without replacement.
///
/// Each stratum first receives min(m, |stratum|) members, then the remaining
/// budget is spread over all not-yet-chosen candidates. Both stages use
/// systematic probability-proportional-to-size sampling (randomly ordered
/// candidates, one uniform start, unit steps along the cumulative inclusion
/// probabilities), so a candidate's inclusion probability is exactly
/// k·w_i / Σw within its stage; candidates whose share would exceed 1 are
/// taken with certainty first. Returns candidate indices in ascending order.
///
/// Throws ConfigError when n < m · (#non-empty strata).
std::vector<std::size_t> stratified_pps_sample(std::span<const std::size_t> stratum_of,
                                               std::span<const double> weights, std::size_t n,
                                               std::size_t m, Rng& rng);

/// Items for the distillation set: strata are categories, weights are
/// sqrt(exposure). Returns ascending item ids. n >= #items returns the catalog.
std::vector<synth::ItemId> sample_distillation_set(const synth::ItemCatalog& catalog,
                                                   const synth::ExposureTable& exposure,
                                                   const SamplingConfig& cfg, Rng& rng);

/// The category that occurs most often in the user's history; ties go to the
/// category listed first in the vocabulary.
std::string dominant_category(const synth::Corpus& corpus, const synth::User& user);

/// Users for the distillation set, drawn from `candidates`: strata are
/// dominant categories, weights are sqrt(history length).
std::vector<synth::UserId> sample_distillation_users(const synth::Corpus& corpus,
                                                     std::span<const synth::UserId> candidates,
                                                     const SamplingConfig& cfg, Rng& rng);

}  // namespace msd::knowledge
