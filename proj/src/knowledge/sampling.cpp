// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#include "msd/knowledge/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "msd/error.hpp"

namespace msd::knowledge {

namespace {

// Systematic PPS: chooses k of `pool` (indices into weights) and appends to `out`.
void systematic_pps(std::vector<std::size_t> pool, std::span<const double> weights, std::size_t k,
                    Rng& rng, std::vector<std::size_t>& out) {
    if (k == 0 || pool.empty()) return;
    if (k >= pool.size()) {
        out.insert(out.end(), pool.begin(), pool.end());
        return;
    }
    // Certainty selections: any candidate with k·w/Σw >= 1.
    while (k > 0) {
        double total = 0.0;
        for (auto i : pool) total += weights[i];
        if (total <= 0.0) break;
        std::vector<std::size_t> certain, rest;
        for (auto i : pool) (static_cast<double>(k) * weights[i] / total >= 1.0 ? certain : rest).push_back(i);
        if (certain.empty()) break;
        if (certain.size() >= k) {
            std::sort(certain.begin(), certain.end());
            out.insert(out.end(), certain.begin(), certain.begin() + static_cast<std::ptrdiff_t>(k));
            return;
        }
        out.insert(out.end(), certain.begin(), certain.end());
        k -= certain.size();
        pool = std::move(rest);
    }
    if (k == 0) return;

    // Random order removes the dependence on candidate listing.
    for (std::size_t i = pool.size(); i > 1; --i) std::swap(pool[i - 1], pool[rng.below(i)]);
    double total = 0.0;
    for (auto i : pool) total += weights[i];
    const bool uniform = total <= 0.0;
    const double start = rng.uniform();
    double cum = 0.0;
    std::size_t next = 0;  // next selection point is start + next
    for (auto i : pool) {
        const double pi = uniform ? static_cast<double>(k) / static_cast<double>(pool.size())
                                  : static_cast<double>(k) * weights[i] / total;
        cum += pi;
        if (next < k && start + static_cast<double>(next) < cum) {
            out.push_back(i);
            ++next;
        }
    }
    // Rounding can leave the last point just past the final cumulative sum.
    for (std::size_t j = pool.size(); next < k && j-- > 0;) {
        if (std::find(out.begin(), out.end(), pool[j]) == out.end()) {
            out.push_back(pool[j]);
            ++next;
        }
    }
}

}  // namespace

std::vector<std::size_t> stratified_pps_sample(std::span<const std::size_t> stratum_of,
                                               std::span<const double> weights, std::size_t n,
                                               std::size_t m, Rng& rng) {
    if (stratum_of.size() != weights.size())
        throw DimensionError("stratified_pps_sample: strata and weights differ in length");
    std::map<std::size_t, std::vector<std::size_t>> strata;
    for (std::size_t i = 0; i < stratum_of.size(); ++i) strata[stratum_of[i]].push_back(i);
    if (n < m * strata.size()) {
        throw ConfigError("per_category_min", "sample size " + std::to_string(n) + " < " +
                                                  std::to_string(m) + " x " +
                                                  std::to_string(strata.size()) + " strata");
    }
    if (n >= stratum_of.size()) {
        std::vector<std::size_t> all(stratum_of.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        return all;
    }
    std::vector<std::size_t> chosen;
    for (const auto& [key, members] : strata) {
        Rng sub = rng.split(0x5700 + key);
        systematic_pps(members, weights, std::min(m, members.size()), sub, chosen);
    }
    std::vector<bool> taken(stratum_of.size(), false);
    for (auto i : chosen) taken[i] = true;
    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < stratum_of.size(); ++i)
        if (!taken[i]) rest.push_back(i);
    Rng sub = rng.split(0x5700FFFF);
    systematic_pps(rest, weights, n - chosen.size(), sub, chosen);
    std::sort(chosen.begin(), chosen.end());
    return chosen;
}

std::vector<synth::ItemId> sample_distillation_set(const synth::ItemCatalog& catalog,
                                                   const synth::ExposureTable& exposure,
                                                   const SamplingConfig& cfg, Rng& rng) {
    std::map<std::string, std::size_t> cat_index;
    std::vector<std::size_t> strata;
    std::vector<double> weights;
    for (const auto& it : catalog.items) {
        const auto [pos, _] = cat_index.emplace(it.category, cat_index.size());
        strata.push_back(pos->second);
        weights.push_back(std::sqrt(static_cast<double>(exposure.frequency(it.id))));
    }
    std::vector<synth::ItemId> out;
    for (auto i : stratified_pps_sample(strata, weights, cfg.n, cfg.per_category_min, rng))
        out.push_back(catalog.items[i].id);
    return out;
}

std::string dominant_category(const synth::Corpus& corpus, const synth::User& user) {
    std::map<std::string, std::size_t> counts;
    for (auto id : user.history) ++counts[corpus.catalog.at(id).category];
    std::string best;
    std::size_t best_count = 0;
    for (const auto& c : corpus.vocab.categories) {
        const auto it = counts.find(c.name);
        if (it != counts.end() && it->second > best_count) {
            best = c.name;
            best_count = it->second;
        }
    }
    return best;
}

std::vector<synth::UserId> sample_distillation_users(const synth::Corpus& corpus,
                                                     std::span<const synth::UserId> candidates,
                                                     const SamplingConfig& cfg, Rng& rng) {
    std::map<std::string, std::size_t> cat_index;
    for (const auto& c : corpus.vocab.categories) cat_index.emplace(c.name, cat_index.size());
    std::vector<std::size_t> strata;
    std::vector<double> weights;
    for (auto uid : candidates) {
        const auto& user = corpus.users.at(uid - 1);
        const auto cat = dominant_category(corpus, user);
        strata.push_back(cat.empty() ? cat_index.size() : cat_index.at(cat));
        weights.push_back(std::sqrt(static_cast<double>(user.history.size())));
    }
    std::vector<synth::UserId> out;
    for (auto i : stratified_pps_sample(strata, weights, cfg.n, cfg.per_category_min, rng))
        out.push_back(candidates[i]);
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace msd::knowledge
