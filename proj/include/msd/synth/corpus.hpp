// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "msd/numerics/rng.hpp"

namespace msd::synth {

using ItemId = std::uint32_t;
using UserId = std::uint32_t;

/// Id 0 is reserved for out-of-vocabulary lookups in every id space.
inline constexpr std::uint32_t kOovId = 0;

struct Category {
    std::string name;  // also the noun used in item text, e.g. "ice-cream"
};

struct Brand {
    std::string name;
    std::vector<std::string> categories;
};

/// The fixed semantic vocabulary of the synthetic world.
///
/// Explicit tags appear verbatim in item text. Implicit tags never appear in
/// text; they follow from deterministic rules keyed on brand or category
/// (the "world knowledge" a teacher must supply).
struct AttributeVocab {
    std::vector<Category> categories;
    std::vector<Brand> brands;
    std::vector<std::string> flavors;
    std::vector<std::string> explicit_tags;
    std::vector<std::string> implicit_tags;
    std::map<std::string, std::vector<std::string>> implicit_rules;  // brand|category -> tags

    /// The built-in vocabulary used by every profile.
    static AttributeVocab standard();

    /// Implicit tags implied by a brand and category, in implicit_tags order.
    std::vector<std::string> implied_tags(const std::string& brand,
                                          const std::string& category) const;

    /// explicit_tags followed by implicit_tags; indices into this list are the
    /// "tag ids" used by user preferences.
    std::vector<std::string> all_tags() const;
    int tag_index(const std::string& tag) const;  // -1 when unknown
};

struct Item {
    ItemId id = kOovId;
    std::string category;
    std::string brand;
    std::string flavor;
    std::vector<std::string> explicit_tags;  // in AttributeVocab order
    std::uint64_t exposure = 0;
    std::string text;
};

struct ItemCatalog {
    std::vector<Item> items;  // items[k].id == k + 1

    const Item& at(ItemId id) const;
    bool contains(ItemId id) const noexcept { return id >= 1 && id <= items.size(); }
    std::size_t size() const noexcept { return items.size(); }
};

struct User {
    UserId id = kOovId;
    std::vector<ItemId> history;               // most recent last
    std::vector<std::pair<int, double>> prefs;  // (tag index, weight)
};

struct InteractionRow {
    std::uint64_t row_id = 0;
    UserId user_id = kOovId;
    ItemId target_item_id = kOovId;
    std::vector<ItemId> history;  // most recent last
    std::uint32_t hour_bucket = 0;
    std::uint32_t device = 0;
    int label = 0;
    std::uint64_t timestamp = 0;
};

inline constexpr std::uint32_t kHourBuckets = 4;
inline constexpr std::uint32_t kDevices = 2;

struct SynthConfig {
    std::size_t n_items = 500;
    std::size_t n_users = 2000;
    std::size_t n_rows = 20000;
    std::size_t min_history = 4;
    std::size_t max_history = 10;
    /// Weight of semantic affinity in the click logit, in [0, 1].
    double beta = 1.0;
    double zipf_s = 1.1;
    /// Exposure of the rank-1 item; rank r gets max(1, round(head / r^s)).
    double head_exposure = 50000.0;
    double target_ctr = 0.2;
    double affinity_scale = 2.0;
    double popularity_scale = 0.3;
    double item_noise = 0.3;
    /// Strength with which preferences shape the behavior sequence.
    double history_affinity = 1.5;
};

struct Corpus {
    AttributeVocab vocab;
    ItemCatalog catalog;
    std::vector<User> users;  // users[k].id == k + 1
    std::vector<InteractionRow> rows;
    std::vector<double> popularity;  // item-only logit term, popularity[id - 1]
    double base_logit = 0.0;         // calibrated offset
};

/// Validates `cfg` (throws ConfigError naming the key) and generates the
/// corpus. Click probability per row is
///   sigmoid(base + beta * affinity_scale * affinity(u, i) + popularity(i) + context)
/// with `base` calibrated by bisection so the mean probability equals
/// cfg.target_ctr; labels are Bernoulli draws from `rng`.
Corpus generate_corpus(const SynthConfig& cfg, Rng& rng);

void validate(const SynthConfig& cfg);

/// Sum of the user's tag weights over the item's explicit and implicit tags.
double attribute_affinity(const AttributeVocab& vocab, const User& user, const Item& item);

/// The item-only part of the click logit (popularity plus item noise).
/// Stored alongside the catalog so the ground truth is recoverable.
double id_popularity(const Corpus& corpus, ItemId id);

/// (item_id, exposure) sorted by exposure descending, ties by item_id ascending.
struct ExposureTable {
    std::vector<std::pair<ItemId, std::uint64_t>> entries;
    std::vector<std::uint64_t> by_id;  // by_id[item_id]; slot 0 (OOV) is 0
    std::uint64_t total = 0;

    std::uint64_t frequency(ItemId id) const;  // 0 for unknown ids
    std::vector<ItemId> top(std::size_t n) const;
};

ExposureTable exposure_table(const ItemCatalog& catalog);

enum class Split { Train, Valid, Test };

/// 80/10/10 by a hash of the user id; stable across runs.
Split split_of(UserId user);

/// Text of a user: their history items' titles joined with ", ".
std::string user_text(const ItemCatalog& catalog, const User& user);

// --- persistence -------------------------------------------------------------
//
// Three tab-separated UTF-8 files, each starting with a header line
// "#msd-<kind>\tv1". Field order:
//   catalog.tsv       item_id, category, brand, flavor, explicit_tags(,), exposure, text
//   users.tsv         user_id, history(,), prefs(tag:weight,)
//   interactions.tsv  row_id, user_id, target_item_id, history(,), hour, device, label, timestamp
// A fourth file, world.tsv, stores base_logit and per-item popularity terms.

void write_corpus(const Corpus& corpus, const std::filesystem::path& dir);
Corpus read_corpus(const std::filesystem::path& dir);

}  // namespace msd::synth
