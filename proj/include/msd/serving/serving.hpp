// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <list>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "msd/ctr/model.hpp"
#include "msd/synth/corpus.hpp"

namespace msd::serving {

using ItemId = synth::ItemId;
using EmbeddingVec = std::vector<float>;

/// Computes the serving embedding of one item. Must be deterministic: the
/// tiers rely on every call for the same id returning the same bytes.
using ItemEmbedder = std::function<EmbeddingVec(ItemId)>;

/// The projected item embedding e'_t of a trained model (student with its
/// LoRA adapters, then the item adaptor), rounded to float32. Unknown ids
/// embed the empty text. `model` and `ctx` must outlive the embedder.
ItemEmbedder make_item_embedder(const ctr::CtrModel& model, const ctr::FeatureContext& ctx);

enum class Source { Hot, Lru, Computed };
std::string_view source_name(Source s) noexcept;

/// Precomputed embeddings of the top-N items by exposure (ties: smaller id
/// first). Immutable once built.
class HotStore {
public:
    HotStore() = default;

    /// N larger than the catalog is clamped; warning() then says so.
    static HotStore build(const synth::ExposureTable& exposure, std::size_t n, const ItemEmbedder& embed);

    const EmbeddingVec* find(ItemId id) const noexcept;
    std::size_t size() const noexcept { return entries_.size(); }
    std::size_t dim() const noexcept { return dim_; }
    /// Members in exposure order.
    const std::vector<ItemId>& ids() const noexcept { return ids_; }
    const std::string& warning() const noexcept { return warning_; }

    /// "MSDE", u32 version 1, u32 dim, u64 count, then per record a u64 id
    /// and dim float32 values, all little-endian, in exposure order.
    void save(const std::filesystem::path& p) const;
    static HotStore load(const std::filesystem::path& p);

private:
    std::size_t dim_ = 0;
    std::vector<ItemId> ids_;
    std::unordered_map<ItemId, EmbeddingVec> entries_;
    std::string warning_;
};

struct LruCounters {
    std::uint64_t hits = 0;
    std::uint64_t misses = 0;
    std::uint64_t evictions = 0;
    std::uint64_t computes = 0;
};

struct LruResult {
    EmbeddingVec value;
    bool hit = false;
    std::optional<ItemId> evicted;
};

/// Compute-on-miss LRU cache, safe for concurrent callers. The embedder runs
/// outside the lock, so two threads missing on the same id may both compute
/// it; the second insert finds the entry present and only refreshes it.
class LruTier {
public:
    LruTier(std::size_t capacity, ItemEmbedder embed);

    LruResult get(ItemId id);

    std::size_t capacity() const noexcept { return capacity_; }
    std::size_t size() const;
    LruCounters counters() const;
    /// Cached ids from least to most recently used.
    std::vector<ItemId> contents() const;

private:
    std::size_t capacity_;
    ItemEmbedder embed_;
    mutable std::mutex mu_;
    std::list<std::pair<ItemId, EmbeddingVec>> order_;  // front = most recent
    std::unordered_map<ItemId, std::list<std::pair<ItemId, EmbeddingVec>>::iterator> index_;
    LruCounters counters_;
};

struct Lookup {
    EmbeddingVec value;
    Source source = Source::Computed;
    bool oov = false;  // id not in the catalog; embedded from empty text
    std::optional<ItemId> evicted;
};

/// Hot tier in front of the LRU tier. Hot hits never touch the LRU.
class EmbeddingService {
public:
    EmbeddingService(const HotStore& hot, LruTier& lru, std::size_t n_items)
        : hot_(&hot), lru_(&lru), n_items_(n_items) {}

    Lookup get_embedding(ItemId id) const;

private:
    const HotStore* hot_;
    LruTier* lru_;
    std::size_t n_items_;
};

/// Simulated per-event costs in microseconds. Each request pays the cost of
/// the tier that served it plus one CTR forward pass.
struct LatencyModel {
    double hot_hit_us = 100.0;
    double lru_hit_us = 100.0;
    double compute_miss_us = 2500.0;
    double ctr_forward_us = 1000.0;

    void validate() const;  // ConfigError for negative costs
    double cost(Source s) const noexcept;
    double all_hot_mean() const noexcept { return hot_hit_us + ctr_forward_us; }
    double compute_always_mean() const noexcept { return compute_miss_us + ctr_forward_us; }
};

struct ServeEvent {
    ItemId id = 0;
    Source source = Source::Computed;
    std::optional<ItemId> evicted;
};

struct ServingReport {
    std::uint64_t requests = 0;
    std::uint64_t hot_hits = 0;
    std::uint64_t lru_hits = 0;
    std::uint64_t computes = 0;
    std::uint64_t evictions = 0;
    std::uint64_t oov = 0;
    double total_latency_us = 0.0;
    double mean_latency_us = 0.0;
    double all_hot_mean_us = 0.0;
    double compute_always_mean_us = 0.0;

    double hot_hit_rate() const noexcept;
    double lru_hit_rate() const noexcept;  // of all requests
    double miss_rate() const noexcept;
    /// "key=value" lines in a fixed order.
    std::string to_key_value() const;
};

/// Recomputes the report from an event log; replay() returns exactly this.
ServingReport summarize(std::span<const ServeEvent> events, std::size_t n_items, const LatencyModel& cost);

/// Serves `trace` in order on one thread. Throws ConfigError on an empty trace.
ServingReport replay(const EmbeddingService& service, std::span<const ItemId> trace,
                     const LatencyModel& cost, std::size_t n_items,
                     std::vector<ServeEvent>* log = nullptr);

/// Requests drawn with probability proportional to exposure.
std::vector<ItemId> exposure_trace(const synth::ExposureTable& exposure, std::size_t n, Rng& rng);

/// Smallest N whose top-N items hold at least `share` of total exposure.
std::size_t hot_size_for_share(const synth::ExposureTable& exposure, double share);

/// One item id per line.
void write_trace(const std::filesystem::path& p, std::span<const ItemId> trace);
std::vector<ItemId> read_trace(const std::filesystem::path& p);

}  // namespace msd::serving
