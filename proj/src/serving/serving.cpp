// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#include "msd/serving/serving.hpp"

#include <algorithm>
#include <bit>

#include "msd/error.hpp"
#include "msd/io/binary.hpp"
#include "msd/io/text.hpp"

namespace msd::serving {

namespace {

constexpr std::string_view kMagic = "MSDE";
constexpr std::uint32_t kVersion = 1;

double rate(std::uint64_t n, std::uint64_t d) { return d ? static_cast<double>(n) / static_cast<double>(d) : 0.0; }

}  // namespace

ItemEmbedder make_item_embedder(const ctr::CtrModel& model, const ctr::FeatureContext& ctx) {
    if (!ctr::uses_semantics(model.cfg.variant) || !ctx.student())
        throw ConfigError("variant", "serving embeddings need a semantic model and its student");
    return [&model, &ctx](ItemId id) {
        const LoraLayer* lora = model.lora ? &*model.lora : nullptr;
        const Vector e = ctr::pooled_embedding(*ctx.student(), ctx.item_text(id), lora);
        const Vector p = mlp_stack_forward(model.adaptors.item, e, nullptr);
        return EmbeddingVec(p.begin(), p.end());
    };
}

std::string_view source_name(Source s) noexcept {
    switch (s) {
        case Source::Hot: return "hot";
        case Source::Lru: return "lru";
        case Source::Computed: return "computed";
    }
    return "?";
}

HotStore HotStore::build(const synth::ExposureTable& exposure, std::size_t n, const ItemEmbedder& embed) {
    HotStore s;
    if (n > exposure.entries.size()) {
        s.warning_ = "hot store capacity " + std::to_string(n) + " clamped to " +
                     std::to_string(exposure.entries.size()) + " items";
        n = exposure.entries.size();
    }
    s.ids_ = exposure.top(n);
    for (auto id : s.ids_) {
        auto v = embed(id);
        if (s.entries_.empty()) s.dim_ = v.size();
        if (v.size() != s.dim_) throw DimensionError("hot store: embeddings of different sizes");
        s.entries_.emplace(id, std::move(v));
    }
    return s;
}

const EmbeddingVec* HotStore::find(ItemId id) const noexcept {
    const auto it = entries_.find(id);
    return it == entries_.end() ? nullptr : &it->second;
}

void HotStore::save(const std::filesystem::path& p) const {
    std::string out(kMagic);
    io::put_u32(out, kVersion);
    io::put_u32(out, static_cast<std::uint32_t>(dim_));
    io::put_u64(out, ids_.size());
    for (auto id : ids_) {
        io::put_u64(out, id);
        for (float f : entries_.at(id)) io::put_u32(out, std::bit_cast<std::uint32_t>(f));
    }
    io::write_file(p, out);
}

HotStore HotStore::load(const std::filesystem::path& p) {
    const std::string data = io::read_file(p);
    io::BinaryReader r(data);
    r.expect(kMagic, "embedding file: " + p.string());
    if (const auto v = r.u32(); v != kVersion)
        throw ParseError(4, p.string() + ": unsupported embedding file version " + std::to_string(v));
    HotStore s;
    s.dim_ = r.u32();
    const std::uint64_t count = r.u64();
    if (r.remaining() != count * (8 + 4 * s.dim_))
        throw ParseError(r.pos(), p.string() + ": record data does not match the header");
    for (std::uint64_t k = 0; k < count; ++k) {
        const std::size_t at = r.pos();
        const std::uint64_t id = r.u64();
        EmbeddingVec v(s.dim_);
        for (float& f : v) f = std::bit_cast<float>(r.u32());
        if (id > UINT32_MAX || !s.entries_.emplace(static_cast<ItemId>(id), std::move(v)).second)
            throw ParseError(at, p.string() + ": bad or duplicate item id " + std::to_string(id));
        s.ids_.push_back(static_cast<ItemId>(id));
    }
    return s;
}

LruTier::LruTier(std::size_t capacity, ItemEmbedder embed) : capacity_(capacity), embed_(std::move(embed)) {
    if (!embed_) throw ConfigError("lru", "no embedder");
}

LruResult LruTier::get(ItemId id) {
    {
        std::lock_guard lock(mu_);
        if (auto it = index_.find(id); it != index_.end()) {
            order_.splice(order_.begin(), order_, it->second);
            ++counters_.hits;
            return {it->second->second, true, std::nullopt};
        }
        ++counters_.misses;
    }
    LruResult out{embed_(id), false, std::nullopt};
    std::lock_guard lock(mu_);
    ++counters_.computes;
    if (capacity_ == 0) return out;
    if (auto it = index_.find(id); it != index_.end()) {
        // Another caller inserted it meanwhile; values are identical.
        order_.splice(order_.begin(), order_, it->second);
        return out;
    }
    if (order_.size() == capacity_) {
        out.evicted = order_.back().first;
        index_.erase(order_.back().first);
        order_.pop_back();
        ++counters_.evictions;
    }
    order_.emplace_front(id, out.value);
    index_[id] = order_.begin();
    return out;
}

std::size_t LruTier::size() const {
    std::lock_guard lock(mu_);
    return order_.size();
}

LruCounters LruTier::counters() const {
    std::lock_guard lock(mu_);
    return counters_;
}

std::vector<ItemId> LruTier::contents() const {
    std::lock_guard lock(mu_);
    std::vector<ItemId> out;
    for (auto it = order_.rbegin(); it != order_.rend(); ++it) out.push_back(it->first);
    return out;
}

Lookup EmbeddingService::get_embedding(ItemId id) const {
    Lookup out;
    out.oov = id == synth::kOovId || id > n_items_;
    if (const auto* v = hot_->find(id)) {
        out.value = *v;
        out.source = Source::Hot;
        return out;
    }
    auto r = lru_->get(id);
    out.value = std::move(r.value);
    out.source = r.hit ? Source::Lru : Source::Computed;
    out.evicted = r.evicted;
    return out;
}

void LatencyModel::validate() const {
    if (hot_hit_us < 0) throw ConfigError("serving.hot_hit_us", "must be >= 0");
    if (lru_hit_us < 0) throw ConfigError("serving.lru_hit_us", "must be >= 0");
    if (compute_miss_us < 0) throw ConfigError("serving.compute_miss_us", "must be >= 0");
    if (ctr_forward_us < 0) throw ConfigError("serving.ctr_forward_us", "must be >= 0");
}

double LatencyModel::cost(Source s) const noexcept {
    switch (s) {
        case Source::Hot: return hot_hit_us + ctr_forward_us;
        case Source::Lru: return lru_hit_us + ctr_forward_us;
        case Source::Computed: return compute_miss_us + ctr_forward_us;
    }
    return 0.0;
}

double ServingReport::hot_hit_rate() const noexcept { return rate(hot_hits, requests); }
double ServingReport::lru_hit_rate() const noexcept { return rate(lru_hits, requests); }
double ServingReport::miss_rate() const noexcept { return rate(computes, requests); }

std::string ServingReport::to_key_value() const {
    auto f = io::format_double;
    return "requests=" + std::to_string(requests) + "\nhot_hits=" + std::to_string(hot_hits) +
           "\nlru_hits=" + std::to_string(lru_hits) + "\ncomputes=" + std::to_string(computes) +
           "\nevictions=" + std::to_string(evictions) + "\noov=" + std::to_string(oov) +
           "\nhot_hit_rate=" + f(hot_hit_rate()) + "\nlru_hit_rate=" + f(lru_hit_rate()) +
           "\nmiss_rate=" + f(miss_rate()) + "\ntotal_latency_us=" + f(total_latency_us) +
           "\nmean_latency_us=" + f(mean_latency_us) + "\nall_hot_mean_us=" + f(all_hot_mean_us) +
           "\ncompute_always_mean_us=" + f(compute_always_mean_us) + "\n";
}

ServingReport summarize(std::span<const ServeEvent> events, std::size_t n_items, const LatencyModel& cost) {
    ServingReport r;
    r.requests = events.size();
    for (const auto& e : events) {
        r.hot_hits += e.source == Source::Hot;
        r.lru_hits += e.source == Source::Lru;
        r.computes += e.source == Source::Computed;
        r.evictions += e.evicted.has_value();
        r.oov += e.id == synth::kOovId || e.id > n_items;
        r.total_latency_us += cost.cost(e.source);
    }
    r.mean_latency_us = r.requests ? r.total_latency_us / static_cast<double>(r.requests) : 0.0;
    r.all_hot_mean_us = cost.all_hot_mean();
    r.compute_always_mean_us = cost.compute_always_mean();
    return r;
}

ServingReport replay(const EmbeddingService& service, std::span<const ItemId> trace,
                     const LatencyModel& cost, std::size_t n_items, std::vector<ServeEvent>* log) {
    if (trace.empty()) throw ConfigError("trace", "empty request trace");
    cost.validate();
    std::vector<ServeEvent> events;
    events.reserve(trace.size());
    for (auto id : trace) {
        auto l = service.get_embedding(id);
        events.push_back({id, l.source, l.evicted});
    }
    auto r = summarize(events, n_items, cost);
    if (log) *log = std::move(events);
    return r;
}

std::vector<ItemId> exposure_trace(const synth::ExposureTable& exposure, std::size_t n, Rng& rng) {
    if (exposure.total == 0) throw ConfigError("trace", "no exposure to sample from");
    std::vector<double> cdf;
    double acc = 0.0;
    for (const auto& [id, count] : exposure.entries) cdf.push_back(acc += static_cast<double>(count));
    std::vector<ItemId> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = rng.uniform() * acc;
        const auto k = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
        out.push_back(exposure.entries[std::min(k, cdf.size() - 1)].first);
    }
    return out;
}

std::size_t hot_size_for_share(const synth::ExposureTable& exposure, double share) {
    if (share <= 0.0) return 0;
    std::uint64_t acc = 0;
    for (std::size_t k = 0; k < exposure.entries.size(); ++k) {
        acc += exposure.entries[k].second;
        if (static_cast<double>(acc) >= share * static_cast<double>(exposure.total)) return k + 1;
    }
    return exposure.entries.size();
}

void write_trace(const std::filesystem::path& p, std::span<const ItemId> trace) {
    std::string out;
    for (auto id : trace) out += std::to_string(id) + "\n";
    io::write_file(p, out);
}

std::vector<ItemId> read_trace(const std::filesystem::path& p) {
    const std::string data = io::read_file(p);
    std::vector<ItemId> out;
    std::size_t pos = 0;
    while (pos < data.size()) {
        std::size_t end = data.find('\n', pos);
        if (end == std::string::npos) end = data.size();
        std::string_view line(data.data() + pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!line.empty()) {
            try {
                const auto v = io::parse_u64(line, "item id");
                if (v > UINT32_MAX) throw ParseError(pos, "item id out of range");
                out.push_back(static_cast<ItemId>(v));
            } catch (const ParseError&) {
                throw ParseError(pos, p.string() + ": bad item id '" + std::string(line) + "'");
            }
        }
        pos = end + 1;
    }
    return out;
}

}  // namespace msd::serving
