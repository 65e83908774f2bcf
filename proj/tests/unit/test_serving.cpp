// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <atomic>
#include <cstring>
#include <filesystem>
#include <list>
#include <thread>

#include "doctest.h"
#include "msd/error.hpp"
#include "msd/io/text.hpp"
#include "msd/serving/serving.hpp"

using namespace msd;
using namespace msd::serving;

namespace {

// Deterministic stand-in embedding: a few floats derived from the id.
EmbeddingVec fake_embedding(ItemId id) {
    EmbeddingVec v(4);
    for (std::size_t k = 0; k < v.size(); ++k)
        v[k] = static_cast<float>(Rng::mix(id * 31 + k) % 1000) / 7.0f;
    return v;
}

synth::ItemCatalog catalog_with_exposure(std::vector<std::uint64_t> exposure) {
    synth::ItemCatalog c;
    for (std::size_t k = 0; k < exposure.size(); ++k) {
        synth::Item it;
        it.id = static_cast<ItemId>(k + 1);
        it.exposure = exposure[k];
        c.items.push_back(it);
    }
    return c;
}

// Reference single-list LRU: front = most recent.
struct ReferenceLru {
    std::size_t cap;
    std::list<ItemId> items;
    std::uint64_t hits = 0, evictions = 0;

    void access(ItemId id) {
        auto it = std::find(items.begin(), items.end(), id);
        if (it != items.end()) {
            ++hits;
            items.erase(it);
        } else if (cap > 0 && items.size() == cap) {
            items.pop_back();
            ++evictions;
        }
        if (cap > 0) items.push_front(id);
    }
    std::vector<ItemId> lru_first() const { return {items.rbegin(), items.rend()}; }
};

bool same_bytes(const EmbeddingVec& a, const EmbeddingVec& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

}  // namespace

TEST_CASE("hot store membership is the top-N by exposure") {
    const auto catalog = catalog_with_exposure({5, 9, 9, 1, 7, 9, 2});
    const auto table = synth::exposure_table(catalog);
    const auto s = HotStore::build(table, 3, fake_embedding);
    CHECK(s.ids() == std::vector<ItemId>{2, 3, 6});
    CHECK(s.find(2) != nullptr);
    CHECK(s.find(5) == nullptr);
    CHECK(s.warning().empty());

    Rng rng(3);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<std::uint64_t> e(1 + rng.below(40));
        for (auto& x : e) x = rng.below(6);
        const auto t = synth::exposure_table(catalog_with_exposure(e));
        const std::size_t n = rng.below(e.size() + 1);
        // Full-sort oracle.
        std::vector<ItemId> ids(e.size());
        for (std::size_t k = 0; k < ids.size(); ++k) ids[k] = static_cast<ItemId>(k + 1);
        std::sort(ids.begin(), ids.end(), [&](ItemId a, ItemId b) {
            return e[a - 1] != e[b - 1] ? e[a - 1] > e[b - 1] : a < b;
        });
        ids.resize(n);
        CHECK(HotStore::build(t, n, fake_embedding).ids() == ids);
    }
}

TEST_CASE("hot store edge sizes") {
    const auto catalog = catalog_with_exposure({3, 1, 2});
    const auto table = synth::exposure_table(catalog);
    LruTier lru(2, fake_embedding);

    SUBCASE("N = #items makes every lookup hot") {
        const auto hot = HotStore::build(table, 3, fake_embedding);
        const EmbeddingService svc(hot, lru, 3);
        for (ItemId id : {1u, 2u, 3u, 2u}) CHECK(svc.get_embedding(id).source == Source::Hot);
        CHECK(lru.counters().hits + lru.counters().misses == 0);
    }
    SUBCASE("N = 0 sends everything to the LRU tier") {
        const auto hot = HotStore::build(table, 0, fake_embedding);
        CHECK(hot.size() == 0);
        const EmbeddingService svc(hot, lru, 3);
        CHECK(svc.get_embedding(1).source == Source::Computed);
        CHECK(svc.get_embedding(1).source == Source::Lru);
    }
    SUBCASE("N > #items is clamped with a warning") {
        const auto hot = HotStore::build(table, 10, fake_embedding);
        CHECK(hot.size() == 3);
        CHECK_FALSE(hot.warning().empty());
    }
}

TEST_CASE("cold item is computed once, then served from the LRU") {
    const auto table = synth::exposure_table(catalog_with_exposure({3, 1, 2}));
    const auto hot = HotStore::build(table, 1, fake_embedding);
    LruTier lru(2, fake_embedding);
    const EmbeddingService svc(hot, lru, 3);
    const auto before = lru.counters();
    const auto h = svc.get_embedding(1);
    CHECK(h.source == Source::Hot);
    CHECK(lru.counters().hits == before.hits);
    CHECK(lru.counters().misses == before.misses);
    const auto a = svc.get_embedding(2), b = svc.get_embedding(2);
    CHECK(a.source == Source::Computed);
    CHECK(b.source == Source::Lru);
    CHECK(same_bytes(a.value, b.value));
    CHECK(same_bytes(a.value, fake_embedding(2)));
    const auto oov = svc.get_embedding(99);
    CHECK(oov.oov);
    CHECK(oov.source == Source::Computed);
}

TEST_CASE("hand-traced LRU: 1,2,3,1 with capacity 2") {
    LruTier lru(2, fake_embedding);
    std::vector<ItemId> evicted;
    for (ItemId id : {1u, 2u, 3u, 1u}) {
        const auto r = lru.get(id);
        if (r.evicted) evicted.push_back(*r.evicted);
    }
    CHECK(lru.contents() == std::vector<ItemId>{3, 1});
    CHECK(evicted == std::vector<ItemId>{1, 2});
    const auto c = lru.counters();
    CHECK(c.hits == 0);
    CHECK(c.misses == 4);
    CHECK(c.computes == 4);
    CHECK(c.evictions == 2);
}

TEST_CASE("LRU tier equals the reference simulation") {
    Rng rng(5);
    for (int rep = 0; rep < 40; ++rep) {
        const std::size_t cap = rng.below(12);
        const std::size_t support = 1 + rng.below(30);
        const std::size_t len = rep < 4 ? 10000 : 1 + rng.below(2000);
        LruTier lru(cap, fake_embedding);
        ReferenceLru ref{cap, {}};
        for (std::size_t i = 0; i < len; ++i) {
            const auto id = static_cast<ItemId>(1 + rng.below(support));
            const auto r = lru.get(id);
            const bool ref_hit = std::find(ref.items.begin(), ref.items.end(), id) != ref.items.end();
            std::optional<ItemId> ref_evicted;
            if (!ref_hit && cap > 0 && ref.items.size() == cap) ref_evicted = ref.items.back();
            ref.access(id);
            REQUIRE(r.hit == ref_hit);
            REQUIRE(r.evicted == ref_evicted);
            REQUIRE(lru.size() <= cap);
        }
        CHECK(lru.contents() == ref.lru_first());
        CHECK(lru.counters().hits == ref.hits);
        CHECK(lru.counters().evictions == ref.evictions);
        CHECK(lru.counters().hits + lru.counters().misses == len);
    }
}

TEST_CASE("a larger LRU never hits less") {
    Rng rng(6);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<ItemId> trace(3000);
        for (auto& id : trace) id = static_cast<ItemId>(1 + rng.below(60));
        std::uint64_t prev = 0;
        for (std::size_t cap = 0; cap <= 64; cap += 4) {
            LruTier lru(cap, fake_embedding);
            for (auto id : trace) lru.get(id);
            CHECK(lru.counters().hits >= prev);
            prev = lru.counters().hits;
        }
    }
}

TEST_CASE("concurrent lookups stay consistent") {
    const auto table = synth::exposure_table(catalog_with_exposure(std::vector<std::uint64_t>(200, 1)));
    const auto hot = HotStore::build(table, 20, fake_embedding);
    LruTier lru(32, fake_embedding);
    const EmbeddingService svc(hot, lru, 200);
    std::atomic<std::uint64_t> wrong{0}, lru_requests{0}, over{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < 8; ++t) {
        pool.emplace_back([&, t] {
            Rng rng(100 + t);
            for (int i = 0; i < 5000; ++i) {
                const auto id = static_cast<ItemId>(1 + rng.below(200));
                const auto l = svc.get_embedding(id);
                if (!same_bytes(l.value, fake_embedding(id))) ++wrong;
                if (l.source != Source::Hot) ++lru_requests;
                if (lru.size() > lru.capacity()) ++over;
            }
        });
    }
    for (auto& th : pool) th.join();
    CHECK(wrong == 0);
    CHECK(over == 0);
    const auto c = lru.counters();
    CHECK(c.hits + c.misses == lru_requests);
    CHECK(c.computes == c.misses);
    CHECK(lru.size() == 32);
}

TEST_CASE("replay accounting") {
    const auto table = synth::exposure_table(catalog_with_exposure({10, 8, 6, 4, 2}));
    LatencyModel cost;

    SUBCASE("all-hot trace costs hot_hit + ctr_forward per request") {
        const auto hot = HotStore::build(table, 5, fake_embedding);
        LruTier lru(2, fake_embedding);
        const EmbeddingService svc(hot, lru, 5);
        const std::vector<ItemId> trace = {1, 2, 3, 4, 5, 5, 1};
        const auto r = replay(svc, trace, cost, 5);
        CHECK(r.mean_latency_us == cost.hot_hit_us + cost.ctr_forward_us);
        CHECK(r.hot_hits == 7);
    }
    SUBCASE("crafted 10-request trace matches a hand simulation") {
        // Hot = {1}. LRU capacity 2 over 2,3,2,4,3,1,5,4,4,2:
        //  2 C [2]   3 C [2,3]   2 L [3,2]   4 C ev3 [2,4]   3 C ev2 [4,3]
        //  1 H       5 C ev4 [3,5]   4 C ev3 [5,4]   4 L [5,4]   2 C ev5 [4,2]
        const auto hot = HotStore::build(table, 1, fake_embedding);
        LruTier lru(2, fake_embedding);
        const EmbeddingService svc(hot, lru, 5);
        const std::vector<ItemId> trace = {2, 3, 2, 4, 3, 1, 5, 4, 4, 2};
        std::vector<ServeEvent> log;
        const auto r = replay(svc, trace, cost, 5, &log);
        CHECK(r.requests == 10);
        CHECK(r.hot_hits == 1);
        CHECK(r.lru_hits == 2);
        CHECK(r.computes == 7);
        CHECK(r.evictions == 5);
        std::vector<ItemId> evicted;
        for (const auto& e : log)
            if (e.evicted) evicted.push_back(*e.evicted);
        CHECK(evicted == std::vector<ItemId>{3, 2, 4, 3, 5});
        CHECK(lru.contents() == std::vector<ItemId>{4, 2});
        const double total = 1 * 1100.0 + 2 * 1100.0 + 7 * 3500.0;
        CHECK(r.total_latency_us == total);
        CHECK(r.mean_latency_us == total / 10.0);
        CHECK(r.miss_rate() == 0.7);
        // The report is a pure function of the event log.
        CHECK(summarize(log, 5, cost).to_key_value() == r.to_key_value());
    }
    SUBCASE("capacity above the support means no evictions") {
        const auto hot = HotStore::build(table, 0, fake_embedding);
        LruTier lru(5, fake_embedding);
        const EmbeddingService svc(hot, lru, 5);
        Rng rng(8);
        const auto trace = exposure_trace(table, 5000, rng);
        const auto r = replay(svc, trace, cost, 5);
        CHECK(r.evictions == 0);
        CHECK(r.computes <= 5);
    }
    SUBCASE("bad inputs") {
        const auto hot = HotStore::build(table, 1, fake_embedding);
        LruTier lru(1, fake_embedding);
        const EmbeddingService svc(hot, lru, 5);
        CHECK_THROWS_AS(replay(svc, {}, cost, 5), ConfigError);
        LatencyModel neg;
        neg.lru_hit_us = -1.0;
        const std::vector<ItemId> one = {1};
        CHECK_THROWS_AS(replay(svc, one, neg, 5), ConfigError);
    }
}

TEST_CASE("exposure traces and hot sizing") {
    const auto table = synth::exposure_table(catalog_with_exposure({50, 30, 10, 10}));
    CHECK(hot_size_for_share(table, 0.0) == 0);
    CHECK(hot_size_for_share(table, 0.5) == 1);
    CHECK(hot_size_for_share(table, 0.51) == 2);
    CHECK(hot_size_for_share(table, 1.0) == 4);
    Rng rng(9);
    const auto trace = exposure_trace(table, 20000, rng);
    const auto ones = std::count(trace.begin(), trace.end(), 1u);
    CHECK(static_cast<double>(ones) / 20000.0 == doctest::Approx(0.5).epsilon(0.04));
    Rng again(9);
    CHECK(exposure_trace(table, 20000, again) == trace);
}

TEST_CASE("hot store and trace files") {
    const auto dir = std::filesystem::temp_directory_path() / "msd_test_serving";
    std::filesystem::create_directories(dir);
    const auto table = synth::exposure_table(catalog_with_exposure({4, 8, 6}));
    const auto hot = HotStore::build(table, 2, fake_embedding);
    hot.save(dir / "hot.bin");
    const auto back = HotStore::load(dir / "hot.bin");
    CHECK(back.ids() == hot.ids());
    CHECK(back.dim() == 4);
    for (auto id : hot.ids()) CHECK(same_bytes(*back.find(id), *hot.find(id)));
    const auto bytes = io::read_file(dir / "hot.bin");
    CHECK(bytes.size() == 4 + 4 + 4 + 8 + 2 * (8 + 16));
    io::write_file(dir / "cut.bin", bytes.substr(0, bytes.size() - 1));
    CHECK_THROWS_AS(HotStore::load(dir / "cut.bin"), ParseError);

    const std::vector<ItemId> trace = {3, 1, 4, 1, 5};
    write_trace(dir / "trace.txt", trace);
    CHECK(io::read_file(dir / "trace.txt") == "3\n1\n4\n1\n5\n");
    CHECK(read_trace(dir / "trace.txt") == trace);
    io::write_file(dir / "bad.txt", "3\nx\n");
    CHECK_THROWS_AS(read_trace(dir / "bad.txt"), ParseError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("model embeddings are byte-identical across tiers") {
    synth::SynthConfig sc;
    sc.n_items = 30;
    sc.n_users = 10;
    sc.n_rows = 40;
    Rng rng(10);
    const auto corpus = synth::generate_corpus(sc, rng);
    std::vector<std::string> texts;
    for (const auto& it : corpus.catalog.items) texts.push_back(it.text);
    const auto vocab = distill::Vocab::build(texts);
    Rng srng(11);
    const auto student = distill::StudentModel::init(vocab.size(), {2, 4, 6}, srng);
    const ctr::FeatureContext ctx(corpus, &student, &vocab);
    ctr::CtrConfig cfg;
    cfg.adaptor = {5, {4}};
    Rng mrng(12);
    auto model = ctr::CtrModel::init(cfg, corpus.users.size(), corpus.catalog.size(), student.d_sem(), &student, mrng);
    for (double& x : model.lora->b().values()) x = mrng.normal();
    const auto embed = make_item_embedder(model, ctx);
    const auto table = synth::exposure_table(corpus.catalog);
    const auto hot = HotStore::build(table, 10, embed);
    LruTier lru(8, embed);
    const EmbeddingService svc(hot, lru, corpus.catalog.size());
    for (ItemId id = 1; id <= 30; ++id) {
        const auto direct = embed(id);
        CHECK(direct.size() == 5);
        const auto first = svc.get_embedding(id);
        const auto second = svc.get_embedding(id);
        CHECK(same_bytes(first.value, direct));
        CHECK(same_bytes(second.value, direct));
        if (!hot.find(id)) {
            CHECK(first.source == Source::Computed);
            CHECK(second.source == Source::Lru);
        }
    }
    ctr::CtrConfig id_only;
    id_only.variant = ctr::Variant::IdOnly;
    auto m0 = ctr::CtrModel::init(id_only, 10, 30, 0, nullptr, mrng);
    CHECK_THROWS_AS(make_item_embedder(m0, ctx), ConfigError);
}
