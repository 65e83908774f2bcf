// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#include "msd/synth/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "msd/error.hpp"

namespace msd::synth {

namespace {

double sigmoid(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

constexpr double kHourEffect[kHourBuckets] = {0.0, 0.2, -0.2, 0.1};
constexpr double kDeviceEffect[kDevices] = {0.0, -0.3};

/// Draws indices proportionally to non-negative weights via a cumulative
/// table and binary search.
class WeightedSampler {
public:
    explicit WeightedSampler(const std::vector<double>& weights) : cdf_(weights.size()) {
        double acc = 0.0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            acc += weights[i];
            cdf_[i] = acc;
        }
    }

    std::size_t draw(Rng& rng) const {
        const double u = rng.uniform() * cdf_.back();
        const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        return std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
    }

private:
    std::vector<double> cdf_;
};

std::vector<std::size_t> choose_distinct(std::size_t n, std::size_t k, Rng& rng) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
    idx.resize(k);
    return idx;
}

}  // namespace

AttributeVocab AttributeVocab::standard() {
    AttributeVocab v;
    for (const char* c : {"ice-cream", "yogurt", "coffee", "tea", "chocolate", "juice", "cake",
                          "noodles"})
        v.categories.push_back({c});
    v.brands = {
        {"velvetta", {"ice-cream", "chocolate", "cake"}},
        {"frostbite", {"ice-cream", "juice"}},
        {"greenfield", {"yogurt", "juice", "tea"}},
        {"alpenhof", {"yogurt", "chocolate", "cake"}},
        {"kyoto-leaf", {"tea", "cake"}},
        {"daybreak", {"coffee", "juice"}},
        {"roastery-nine", {"coffee", "chocolate"}},
        {"sunny-farm", {"yogurt", "juice", "noodles"}},
        {"golden-wok", {"noodles"}},
        {"maison-lune", {"cake", "chocolate", "ice-cream", "coffee"}},
        {"nordic-pure", {"yogurt", "juice", "tea"}},
        {"bolt", {"coffee", "juice"}},
        {"heritage-mill", {"noodles", "cake", "tea"}},
        {"cocoa-crown", {"chocolate", "ice-cream"}},
        {"vita-plus", {"yogurt", "juice", "noodles"}},
        {"metro-mart", {"ice-cream", "yogurt", "coffee", "tea", "chocolate", "juice", "cake",
                        "noodles"}},
    };
    v.flavors = {"strawberry", "vanilla", "matcha", "mango",  "caramel",
                 "lemon",      "peach",   "hazelnut", "original", "coconut"};
    v.explicit_tags = {"low-sugar",  "organic",         "vegan",        "gluten-free", "spicy",
                       "family-size", "limited-edition", "high-protein", "zero-fat",    "decaf"};
    v.implicit_tags = {"premium", "budget",  "imported",  "artisanal",  "eco-friendly",
                       "kid-friendly", "healthy", "indulgent", "energizing", "traditional"};
    v.implicit_rules = {
        {"velvetta", {"premium", "imported"}},
        {"frostbite", {"budget", "kid-friendly"}},
        {"greenfield", {"eco-friendly"}},
        {"alpenhof", {"imported", "artisanal"}},
        {"kyoto-leaf", {"imported", "artisanal"}},
        {"roastery-nine", {"premium", "artisanal"}},
        {"sunny-farm", {"budget", "kid-friendly"}},
        {"golden-wok", {"budget"}},
        {"maison-lune", {"premium", "imported"}},
        {"nordic-pure", {"eco-friendly", "healthy"}},
        {"bolt", {"energizing"}},
        {"heritage-mill", {"traditional", "artisanal"}},
        {"cocoa-crown", {"premium"}},
        {"vita-plus", {"healthy"}},
        {"ice-cream", {"indulgent"}},
        {"cake", {"indulgent"}},
        {"chocolate", {"indulgent"}},
        {"coffee", {"energizing"}},
        {"tea", {"traditional"}},
        {"yogurt", {"healthy"}},
    };
    return v;
}

std::vector<std::string> AttributeVocab::implied_tags(const std::string& brand,
                                                      const std::string& category) const {
    std::set<std::string> hit;
    for (const auto& key : {brand, category}) {
        const auto it = implicit_rules.find(key);
        if (it != implicit_rules.end()) hit.insert(it->second.begin(), it->second.end());
    }
    std::vector<std::string> out;
    for (const auto& t : implicit_tags)
        if (hit.count(t)) out.push_back(t);
    return out;
}

std::vector<std::string> AttributeVocab::all_tags() const {
    std::vector<std::string> out = explicit_tags;
    out.insert(out.end(), implicit_tags.begin(), implicit_tags.end());
    return out;
}

int AttributeVocab::tag_index(const std::string& tag) const {
    for (std::size_t i = 0; i < explicit_tags.size(); ++i)
        if (explicit_tags[i] == tag) return static_cast<int>(i);
    for (std::size_t i = 0; i < implicit_tags.size(); ++i)
        if (implicit_tags[i] == tag) return static_cast<int>(explicit_tags.size() + i);
    return -1;
}

const Item& ItemCatalog::at(ItemId id) const {
    if (!contains(id)) throw NotFoundError("unknown item id " + std::to_string(id));
    return items[id - 1];
}

void validate(const SynthConfig& cfg) {
    if (cfg.n_items == 0) throw ConfigError("n_items", "must be positive");
    if (cfg.n_users == 0) throw ConfigError("n_users", "must be positive");
    if (cfg.n_rows == 0) throw ConfigError("n_rows", "must be positive");
    if (!(cfg.beta >= 0.0 && cfg.beta <= 1.0)) throw ConfigError("beta", "must lie in [0, 1]");
    if (cfg.max_history == 0 || cfg.min_history > cfg.max_history)
        throw ConfigError("max_history", "need 0 < min_history <= max_history");
    if (cfg.max_history > cfg.n_items)
        throw ConfigError("max_history", "cannot exceed n_items (histories hold distinct items)");
    if (!(cfg.target_ctr > 0.0 && cfg.target_ctr < 1.0))
        throw ConfigError("target_ctr", "must lie in (0, 1)");
    if (!(cfg.zipf_s > 0.0)) throw ConfigError("zipf_s", "must be positive");
    if (!(cfg.head_exposure >= 1.0)) throw ConfigError("head_exposure", "must be >= 1");
}

namespace {

std::vector<int> item_tag_ids(const AttributeVocab& vocab, const Item& item) {
    std::vector<int> tags;
    for (const auto& t : item.explicit_tags) tags.push_back(vocab.tag_index(t));
    for (const auto& t : vocab.implied_tags(item.brand, item.category))
        tags.push_back(vocab.tag_index(t));
    return tags;
}

double affinity_from_tags(const User& user, const std::vector<int>& tags) {
    double a = 0.0;
    for (const auto& [tag, w] : user.prefs)
        if (std::find(tags.begin(), tags.end(), tag) != tags.end()) a += w;
    return a;
}

}  // namespace

double attribute_affinity(const AttributeVocab& vocab, const User& user, const Item& item) {
    return affinity_from_tags(user, item_tag_ids(vocab, item));
}

double id_popularity(const Corpus& corpus, ItemId id) {
    if (!corpus.catalog.contains(id)) throw NotFoundError("unknown item id " + std::to_string(id));
    return corpus.popularity[id - 1];
}

Corpus generate_corpus(const SynthConfig& cfg, Rng& rng) {
    validate(cfg);
    Corpus corpus;
    corpus.vocab = AttributeVocab::standard();
    const auto& vocab = corpus.vocab;
    Rng item_rng = rng.split(1);
    Rng user_rng = rng.split(2);
    Rng row_rng = rng.split(3);
    Rng label_rng = rng.split(4);

    // Items. Exposure ranks are a random permutation so ids carry no signal.
    auto ranks = choose_distinct(cfg.n_items, cfg.n_items, item_rng);
    corpus.catalog.items.reserve(cfg.n_items);
    for (std::size_t k = 0; k < cfg.n_items; ++k) {
        Item it;
        it.id = static_cast<ItemId>(k + 1);
        const auto& brand = vocab.brands[item_rng.below(vocab.brands.size())];
        it.brand = brand.name;
        it.category = brand.categories[item_rng.below(brand.categories.size())];
        it.flavor = vocab.flavors[item_rng.below(vocab.flavors.size())];
        const double u = item_rng.uniform();
        const std::size_t n_tags = u < 0.2 ? 0 : (u < 0.7 ? 1 : 2);
        auto picks = choose_distinct(vocab.explicit_tags.size(), n_tags, item_rng);
        std::sort(picks.begin(), picks.end());
        for (auto p : picks) it.explicit_tags.push_back(vocab.explicit_tags[p]);
        const double rank = static_cast<double>(ranks[k] + 1);
        it.exposure = static_cast<std::uint64_t>(
            std::max(1.0, std::round(cfg.head_exposure / std::pow(rank, cfg.zipf_s))));
        it.text = it.brand + " " + it.flavor;
        for (const auto& t : it.explicit_tags) it.text += " " + t;
        it.text += " " + it.category;
        corpus.catalog.items.push_back(std::move(it));
    }

    double mean_log = 0.0;
    for (const auto& it : corpus.catalog.items) mean_log += std::log(static_cast<double>(it.exposure));
    mean_log /= static_cast<double>(cfg.n_items);
    corpus.popularity.reserve(cfg.n_items);
    for (const auto& it : corpus.catalog.items) {
        corpus.popularity.push_back(cfg.popularity_scale *
                                        (std::log(static_cast<double>(it.exposure)) - mean_log) +
                                    cfg.item_noise * item_rng.normal());
    }

    // Users: two liked and two disliked tags; history skewed toward liked items.
    const std::size_t n_tags = vocab.explicit_tags.size() + vocab.implicit_tags.size();
    std::vector<std::vector<int>> tag_ids;
    tag_ids.reserve(cfg.n_items);
    for (const auto& it : corpus.catalog.items) tag_ids.push_back(item_tag_ids(vocab, it));
    std::vector<double> sqrt_exposure;
    for (const auto& it : corpus.catalog.items)
        sqrt_exposure.push_back(std::sqrt(static_cast<double>(it.exposure)));
    corpus.users.reserve(cfg.n_users);
    for (std::size_t u = 0; u < cfg.n_users; ++u) {
        User user;
        user.id = static_cast<UserId>(u + 1);
        auto tags = choose_distinct(n_tags, 4, user_rng);
        user.prefs = {{static_cast<int>(tags[0]), 1.0},
                      {static_cast<int>(tags[1]), 1.0},
                      {static_cast<int>(tags[2]), -1.0},
                      {static_cast<int>(tags[3]), -1.0}};
        std::sort(user.prefs.begin(), user.prefs.end());
        std::vector<double> w(cfg.n_items);
        for (std::size_t k = 0; k < cfg.n_items; ++k) {
            const double a = affinity_from_tags(user, tag_ids[k]);
            w[k] = sqrt_exposure[k] * std::exp(cfg.history_affinity * a);
        }
        const std::size_t len =
            cfg.min_history + user_rng.below(cfg.max_history - cfg.min_history + 1);
        // Sequential draws without replacement.
        for (std::size_t step = 0; step < len; ++step) {
            WeightedSampler sampler(w);
            const std::size_t k = sampler.draw(user_rng);
            user.history.push_back(static_cast<ItemId>(k + 1));
            w[k] = 0.0;
        }
        corpus.users.push_back(std::move(user));
    }

    // Rows: impressions drawn proportionally to exposure.
    std::vector<double> exposure_w;
    for (const auto& it : corpus.catalog.items) exposure_w.push_back(static_cast<double>(it.exposure));
    WeightedSampler impressions(exposure_w);
    std::vector<double> logit_wo_base(cfg.n_rows);
    corpus.rows.reserve(cfg.n_rows);
    for (std::size_t r = 0; r < cfg.n_rows; ++r) {
        InteractionRow row;
        row.row_id = r;
        row.timestamp = r;
        row.user_id = static_cast<UserId>(1 + row_rng.below(cfg.n_users));
        row.target_item_id = static_cast<ItemId>(1 + impressions.draw(row_rng));
        row.hour_bucket = static_cast<std::uint32_t>(row_rng.below(kHourBuckets));
        row.device = row_rng.bernoulli(0.4) ? 1u : 0u;
        const auto& user = corpus.users[row.user_id - 1];
        row.history = user.history;
        const auto& item = corpus.catalog.at(row.target_item_id);
        logit_wo_base[r] = cfg.beta * cfg.affinity_scale * affinity_from_tags(user, tag_ids[item.id - 1]) +
                           corpus.popularity[item.id - 1] + kHourEffect[row.hour_bucket] +
                           kDeviceEffect[row.device];
        corpus.rows.push_back(std::move(row));
    }

    // Bisection on the offset so the mean click probability hits the target.
    double lo = -30.0, hi = 30.0;
    for (int iter = 0; iter < 200; ++iter) {
        const double mid = 0.5 * (lo + hi);
        double mean = 0.0;
        for (double z : logit_wo_base) mean += sigmoid(mid + z);
        mean /= static_cast<double>(cfg.n_rows);
        (mean < cfg.target_ctr ? lo : hi) = mid;
    }
    corpus.base_logit = 0.5 * (lo + hi);
    for (std::size_t r = 0; r < cfg.n_rows; ++r) {
        corpus.rows[r].label = label_rng.bernoulli(sigmoid(corpus.base_logit + logit_wo_base[r])) ? 1 : 0;
    }
    return corpus;
}

std::uint64_t ExposureTable::frequency(ItemId id) const {
    return id < by_id.size() ? by_id[id] : 0;
}

std::vector<ItemId> ExposureTable::top(std::size_t n) const {
    std::vector<ItemId> out;
    for (std::size_t i = 0; i < std::min(n, entries.size()); ++i) out.push_back(entries[i].first);
    return out;
}

ExposureTable exposure_table(const ItemCatalog& catalog) {
    ExposureTable t;
    t.entries.reserve(catalog.size());
    t.by_id.assign(catalog.size() + 1, 0);
    for (const auto& it : catalog.items) {
        t.entries.emplace_back(it.id, it.exposure);
        t.by_id[it.id] = it.exposure;
        t.total += it.exposure;
    }
    std::sort(t.entries.begin(), t.entries.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    return t;
}

Split split_of(UserId user) {
    const auto bucket = Rng::mix(static_cast<std::uint64_t>(user) ^ 0xA5A5F00DC0FFEEULL) % 10;
    if (bucket < 8) return Split::Train;
    return bucket == 8 ? Split::Valid : Split::Test;
}

std::string user_text(const ItemCatalog& catalog, const User& user) {
    std::string out;
    for (std::size_t i = 0; i < user.history.size(); ++i) {
        if (i) out += ", ";
        out += catalog.at(user.history[i]).text;
    }
    return out;
}

}  // namespace msd::synth
