// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#include "config.hpp"

#include <functional>
#include <limits>

#include "msd/error.hpp"
#include "msd/io/text.hpp"

namespace msd::app {

using nlohmann::json;

namespace {

struct Field {
    std::string key;  // "section.name" or a top-level name
    std::function<void(const json&)> set;
    std::function<json()> get;
};

void expect(bool ok, const std::string& key, const char* what) {
    if (!ok) throw ConfigError(key, std::string("expected ") + what);
}

Field field(std::string key, std::size_t& v) {
    return {key,
            [&v, key](const json& j) {
                expect(j.is_number_unsigned() || (j.is_number_integer() && j.get<long long>() >= 0), key,
                       "a non-negative integer");
                v = j.get<std::size_t>();
            },
            [&v] { return json(v); }};
}

Field field_u64(std::string key, std::uint64_t& v) {
    return {key,
            [&v, key](const json& j) {
                expect(j.is_number_unsigned() || (j.is_number_integer() && j.get<long long>() >= 0), key,
                       "a non-negative integer");
                v = j.get<std::uint64_t>();
            },
            [&v] { return json(v); }};
}

Field field(std::string key, double& v) {
    return {key,
            [&v, key](const json& j) {
                expect(j.is_number(), key, "a number");
                v = j.get<double>();
            },
            [&v] { return json(v); }};
}

Field field(std::string key, std::string& v) {
    return {key,
            [&v, key](const json& j) {
                expect(j.is_string(), key, "a string");
                v = j.get<std::string>();
            },
            [&v] { return json(v); }};
}

Field field(std::string key, std::vector<std::size_t>& v) {
    return {key,
            [&v, key](const json& j) {
                expect(j.is_array(), key, "an array of non-negative integers");
                std::vector<std::size_t> out;
                for (const auto& e : j) {
                    expect(e.is_number_unsigned() || (e.is_number_integer() && e.get<long long>() >= 0), key,
                           "an array of non-negative integers");
                    out.push_back(e.get<std::size_t>());
                }
                v = std::move(out);
            },
            [&v] { return json(v); }};
}

// The single list of knobs; parsing, echoing and hashing all walk it.
std::vector<Field> fields(RunConfig& c) {
    auto& s = c.synth;
    auto& k = c.knowledge;
    auto& d = c.distill;
    auto& r = c.ctr;
    auto& v = c.serving;
    return {
        field("profile", c.profile),
        field_u64("seed", c.seed),
        field("synth.n_items", s.n_items),
        field("synth.n_users", s.n_users),
        field("synth.n_rows", s.n_rows),
        field("synth.min_history", s.min_history),
        field("synth.max_history", s.max_history),
        field("synth.beta", s.beta),
        field("synth.zipf_s", s.zipf_s),
        field("synth.head_exposure", s.head_exposure),
        field("synth.target_ctr", s.target_ctr),
        field("synth.affinity_scale", s.affinity_scale),
        field("synth.popularity_scale", s.popularity_scale),
        field("synth.item_noise", s.item_noise),
        field("synth.history_affinity", s.history_affinity),
        field("knowledge.n_items", k.n_items),
        field("knowledge.n_users", k.n_users),
        field("knowledge.per_category_min", k.per_category_min),
        field("knowledge.reference_per_category", k.reference_per_category),
        field("knowledge.heldout_items", k.heldout_items),
        field("knowledge.heldout_users", k.heldout_users),
        field("knowledge.item_token_budget", k.item_token_budget),
        field("knowledge.user_token_budget", k.user_token_budget),
        field("knowledge.teacher", k.teacher),
        field("knowledge.threads", k.threads),
        field("distill.window", d.window),
        field("distill.d_tok", d.d_tok),
        field("distill.d_h", d.d_h),
        field("distill.lr", d.lr),
        field("distill.clip_norm", d.clip_norm),
        field("distill.steps", d.steps),
        field("distill.batch_size", d.batch_size),
        field("distill.ckpt_every", d.ckpt_every),
        field("distill.train_eval_size", d.train_eval_size),
        field("distill.max_decode", d.max_decode),
        field("distill.cosine_threshold", d.cosine_threshold),
        field("distill.threads", d.threads),
        field("ctr.d_id", r.d_id),
        field("ctr.d_proj", r.d_proj),
        field("ctr.adaptor_hidden", r.adaptor_hidden),
        field("ctr.head_hidden", r.head_hidden),
        field("ctr.k_top", r.k_top),
        field("ctr.p_max", r.p_max),
        field("ctr.lora_rank", r.lora_rank),
        field("ctr.lora_alpha", r.lora_alpha),
        field("ctr.lr", r.lr),
        field("ctr.weight_decay", r.weight_decay),
        field("ctr.clip_norm", r.clip_norm),
        field("ctr.epochs", r.epochs),
        field("ctr.batch_size", r.batch_size),
        field("ctr.n_seeds", r.n_seeds),
        field("ctr.threads", r.threads),
        field("serving.hot_share", v.hot_share),
        field("serving.hot_n", v.hot_n),
        field("serving.lru_capacity", v.lru_capacity),
        field("serving.trace_length", v.trace_length),
        field("serving.hot_hit_us", v.hot_hit_us),
        field("serving.lru_hit_us", v.lru_hit_us),
        field("serving.compute_miss_us", v.compute_miss_us),
        field("serving.ctr_forward_us", v.ctr_forward_us),
    };
}

std::string section_of(const std::string& key) {
    const auto dot = key.find('.');
    return dot == std::string::npos ? key : key.substr(0, dot);
}

void positive(std::size_t v, const std::string& key) {
    if (v == 0) throw ConfigError(key, "must be positive");
}

void positive(double v, const std::string& key) {
    if (!(v > 0.0)) throw ConfigError(key, "must be positive");
}

}  // namespace

void RunConfig::validate() const {
    try {
        synth::validate(synth);
    } catch (const ConfigError& e) {
        throw ConfigError("synth." + e.key(), e.what() + e.key().size() + 2);
    }
    positive(knowledge.n_items, "knowledge.n_items");
    positive(knowledge.n_users, "knowledge.n_users");
    positive(knowledge.reference_per_category, "knowledge.reference_per_category");
    positive(knowledge.heldout_items + knowledge.heldout_users, "knowledge.heldout_items");
    positive(knowledge.item_token_budget, "knowledge.item_token_budget");
    positive(knowledge.user_token_budget, "knowledge.user_token_budget");
    positive(knowledge.threads, "knowledge.threads");
    if (knowledge.teacher != "mock" && knowledge.teacher != "http")
        throw ConfigError("knowledge.teacher", "must be \"mock\" or \"http\"");

    positive(distill.window, "distill.window");
    positive(distill.d_tok, "distill.d_tok");
    positive(distill.d_h, "distill.d_h");
    positive(distill.lr, "distill.lr");
    positive(distill.steps, "distill.steps");
    positive(distill.batch_size, "distill.batch_size");
    positive(distill.max_decode, "distill.max_decode");
    positive(distill.threads, "distill.threads");
    if (!(distill.cosine_threshold > 0.0 && distill.cosine_threshold <= 1.0))
        throw ConfigError("distill.cosine_threshold", "must lie in (0, 1]");

    positive(ctr.d_id, "ctr.d_id");
    positive(ctr.d_proj, "ctr.d_proj");
    for (std::size_t h : ctr.adaptor_hidden) positive(h, "ctr.adaptor_hidden");
    for (std::size_t h : ctr.head_hidden) positive(h, "ctr.head_hidden");
    positive(ctr.k_top, "ctr.k_top");
    if (!(ctr.p_max >= 0.0 && ctr.p_max <= 1.0)) throw ConfigError("ctr.p_max", "must lie in [0, 1]");
    positive(ctr.lora_rank, "ctr.lora_rank");
    positive(ctr.lora_alpha, "ctr.lora_alpha");
    positive(ctr.lr, "ctr.lr");
    if (!(ctr.weight_decay >= 0.0)) throw ConfigError("ctr.weight_decay", "must be >= 0");
    positive(ctr.epochs, "ctr.epochs");
    positive(ctr.batch_size, "ctr.batch_size");
    positive(ctr.n_seeds, "ctr.n_seeds");
    positive(ctr.threads, "ctr.threads");

    if (!(serving.hot_share >= 0.0 && serving.hot_share <= 1.0))
        throw ConfigError("serving.hot_share", "must lie in [0, 1]");
    positive(serving.lru_capacity, "serving.lru_capacity");
    positive(serving.trace_length, "serving.trace_length");
    for (auto [key, us] : {std::pair{"serving.hot_hit_us", serving.hot_hit_us},
                           std::pair{"serving.lru_hit_us", serving.lru_hit_us},
                           std::pair{"serving.compute_miss_us", serving.compute_miss_us},
                           std::pair{"serving.ctr_forward_us", serving.ctr_forward_us}})
        if (!(us >= 0.0)) throw ConfigError(key, "must be >= 0");
}

distill::DistillTrainConfig RunConfig::student_train() const {
    distill::DistillTrainConfig t;
    t.student = {distill.window, distill.d_tok, distill.d_h};
    t.optimizer.learning_rate = distill.lr;
    t.optimizer.clip_norm = distill.clip_norm;
    t.steps = distill.steps;
    t.batch_size = distill.batch_size;
    t.ckpt_every = distill.ckpt_every;
    t.train_eval_size = distill.train_eval_size;
    return t;
}

ctr::CtrConfig RunConfig::model(ctr::Variant v) const {
    ctr::CtrConfig m;
    m.variant = v;
    m.d_id = ctr.d_id;
    m.adaptor = {ctr.d_proj, ctr.adaptor_hidden};
    m.head_hidden = ctr.head_hidden;
    m.fusion.k_top = ctr.k_top;
    m.fusion.p_max = ctr.p_max;
    m.lora_rank = ctr.lora_rank;
    m.lora_alpha = ctr.lora_alpha;
    return m;
}

ctr::CtrTrainConfig RunConfig::ctr_train(std::uint64_t run_seed) const {
    ctr::CtrTrainConfig t;
    t.optimizer.learning_rate = ctr.lr;
    t.optimizer.weight_decay = ctr.weight_decay;
    t.optimizer.clip_norm = ctr.clip_norm;
    t.epochs = ctr.epochs;
    t.batch_size = ctr.batch_size;
    t.seed = run_seed;
    t.eval_threads = ctr.threads;
    return t;
}

serving::LatencyModel RunConfig::latency() const {
    return {serving.hot_hit_us, serving.lru_hit_us, serving.compute_miss_us, serving.ctr_forward_us};
}

std::vector<std::string> profile_names() { return {"tiny", "desk", "stress"}; }

RunConfig profile_config(const std::string& name) {
    RunConfig c;
    c.profile = name;
    // desk: the defaults above plus a larger, more history-driven corpus, so
    // semantic features have enough signal to show over ids alone.
    c.synth.n_items = 500;
    c.synth.n_users = 2000;
    c.synth.n_rows = 40000;
    c.synth.history_affinity = 3.0;
    // Exposure is Zipf(1.1): the hot store holds only the head, so the LRU
    // must cover most of the tail for cached serving to stay near all-hot.
    c.serving.lru_capacity = 400;
    if (name == "desk") return c;
    if (name == "tiny") {
        c.synth.n_items = 120;
        c.synth.n_users = 300;
        c.synth.n_rows = 3000;
        c.synth.head_exposure = 5000.0;
        c.knowledge.n_items = 60;
        c.knowledge.n_users = 60;
        c.knowledge.heldout_items = 30;
        c.knowledge.heldout_users = 30;
        c.distill.steps = 300;
        c.distill.ckpt_every = 50;
        c.distill.train_eval_size = 64;
        c.ctr.epochs = 2;
        c.ctr.n_seeds = 2;
        c.serving.lru_capacity = 96;
        c.serving.trace_length = 2000;
        return c;
    }
    if (name == "stress") {
        c.synth.n_items = 2000;
        c.synth.n_users = 10000;
        c.synth.n_rows = 200000;
        c.knowledge.n_items = 600;
        c.knowledge.n_users = 600;
        c.knowledge.heldout_items = 200;
        c.knowledge.heldout_users = 200;
        c.distill.steps = 4000;
        c.distill.ckpt_every = 500;
        c.serving.lru_capacity = 1600;
        c.serving.trace_length = 200000;
        return c;
    }
    throw ConfigError("profile", "unknown profile \"" + name + "\" (tiny, desk, stress)");
}

RunConfig apply_json(RunConfig base, const json& j) {
    if (!j.is_object()) throw ConfigError("<root>", "config must be a JSON object");
    auto table = fields(base);
    auto find = [&](const std::string& key) -> Field* {
        for (auto& f : table)
            if (f.key == key) return &f;
        return nullptr;
    };
    auto is_section = [&](const std::string& name) {
        for (const auto& f : table)
            if (f.key.size() > name.size() && f.key.compare(0, name.size() + 1, name + ".") == 0) return true;
        return false;
    };
    for (const auto& [name, value] : j.items()) {
        if (is_section(name)) {
            if (!value.is_object()) throw ConfigError(name, "expected an object");
            for (const auto& [sub, v] : value.items()) {
                Field* f = find(name + "." + sub);
                if (!f) throw ConfigError(name + "." + sub, "unknown key");
                f->set(v);
            }
        } else if (Field* f = find(name)) {
            f->set(value);
        } else {
            throw ConfigError(name, "unknown key");
        }
    }
    return base;
}

RunConfig load_config(const std::filesystem::path& p, const std::string& profile_override) {
    json j;
    try {
        j = json::parse(io::read_file(p));
    } catch (const json::parse_error& e) {
        throw ConfigError("<file>", p.string() + ": " + e.what());
    }
    if (!j.is_object()) throw ConfigError("<root>", "config must be a JSON object");
    std::string profile = "desk";
    if (j.contains("profile")) {
        if (!j["profile"].is_string()) throw ConfigError("profile", "expected a string");
        profile = j["profile"].get<std::string>();
    }
    if (!profile_override.empty()) profile = profile_override;
    j.erase("profile");
    RunConfig c = apply_json(profile_config(profile), j);
    c.profile = profile;
    return c;
}

json to_json(const RunConfig& c) {
    RunConfig copy = c;
    json out = json::object();
    for (const auto& f : fields(copy)) {
        const auto dot = f.key.find('.');
        if (dot == std::string::npos)
            out[f.key] = f.get();
        else
            out[f.key.substr(0, dot)][f.key.substr(dot + 1)] = f.get();
    }
    return out;
}

std::string section_text(const RunConfig& c, const std::vector<std::string>& sections) {
    RunConfig copy = c;
    json out = json::object();
    for (const auto& f : fields(copy))
        for (const auto& s : sections)
            if (section_of(f.key) == s) out[f.key] = f.get();
    return out.dump();
}

}  // namespace msd::app
