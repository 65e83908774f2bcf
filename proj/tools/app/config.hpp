// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "msd/ctr/model.hpp"
#include "msd/ctr/train.hpp"
#include "msd/distill/train.hpp"
#include "msd/serving/serving.hpp"
#include "msd/synth/corpus.hpp"

namespace msd::app {

struct KnowledgeSettings {
    std::size_t n_items = 250;
    std::size_t n_users = 250;
    std::size_t per_category_min = 5;
    std::size_t reference_per_category = 2;
    std::size_t heldout_items = 100;
    std::size_t heldout_users = 100;
    std::size_t item_token_budget = 256;
    std::size_t user_token_budget = 384;
    std::string teacher = "mock";  // mock | http (MSD_TEACHER_URL / MSD_TEACHER_TOKEN)
    std::size_t threads = 1;
};

struct DistillSettings {
    std::size_t window = 4;
    std::size_t d_tok = 16;
    std::size_t d_h = 64;  // also d_sem, the pooled embedding width
    double lr = 3e-3;
    double clip_norm = 5.0;
    std::size_t steps = 2000;
    std::size_t batch_size = 8;
    std::size_t ckpt_every = 400;
    std::size_t train_eval_size = 256;
    std::size_t max_decode = 80;
    double cosine_threshold = 0.8;
    std::size_t threads = 1;
};

struct CtrSettings {
    std::size_t d_id = 16;
    std::size_t d_proj = 32;
    std::vector<std::size_t> adaptor_hidden = {32};
    std::vector<std::size_t> head_hidden = {64, 32};
    std::size_t k_top = 3;
    double p_max = 0.5;
    std::size_t lora_rank = 4;
    double lora_alpha = 4.0;
    double lr = 5e-4;
    double weight_decay = 0.1;
    double clip_norm = 5.0;
    std::size_t epochs = 8;
    std::size_t batch_size = 64;
    std::size_t n_seeds = 5;
    std::size_t threads = 1;
};

struct ServingSettings {
    /// Hot store size as a share of total exposure; when 0, hot_n is used.
    double hot_share = 0.2;
    std::size_t hot_n = 0;
    std::size_t lru_capacity = 400;
    std::size_t trace_length = 20000;
    double hot_hit_us = 100.0;
    double lru_hit_us = 100.0;
    double compute_miss_us = 2500.0;
    double ctr_forward_us = 1000.0;
};

/// Every knob of a run. Serialized as nested JSON objects whose keys mirror
/// the field names ("synth.n_items", "ctr.head_hidden", ...).
struct RunConfig {
    std::string profile = "desk";
    std::uint64_t seed = 42;
    synth::SynthConfig synth;
    KnowledgeSettings knowledge;
    DistillSettings distill;
    CtrSettings ctr;
    ServingSettings serving;

    /// ConfigError naming the dotted key of the first invalid knob.
    void validate() const;

    distill::DistillTrainConfig student_train() const;
    ctr::CtrConfig model(ctr::Variant v) const;
    ctr::CtrTrainConfig ctr_train(std::uint64_t seed) const;
    serving::LatencyModel latency() const;
};

/// tiny (CI, well under a minute), desk (acceptance runs), stress.
RunConfig profile_config(const std::string& name);
std::vector<std::string> profile_names();

/// Applies `j` on top of `base`. Unknown keys and mistyped values throw
/// ConfigError with the dotted key.
RunConfig apply_json(RunConfig base, const nlohmann::json& j);

/// Reads a JSON config file. Its optional "profile" key picks the base
/// profile unless `profile_override` is non-empty.
RunConfig load_config(const std::filesystem::path& p, const std::string& profile_override);

nlohmann::json to_json(const RunConfig& c);

/// Canonical text of one or more top-level sections, for stage hashing.
std::string section_text(const RunConfig& c, const std::vector<std::string>& sections);

}  // namespace msd::app
