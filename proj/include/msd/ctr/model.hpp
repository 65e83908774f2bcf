// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "msd/distill/student.hpp"
#include "msd/fusion/fusion.hpp"
#include "msd/numerics/layers.hpp"
#include "msd/numerics/lora.hpp"
#include "msd/numerics/optim.hpp"
#include "msd/synth/corpus.hpp"

namespace msd::ctr {

enum class Variant { Full, NoLora, NoItemFusion, NoUserLevel, IdOnly };

std::string_view variant_name(Variant v) noexcept;
Variant parse_variant(std::string_view s);  // ConfigError on unknown names
bool uses_lora(Variant v) noexcept;         // full, no_item_fusion, no_user_level
bool uses_user_level(Variant v) noexcept;
bool uses_item_fusion(Variant v) noexcept;
bool uses_semantics(Variant v) noexcept;    // everything but id_only

struct CtrConfig {
    Variant variant = Variant::Full;
    std::size_t d_id = 16;
    fusion::AdaptorConfig adaptor;  // d_proj 32, one hidden layer of 32
    std::vector<std::size_t> head_hidden = {64, 32};
    fusion::FusionConfig fusion;    // train_mode is set by the training loop
    std::size_t lora_rank = 4;
    double lora_alpha = 4.0;
};

/// Student inputs of one text, prepared once. `base` holds the frozen
/// hidden pre-activations w0·x + b per position, so a LoRA-adapted forward
/// only adds the low-rank term.
struct TextFeatures {
    distill::TokenSequence ids;
    Vector bag;
    Matrix base;  // positions × d_h
};

/// Read-only inputs shared by every model: the corpus, exposure counts and
/// the frozen student with per-item and per-user text features.
class FeatureContext {
public:
    /// `student`/`vocab` may be null for id-only models.
    FeatureContext(const synth::Corpus& corpus, const distill::StudentModel* student,
                   const distill::Vocab* vocab);

    const synth::Corpus& corpus() const noexcept { return *corpus_; }
    const distill::StudentModel* student() const noexcept { return student_; }
    std::size_t d_sem() const noexcept { return student_ ? student_->d_sem() : 0; }
    std::size_t n_users() const noexcept { return corpus_->users.size(); }
    std::size_t n_items() const noexcept { return corpus_->catalog.size(); }

    std::uint64_t frequency(synth::ItemId id) const noexcept { return exposure_.frequency(id); }
    /// Unknown ids give an empty text (zero embedding).
    const TextFeatures& item_text(synth::ItemId id) const noexcept;
    const TextFeatures& user_text(synth::UserId id) const noexcept;

private:
    const synth::Corpus* corpus_;
    const distill::StudentModel* student_;
    synth::ExposureTable exposure_;
    std::vector<TextFeatures> items_;  // index = item id, 0 = empty
    std::vector<TextFeatures> users_;  // index = user id, 0 = empty
};

TextFeatures text_features(const distill::StudentModel& student, distill::TokenSequence ids);

/// Mean over positions of ReLU(base + lora delta); equals the student's
/// semantic embedding when `lora` is null or its b factor is zero.
Vector pooled_embedding(const distill::StudentModel& student, const TextFeatures& text,
                        const LoraLayer* lora);

/// Adds dL/da, dL/db for dL/d(pooled embedding) = `upstream`.
void pooled_embedding_backward(const distill::StudentModel& student, const TextFeatures& text,
                               const LoraLayer& lora, std::span<const double> upstream,
                               LoraGrads& acc);

/// The predictor. Head input layout (each block always present; ablated
/// blocks are zeros):
///
///   [ user_id | item_id | mean history item_id | hour | device ]   5 × d_id
///   [ e'_u | e'_t | e_item ]                                       3 × d_proj
///
/// Row 0 of each id table is the out-of-vocabulary row; hour h and device d
/// live at rows h + 1 and d + 1. pCTR = sigmoid(head(x)), the head's last
/// layer emitting the logit.
struct CtrModel {
    CtrConfig cfg;
    Matrix user_emb;
    Matrix item_emb;
    Matrix hour_emb;
    Matrix device_emb;
    fusion::AdaptorSet adaptors;
    Mlp head;
    std::optional<LoraLayer> lora;  // wraps the student's hidden weight

    /// `student` is needed when the variant uses LoRA (its hidden weight is
    /// wrapped); d_sem may be 0 for id_only.
    static CtrModel init(const CtrConfig& cfg, std::size_t n_users, std::size_t n_items,
                         std::size_t d_sem, const distill::StudentModel* student, Rng& rng);

    std::size_t d_proj() const { return adaptors.d_proj(); }
    std::size_t input_dim() const { return 5 * cfg.d_id + 3 * d_proj(); }
};

struct CtrGrads {
    Matrix user_emb;
    Matrix item_emb;
    Matrix hour_emb;
    Matrix device_emb;
    fusion::AdaptorGrads adaptors;
    std::vector<MlpGrads> head;
    std::optional<LoraGrads> lora;

    static CtrGrads like(const CtrModel& m);
    void zero();
};

/// Trainable blocks in a fixed order: id tables, user adaptor, item
/// adaptor, head, then lora.a and lora.b when present. Adaptors are omitted
/// for id_only, whose semantic blocks are constant zeros.
std::vector<ParamBlock> ctr_params(CtrModel& m, CtrGrads& g);

/// Semantic embeddings (student, LoRA-adapted when the model has LoRA) of
/// the items and users touched by a batch, computed once per batch, plus the
/// gradients flowing back into them.
class SemanticLookup {
public:
    SemanticLookup(const CtrModel& model, const FeatureContext& ctx) : model_(&model), ctx_(&ctx) {}

    const Vector& item(synth::ItemId id);
    const Vector& user(synth::UserId id);
    void add_item_grad(synth::ItemId id, std::span<const double> g);
    void add_user_grad(synth::UserId id, std::span<const double> g);

    /// Pushes the accumulated gradients through LoRA into `acc`.
    void backward(LoraGrads& acc) const;
    /// Drops cached embeddings and gradients (call after a parameter update).
    void clear();

private:
    const CtrModel* model_;
    const FeatureContext* ctx_;
    std::unordered_map<synth::ItemId, Vector> items_, item_grads_;
    std::unordered_map<synth::UserId, Vector> users_, user_grads_;
};

struct RowTape {
    Vector x;
    MlpStackTape head;
    fusion::ProjectionTape projection;
    fusion::FusionResult fusion;
    bool semantic = false;
};

/// Logit of one row. `mask_rng` drives fusion masking and is only used when
/// `train_mode` is set.
double forward_logit(const CtrModel& m, const FeatureContext& ctx, const synth::InteractionRow& row,
                     bool train_mode, Rng* mask_rng, SemanticLookup& lookup, RowTape* tape = nullptr);

/// Accumulates gradients for dL/dlogit into `g` and the semantic lookup.
void backward_logit(const CtrModel& m, const FeatureContext& ctx, const synth::InteractionRow& row,
                    const RowTape& tape, double dlogit, CtrGrads& g, SemanticLookup& lookup);

double sigmoid(double z) noexcept;

/// Inference-mode pCTR for each row. Rows are split into contiguous chunks
/// across `threads` workers, each with its own lookup; results do not depend
/// on the thread count.
std::vector<double> predict(const CtrModel& m, const FeatureContext& ctx,
                            std::span<const synth::InteractionRow> rows, std::size_t threads = 1);

/// Binary checkpoint "MSDC", u32 LE version=1, then the configuration as
/// u32 fields (variant, d_id, d_proj, #adaptor hidden, hidden dims...,
/// #head hidden, head dims..., k_top, lora rank, has_lora) and f64 fields
/// (p_max, lora alpha), table sizes (users+1, items+1, d_sem), and every
/// parameter block of ctr_params() order as float32 LE. The student is not
/// part of the file: loading a LoRA model needs the same student to rebuild
/// the frozen w0.
void save_ctr(const CtrModel& m, const std::filesystem::path& p);
CtrModel load_ctr(const std::filesystem::path& p, const distill::StudentModel* student);

}  // namespace msd::ctr
