// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "msd/numerics/layers.hpp"
#include "msd/numerics/matrix.hpp"
#include "msd/numerics/rng.hpp"

namespace msd::fusion {

struct AdaptorConfig {
    std::size_t d_proj = 32;
    std::vector<std::size_t> hidden = {32};  // ReLU layers between d_sem and d_proj
};

/// Feature adaptors. `item` is applied to the target and to every history
/// item with the same parameters; `user` has its own.
struct AdaptorSet {
    Mlp user;
    Mlp item;

    /// Layers d_sem -> hidden... (ReLU) -> d_proj (Identity).
    static AdaptorSet random(std::size_t d_sem, const AdaptorConfig& cfg, Rng& rng);
    /// One square Identity layer with identity weights and zero bias.
    static AdaptorSet identity(std::size_t d);

    std::size_t d_sem() const { return item.in_dim(); }
    std::size_t d_proj() const { return item.out_dim(); }
};

struct AdaptorGrads {
    std::vector<MlpGrads> user;
    std::vector<MlpGrads> item;

    static AdaptorGrads like(const AdaptorSet& a);
    void zero();
};

struct Projection {
    Vector user;
    Vector target;
    std::vector<Vector> history;
};

struct ProjectionTape {
    MlpStackTape user;
    MlpStackTape target;
    std::vector<MlpStackTape> history;
};

/// e'_u = user(e_u), e'_t = item(e_t), e'_i = item(e_i). Throws
/// DimensionError when an input is not d_sem long.
Projection project(const AdaptorSet& a, std::span<const double> e_u, std::span<const double> e_t,
                   std::span<const Vector> history, ProjectionTape* tape = nullptr);

struct ProjectionInputGrads {
    Vector user;
    Vector target;
    std::vector<Vector> history;
};

/// Accumulates adaptor gradients and returns dL/d(e_u, e_t, e_i). An empty
/// upstream vector for a history item means "no gradient" and skips it.
ProjectionInputGrads project_backward(const AdaptorSet& a, const ProjectionTape& tape,
                                      std::span<const double> d_user, std::span<const double> d_target,
                                      std::span<const Vector> d_history, AdaptorGrads& acc);

struct FusionConfig {
    std::size_t k_top = 3;
    double p_max = 0.5;
    bool train_mode = false;
};

void validate(const FusionConfig& cfg);

/// p_max / (1 + ln(1 + f)). Throws ConfigError for f < 0.
double mask_probability(double frequency, double p_max);

/// keep[i] = 1 when history item i stays a candidate.
struct MaskDecision {
    std::vector<std::uint8_t> keep;
    std::vector<double> probability;
};

/// "keep=1,0,1 p=0.5,0.25,0.1" and back; used for replaying a fused output.
std::string encode_mask(const MaskDecision& m);
MaskDecision decode_mask(std::string_view s);

struct FusionResult {
    Vector e_item;                  // d_proj
    MaskDecision mask;
    std::vector<std::size_t> selected;  // ascending similarity rank order
    std::vector<double> similarity;     // NaN for masked or zero-norm items
    bool empty_selection = false;
};

/// Frequency-adaptive relevant-items fusion. In train mode item i is masked
/// with probability mask_probability(f_i, p_max); outside train mode nothing
/// is masked and `rng` is not touched. Surviving non-zero items are ranked by
/// cosine similarity to e'_t (ties: lower index); e_item is the sum of the
/// top k_top. No candidate (or L = 0) gives a zero vector and
/// empty_selection = true.
FusionResult fuse_relevant_items(std::span<const double> e_t, std::span<const Vector> e_i,
                                 std::span<const std::uint64_t> frequencies,
                                 const FusionConfig& cfg, Rng& rng);

/// The same ranking and sum with mask decisions given instead of drawn.
FusionResult fuse_with_mask(std::span<const double> e_t, std::span<const Vector> e_i,
                            const MaskDecision& mask, std::size_t k_top);

/// Gradient of L with respect to each e'_i given dL/de_item. Selection is
/// treated as constant: selected items receive `upstream`, the rest (and
/// e'_t) receive nothing. Throws TapeError when `result` does not describe
/// `history_size` items of the upstream's dimension.
std::vector<Vector> fusion_backward(const FusionResult& result, std::size_t history_size,
                                    std::span<const double> upstream);

/// Masking randomness for one training example, derived from the run seed,
/// the example id and the epoch so any example can be replayed alone.
Rng masking_rng(std::uint64_t run_seed, std::uint64_t example_id, std::uint64_t epoch);

}  // namespace msd::fusion
