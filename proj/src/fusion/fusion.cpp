// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#include "msd/fusion/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "msd/error.hpp"
#include "msd/io/text.hpp"

namespace msd::fusion {

namespace {

void check_dim(std::span<const double> v, std::size_t d, const char* what) {
    if (v.size() != d)
        throw DimensionError(std::string(what) + ": expected length " + std::to_string(d) +
                             ", got " + std::to_string(v.size()));
}

}  // namespace

AdaptorSet AdaptorSet::random(std::size_t d_sem, const AdaptorConfig& cfg, Rng& rng) {
    if (cfg.d_proj == 0) throw ConfigError("fusion.d_proj", "must be positive");
    std::vector<std::size_t> dims = {d_sem};
    dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
    dims.push_back(cfg.d_proj);
    Rng user_rng = rng.split(1), item_rng = rng.split(2);
    return {Mlp::random(dims, Activation::ReLU, Activation::Identity, user_rng),
            Mlp::random(dims, Activation::ReLU, Activation::Identity, item_rng)};
}

AdaptorSet AdaptorSet::identity(std::size_t d) {
    MlpLayer l{Matrix::identity(d), Vector(d, 0.0), Activation::Identity};
    return {Mlp{{l}}, Mlp{{l}}};
}

AdaptorGrads AdaptorGrads::like(const AdaptorSet& a) {
    return {zero_grads(a.user), zero_grads(a.item)};
}

void AdaptorGrads::zero() {
    for (auto& g : user) g.zero();
    for (auto& g : item) g.zero();
}

Projection project(const AdaptorSet& a, std::span<const double> e_u, std::span<const double> e_t,
                   std::span<const Vector> history, ProjectionTape* tape) {
    check_dim(e_u, a.user.in_dim(), "project: user embedding");
    check_dim(e_t, a.item.in_dim(), "project: target embedding");
    for (const auto& e : history) check_dim(e, a.item.in_dim(), "project: history embedding");
    Projection p;
    p.user = mlp_stack_forward(a.user, e_u, tape ? &tape->user : nullptr);
    p.target = mlp_stack_forward(a.item, e_t, tape ? &tape->target : nullptr);
    if (tape) tape->history.assign(history.size(), {});
    for (std::size_t i = 0; i < history.size(); ++i)
        p.history.push_back(mlp_stack_forward(a.item, history[i], tape ? &tape->history[i] : nullptr));
    return p;
}

ProjectionInputGrads project_backward(const AdaptorSet& a, const ProjectionTape& tape,
                                      std::span<const double> d_user, std::span<const double> d_target,
                                      std::span<const Vector> d_history, AdaptorGrads& acc) {
    if (d_history.size() != tape.history.size())
        throw TapeError("project_backward: history length differs from the tape");
    ProjectionInputGrads out;
    out.user = mlp_stack_backward(a.user, tape.user, d_user, acc.user);
    out.target = mlp_stack_backward(a.item, tape.target, d_target, acc.item);
    out.history.resize(d_history.size());
    for (std::size_t i = 0; i < d_history.size(); ++i) {
        if (d_history[i].empty()) continue;
        out.history[i] = mlp_stack_backward(a.item, tape.history[i], d_history[i], acc.item);
    }
    return out;
}

void validate(const FusionConfig& cfg) {
    if (cfg.k_top < 1) throw ConfigError("fusion.k_top", "must be at least 1");
    if (!(cfg.p_max >= 0.0 && cfg.p_max <= 1.0)) throw ConfigError("fusion.p_max", "must lie in [0, 1]");
}

double mask_probability(double frequency, double p_max) {
    if (!(frequency >= 0.0)) throw ConfigError("frequency", "must be non-negative");
    return p_max / (1.0 + std::log1p(frequency));
}

std::string encode_mask(const MaskDecision& m) {
    std::string keep, p;
    for (std::size_t i = 0; i < m.keep.size(); ++i) {
        keep += (i ? "," : "") + std::to_string(m.keep[i]);
        p += (i ? "," : "") + io::format_double(m.probability[i]);
    }
    return "keep=" + keep + " p=" + p;
}

MaskDecision decode_mask(std::string_view s) {
    const auto sp = s.find(" p=");
    if (s.substr(0, 5) != "keep=" || sp == std::string_view::npos) throw ParseError(0, "malformed mask decision");
    MaskDecision m;
    const auto keep = s.substr(5, sp - 5), p = s.substr(sp + 3);
    if (!keep.empty())
        for (const auto& k : io::split(keep, ',')) m.keep.push_back(static_cast<std::uint8_t>(io::parse_u64(k, "keep") != 0));
    if (!p.empty())
        for (const auto& v : io::split(p, ',')) m.probability.push_back(io::parse_double(v, "p"));
    if (m.keep.size() != m.probability.size()) throw ParseError(sp, "mask decision lists differ in length");
    return m;
}

FusionResult fuse_with_mask(std::span<const double> e_t, std::span<const Vector> e_i,
                            const MaskDecision& mask, std::size_t k_top) {
    if (mask.keep.size() != e_i.size())
        throw DimensionError("fuse: mask covers " + std::to_string(mask.keep.size()) + " items, history has " +
                             std::to_string(e_i.size()));
    for (const auto& e : e_i) check_dim(e, e_t.size(), "fuse: history embedding");
    FusionResult r;
    r.mask = mask;
    r.e_item.assign(e_t.size(), 0.0);
    r.similarity.assign(e_i.size(), std::numeric_limits<double>::quiet_NaN());
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < e_i.size(); ++i) {
        if (!mask.keep[i]) continue;
        const double c = cosine(e_t, e_i[i]);
        if (!std::isfinite(c)) continue;  // zero-norm item or target
        r.similarity[i] = c;
        candidates.push_back(i);
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [&](std::size_t a, std::size_t b) { return r.similarity[a] > r.similarity[b]; });
    if (candidates.size() > k_top) candidates.resize(k_top);
    r.selected = std::move(candidates);
    for (auto i : r.selected) axpy(1.0, e_i[i], r.e_item);
    r.empty_selection = r.selected.empty();
    return r;
}

FusionResult fuse_relevant_items(std::span<const double> e_t, std::span<const Vector> e_i,
                                 std::span<const std::uint64_t> frequencies,
                                 const FusionConfig& cfg, Rng& rng) {
    validate(cfg);
    if (frequencies.size() != e_i.size())
        throw DimensionError("fuse: " + std::to_string(frequencies.size()) + " frequencies for " +
                             std::to_string(e_i.size()) + " history items");
    MaskDecision mask;
    for (auto f : frequencies) {
        const double p = cfg.train_mode ? mask_probability(static_cast<double>(f), cfg.p_max) : 0.0;
        mask.probability.push_back(p);
        mask.keep.push_back(cfg.train_mode ? static_cast<std::uint8_t>(!rng.bernoulli(p)) : 1);
    }
    return fuse_with_mask(e_t, e_i, mask, cfg.k_top);
}

std::vector<Vector> fusion_backward(const FusionResult& result, std::size_t history_size,
                                    std::span<const double> upstream) {
    if (result.mask.keep.size() != history_size || upstream.size() != result.e_item.size())
        throw TapeError("fusion_backward: result does not match the history or gradient shape");
    std::vector<Vector> out(history_size);
    for (auto i : result.selected) out[i].assign(upstream.begin(), upstream.end());
    return out;
}

Rng masking_rng(std::uint64_t run_seed, std::uint64_t example_id, std::uint64_t epoch) {
    return Rng(Rng::mix(run_seed ^ Rng::mix(example_id ^ Rng::mix(epoch + 0x6D61736BULL))));
}

}  // namespace msd::fusion
