// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#include "msd/ctr/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "msd/error.hpp"
#include "msd/fusion/fusion.hpp"

namespace msd::ctr {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// -[y ln p + (1-y) ln(1-p)] from the logit, without forming p.
double bce_from_logit(double z, int y) {
    const double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    return y ? softplus - z : softplus;
}

bool has_both_classes(std::span<const int> labels) {
    bool pos = false, neg = false;
    for (int y : labels) (y ? pos : neg) = true;
    return pos && neg;
}

}  // namespace

double mean_bce(const CtrModel& m, const FeatureContext& ctx,
                std::span<const synth::InteractionRow> rows, CtrGrads* g) {
    if (rows.empty()) throw ConfigError("rows", "no rows to evaluate");
    SemanticLookup lookup(m, ctx);
    if (g) g->zero();
    const double inv = 1.0 / static_cast<double>(rows.size());
    double total = 0.0;
    for (const auto& r : rows) {
        RowTape tape;
        const double z = forward_logit(m, ctx, r, false, nullptr, lookup, g ? &tape : nullptr);
        total += bce_from_logit(z, r.label);
        if (g) backward_logit(m, ctx, r, tape, (sigmoid(z) - r.label) * inv, *g, lookup);
    }
    if (g && g->lora) lookup.backward(*g->lora);
    return total * inv;
}

CtrRun train_ctr(CtrModel& model, const FeatureContext& ctx,
                 std::span<const synth::InteractionRow> train,
                 std::span<const synth::InteractionRow> val, const CtrTrainConfig& cfg) {
    if (train.empty()) throw ConfigError("ctr.train", "no training rows");
    if (cfg.batch_size == 0) throw ConfigError("ctr.batch_size", "must be positive");
    CtrGrads grads = CtrGrads::like(model);
    const auto params = ctr_params(model, grads);
    Optimizer opt(cfg.optimizer);
    SemanticLookup lookup(model, ctx);
    const std::vector<int> val_labels = labels_of(val);

    CtrRun run;
    std::vector<std::vector<double>> best;
    double best_auc = -1.0;
    std::vector<std::size_t> order(train.size());
    std::size_t steps = 0;
    bool done = false;
    for (std::size_t epoch = 0; epoch < cfg.epochs && !done; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffle = Rng(cfg.seed).split(0xC700 + epoch);
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

        double epoch_loss = 0.0;
        std::size_t epoch_rows = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            const double inv = 1.0 / static_cast<double>(end - start);
            zero_grads(params);
            double batch_loss = 0.0;
            for (std::size_t k = start; k < end; ++k) {
                const auto& row = train[order[k]];
                Rng mask = fusion::masking_rng(cfg.seed, row.row_id, epoch);
                RowTape tape;
                const double z = forward_logit(model, ctx, row, true, &mask, lookup, &tape);
                batch_loss += bce_from_logit(z, row.label);
                backward_logit(model, ctx, row, tape, (sigmoid(z) - row.label) * inv, grads, lookup);
            }
            if (grads.lora) lookup.backward(*grads.lora);
            const double gn = grad_norm(params);
            if (!std::isfinite(batch_loss) || !std::isfinite(gn)) {
                std::ostringstream msg;
                msg << "CTR training diverged at epoch " << epoch << " step " << steps
                    << ": batch loss " << batch_loss * inv << ", gradient norm " << gn;
                throw NumericError(msg.str());
            }
            opt.step(params);
            ++steps;
            // Without LoRA the semantic embeddings are constant and stay cached.
            if (model.lora) lookup.clear();
            epoch_loss += batch_loss;
            epoch_rows += end - start;
            if (cfg.max_steps && steps >= cfg.max_steps) {
                done = true;
                break;
            }
        }
        CtrEpochPoint pt{epoch, steps, epoch_loss / static_cast<double>(epoch_rows), kNaN, kNaN};
        if (!val.empty()) {
            const auto p = predict(model, ctx, val, cfg.eval_threads);
            pt.val_logloss = logloss(p, val_labels);
            if (has_both_classes(val_labels)) pt.val_auc = auc(p, val_labels);
        }
        run.curve.push_back(pt);
        run.best_epoch = epoch;
        if (cfg.keep_best && std::isfinite(pt.val_auc)) {
            if (pt.val_auc > best_auc) {
                best_auc = pt.val_auc;
                best.clear();
                for (const auto& b : params) best.emplace_back(b.value.begin(), b.value.end());
            }
        }
    }
    if (!best.empty()) {
        for (std::size_t k = 0; k < params.size(); ++k)
            std::copy(best[k].begin(), best[k].end(), params[k].value.begin());
        for (std::size_t e = 0; e < run.curve.size(); ++e)
            if (run.curve[e].val_auc == best_auc) {
                run.best_epoch = e;
                break;
            }
    }
    return run;
}

RowSplits split_rows(std::span<const synth::InteractionRow> rows) {
    RowSplits out;
    for (const auto& r : rows) {
        switch (synth::split_of(r.user_id)) {
            case synth::Split::Train: out.train.push_back(r); break;
            case synth::Split::Valid: out.valid.push_back(r); break;
            case synth::Split::Test: out.test.push_back(r); break;
        }
    }
    return out;
}

std::vector<int> labels_of(std::span<const synth::InteractionRow> rows) {
    std::vector<int> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r.label);
    return out;
}

EvalReport evaluate(const CtrModel& model, const FeatureContext& ctx,
                    std::span<const synth::InteractionRow> rows, std::uint64_t seed,
                    const std::string& baseline, double baseline_auc, std::size_t threads) {
    const auto p = predict(model, ctx, rows, threads);
    const auto y = labels_of(rows);
    EvalReport r;
    r.variant = std::string(variant_name(model.cfg.variant));
    r.seed = seed;
    r.n_examples = rows.size();
    r.auc = auc(p, y);
    r.logloss = logloss(p, y);
    r.baseline = baseline;
    if (!baseline.empty() && baseline_auc > 0.5) r.relaimpr = relaimpr(r.auc, baseline_auc);
    return r;
}

}  // namespace msd::ctr
