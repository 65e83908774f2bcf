// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "msd/ctr/metrics.hpp"
#include "msd/ctr/model.hpp"
#include "msd/numerics/optim.hpp"

namespace msd::ctr {

struct CtrTrainConfig {
    OptimizerConfig optimizer{OptimizerKind::Adam, 5e-4, 0.9, 0.999, 1e-8, 5.0, 0.1};
    std::size_t epochs = 8;
    std::size_t batch_size = 64;
    /// Stop after this many optimizer steps; 0 = run every epoch.
    std::size_t max_steps = 0;
    /// Seeds the per-epoch shuffle and the per-row fusion masks.
    std::uint64_t seed = 0;
    std::size_t eval_threads = 1;
    /// Restore the parameters of the epoch with the best validation AUC
    /// (the last epoch when validation has a single class or is empty).
    bool keep_best = true;
};

struct CtrEpochPoint {
    std::size_t epoch = 0;
    std::size_t steps = 0;      // optimizer steps so far
    double train_loss = 0.0;    // mean BCE of the epoch's batches (train mode)
    double val_logloss = 0.0;   // NaN without validation rows
    double val_auc = 0.0;       // NaN without both classes in validation
};

struct CtrRun {
    std::vector<CtrEpochPoint> curve;
    std::size_t best_epoch = 0;  // the epoch whose parameters the model holds
};

/// Mini-batch BCE training of `model` in place. Each epoch walks a shuffle
/// seeded from (seed, epoch); fusion masks come from masking_rng(seed,
/// row_id, epoch). The batch gradient is the mean over its rows. Throws
/// ConfigError on empty training data and NumericError when the loss or
/// gradient stops being finite.
CtrRun train_ctr(CtrModel& model, const FeatureContext& ctx,
                 std::span<const synth::InteractionRow> train,
                 std::span<const synth::InteractionRow> val, const CtrTrainConfig& cfg);

/// Mean BCE of `rows` in inference mode, with gradients into `g` when given
/// (train-mode masking is off, so the value is a smooth function of the
/// parameters; used by gradient checks).
double mean_bce(const CtrModel& m, const FeatureContext& ctx,
                std::span<const synth::InteractionRow> rows, CtrGrads* g);

struct RowSplits {
    std::vector<synth::InteractionRow> train, valid, test;
};

/// Partitions rows by synth::split_of(user_id), keeping row order.
RowSplits split_rows(std::span<const synth::InteractionRow> rows);

std::vector<int> labels_of(std::span<const synth::InteractionRow> rows);

/// AUC and logloss of `model` on `rows`. `baseline_auc` fills relaimpr when
/// it is above 0.5.
EvalReport evaluate(const CtrModel& model, const FeatureContext& ctx,
                    std::span<const synth::InteractionRow> rows, std::uint64_t seed,
                    const std::string& baseline = {}, double baseline_auc = 0.0,
                    std::size_t threads = 1);

}  // namespace msd::ctr
