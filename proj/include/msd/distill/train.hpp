// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "msd/distill/student.hpp"
#include "msd/numerics/optim.hpp"

namespace msd::distill {

struct DistillTrainConfig {
    StudentConfig student;
    OptimizerConfig optimizer{OptimizerKind::Adam, 3e-3, 0.9, 0.999, 1e-8, 5.0};
    std::size_t steps = 2000;
    std::size_t batch_size = 8;
    /// Loss-curve points and checkpoints every this many steps (and at step 0
    /// and the last step). 0 means only step 0 and the last step.
    std::size_t ckpt_every = 200;
    /// Training loss is reported on the first this-many training examples.
    std::size_t train_eval_size = 256;
};

struct LossPoint {
    std::size_t step = 0;
    double train_loss = 0.0;  // mean per-token NLL
    double val_loss = 0.0;    // NaN when there is no validation data
};

struct DistillRun {
    StudentModel model;
    std::vector<LossPoint> curve;
};

using CheckpointSink = std::function<void(std::size_t step, const StudentModel& model)>;

/// Token-weighted mean NLL over `examples`.
double mean_token_loss(const StudentModel& m, std::span<const DistillExample> examples);

/// Mini-batch training of a freshly initialized student. Batches walk a
/// per-epoch shuffle of the training set; the update uses the per-token mean
/// gradient of the batch. `sink` is called at every loss-curve point.
/// Throws ConfigError on an empty training set and NumericError (with step,
/// loss and gradient norm) when training diverges.
DistillRun train_student(std::size_t vocab_size, std::span<const DistillExample> train,
                         std::span<const DistillExample> val, const DistillTrainConfig& cfg,
                         Rng& rng, const CheckpointSink& sink = {});

/// "step\ttrain_loss\tval_loss" header plus one line per point.
std::string format_loss_curve(std::span<const LossPoint> curve);

}  // namespace msd::distill
