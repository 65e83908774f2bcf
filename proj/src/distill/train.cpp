// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#include "msd/distill/train.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "msd/error.hpp"
#include "msd/io/text.hpp"

namespace msd::distill {

double mean_token_loss(const StudentModel& m, std::span<const DistillExample> examples) {
    if (examples.empty()) return std::numeric_limits<double>::quiet_NaN();
    double total = 0.0;
    std::size_t tokens = 0;
    for (const auto& ex : examples) {
        const auto l = distill_loss(m, ex);
        total += l.total;
        tokens += l.tokens;
    }
    return total / static_cast<double>(tokens);
}

DistillRun train_student(std::size_t vocab_size, std::span<const DistillExample> train,
                         std::span<const DistillExample> val, const DistillTrainConfig& cfg,
                         Rng& rng, const CheckpointSink& sink) {
    if (train.empty()) throw ConfigError("distill.train", "training set is empty");
    if (cfg.batch_size == 0) throw ConfigError("distill.batch_size", "must be positive");
    Rng init_rng = rng.split(1);
    Rng order_rng = rng.split(2);
    DistillRun run{StudentModel::init(vocab_size, cfg.student, init_rng), {}};
    StudentGrads grads = StudentGrads::like(run.model);
    const auto params = student_params(run.model, grads);
    Optimizer opt(cfg.optimizer);
    const auto train_eval = train.first(std::min(train.size(), std::max<std::size_t>(cfg.train_eval_size, 1)));

    auto record_point = [&](std::size_t step) {
        run.curve.push_back({step, mean_token_loss(run.model, train_eval), mean_token_loss(run.model, val)});
        if (sink) sink(step, run.model);
    };
    record_point(0);

    std::vector<std::size_t> order(train.size());
    std::size_t cursor = order.size();
    for (std::size_t step = 1; step <= cfg.steps; ++step) {
        grads.zero();
        double batch_loss = 0.0;
        std::size_t tokens = 0;
        for (std::size_t b = 0; b < cfg.batch_size; ++b) {
            if (cursor == order.size()) {
                std::iota(order.begin(), order.end(), 0);
                for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng.below(i)]);
                cursor = 0;
            }
            const auto l = distill_loss(run.model, train[order[cursor++]], &grads);
            batch_loss += l.total;
            tokens += l.tokens;
        }
        const double inv = 1.0 / static_cast<double>(tokens);
        for (const auto& p : params)
            for (double& g : p.grad) g *= inv;
        if (!std::isfinite(batch_loss)) {
            throw NumericError("distillation diverged at step " + std::to_string(step) +
                               ": batch loss " + io::format_double(batch_loss * inv) +
                               ", gradient norm " + io::format_double(grad_norm(params)) +
                               ", learning rate " + io::format_double(cfg.optimizer.learning_rate));
        }
        opt.step(params);
        const bool last = step == cfg.steps;
        if (last || (cfg.ckpt_every > 0 && step % cfg.ckpt_every == 0)) record_point(step);
    }
    return run;
}

std::string format_loss_curve(std::span<const LossPoint> curve) {
    std::string out = "step\ttrain_loss\tval_loss\n";
    for (const auto& p : curve)
        out += std::to_string(p.step) + "\t" + io::format_double(p.train_loss) + "\t" +
               io::format_double(p.val_loss) + "\n";
    return out;
}

}  // namespace msd::distill
