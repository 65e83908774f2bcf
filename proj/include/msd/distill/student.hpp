// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "msd/distill/vocab.hpp"
#include "msd/knowledge/record.hpp"
#include "msd/numerics/layers.hpp"
#include "msd/numerics/matrix.hpp"
#include "msd/numerics/optim.hpp"
#include "msd/numerics/rng.hpp"

namespace msd::distill {

struct StudentConfig {
    std::size_t window = 4;
    std::size_t d_tok = 16;
    std::size_t d_h = 64;
};

/// Fixed-window neural language model with a conditioning vector.
///
/// The input for predicting the token after position j is the concatenation
/// of the embeddings of the last `window` tokens up to j (left-padded with
/// <pad>) and the mean embedding of the "bag" tokens: the tokens after the
/// last <sep> of the prompt, or the whole prompt when it has no <sep>. The
/// bag lets every step see the subject text, which a 4-token window alone
/// cannot once the output is longer than the window.
///
///     in  = [emb(t_{j-W+1}); ...; emb(t_j); mean emb(bag)]      (W+1)·d_tok
///     h   = ReLU(W1·in + b1)                                    d_h
///     p   = softmax(W2·h + b2)                                  V
struct StudentModel {
    Matrix embedding;  // V × d_tok
    MlpLayer hidden;   // ReLU
    MlpLayer output;   // Identity; softmax is applied by the callers
    std::size_t window = 4;

    static StudentModel init(std::size_t vocab_size, const StudentConfig& cfg, Rng& rng);

    std::size_t vocab_size() const noexcept { return embedding.rows(); }
    std::size_t d_tok() const noexcept { return embedding.cols(); }
    std::size_t d_h() const noexcept { return hidden.out_dim(); }
    std::size_t d_sem() const noexcept { return d_h(); }
    std::size_t in_dim() const noexcept { return hidden.in_dim(); }

    friend bool operator==(const StudentModel& a, const StudentModel& b) {
        return a.window == b.window && a.embedding == b.embedding &&
               a.hidden.weight == b.hidden.weight && a.hidden.bias == b.hidden.bias &&
               a.output.weight == b.output.weight && a.output.bias == b.output.bias;
    }
};

struct StudentGrads {
    Matrix embedding;
    MlpGrads hidden;
    MlpGrads output;

    static StudentGrads like(const StudentModel& m);
    void zero();
};

/// Blocks in a fixed order: embedding, hidden.weight, hidden.bias,
/// output.weight, output.bias.
std::vector<ParamBlock> student_params(StudentModel& m, StudentGrads& g);

/// Prompt tokens x and the teacher's answer y (EOS-terminated).
struct DistillExample {
    TokenSequence x;
    TokenSequence y;
};

DistillExample make_example(const Vocab& vocab, const std::string& prompt,
                            const knowledge::SemanticRecord& record);

/// The tokens whose mean embedding conditions every step.
std::span<const TokenId> bag_tokens(std::span<const TokenId> x);

Vector bag_mean(const StudentModel& m, std::span<const TokenId> bag);

/// Student input for the window that ends just before `end` in `seq`.
void student_input(const StudentModel& m, std::span<const TokenId> seq, std::size_t end,
                   std::span<const double> bag, std::span<double> out);

/// Softmax distribution over the next token given the full context so far.
Vector next_token_distribution(const StudentModel& m, std::span<const TokenId> context,
                               std::span<const double> bag);

struct LossValue {
    double total = 0.0;      // -Σ log p(y_t | ...)
    double per_token = 0.0;  // total / |y|
    std::size_t tokens = 0;
};

/// Teacher-forced negative log-likelihood of y given x and BOS; the context
/// for y_t is x, BOS, y_<t. When `grads` is given the gradients are added
/// into it. Throws DimensionError on token ids >= V or an empty y.
LossValue distill_loss(const StudentModel& m, const DistillExample& ex, StudentGrads* grads = nullptr);

/// Argmax decoding after x, BOS (ties: lowest id). Stops after emitting EOS
/// (which is included) or after max_len tokens.
TokenSequence greedy_decode(const StudentModel& m, std::span<const TokenId> x, std::size_t max_len);

struct SemanticEmbedding {
    Vector value;             // d_sem
    bool empty_text = false;  // true: value is all zeros
};

/// Mean over positions j of the hidden activation for the window ending at
/// (and including) token j; the bag is the text's own tokens.
SemanticEmbedding semantic_embedding(const StudentModel& m, const Vocab& vocab, const std::string& text);

/// Rows are the hidden-layer inputs of each position of `ids`, as used by
/// semantic_embedding. Lets callers cache inputs for frozen embeddings.
Matrix position_inputs(const StudentModel& m, std::span<const TokenId> ids);

/// Binary checkpoint:
///   magic "MSDS" (4 bytes), then u32 LE version=1, V, W, d_tok, d_h,
///   then float32 LE blocks: embedding (V×d_tok, row-major),
///   hidden.weight (d_h × (W+1)·d_tok), hidden.bias (d_h),
///   output.weight (V × d_h), output.bias (V).
void save_student(const StudentModel& m, const std::filesystem::path& p);
StudentModel load_student(const std::filesystem::path& p);

}  // namespace msd::distill
