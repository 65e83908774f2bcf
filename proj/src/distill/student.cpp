// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#include "msd/distill/student.hpp"

#include <algorithm>
#include <cmath>

#include "msd/error.hpp"
#include "msd/io/binary.hpp"
#include "msd/io/text.hpp"

namespace msd::distill {

namespace {

constexpr std::string_view kMagic = "MSDS";
constexpr std::uint32_t kVersion = 1;

void check_ids(std::span<const TokenId> ids, std::size_t vocab_size) {
    for (auto t : ids) {
        if (t >= vocab_size)
            throw DimensionError("token id " + std::to_string(t) + " >= vocabulary size " +
                                 std::to_string(vocab_size));
    }
}

// h = ReLU(W1·in + b1).
void hidden_forward(const StudentModel& m, std::span<const double> in, std::span<double> h) {
    std::copy(m.hidden.bias.begin(), m.hidden.bias.end(), h.begin());
    matvec_acc(m.hidden.weight, in, h);
    apply_activation(Activation::ReLU, h);
}

// In place: `v` becomes log-probabilities.
void log_softmax(std::span<double> v) {
    const double mx = *std::max_element(v.begin(), v.end());
    double sum = 0.0;
    for (double x : v) sum += std::exp(x - mx);
    const double lse = mx + std::log(sum);
    for (double& x : v) x -= lse;
}

}  // namespace

StudentModel StudentModel::init(std::size_t vocab_size, const StudentConfig& cfg, Rng& rng) {
    if (cfg.window == 0) throw ConfigError("student.window", "must be positive");
    if (cfg.d_tok == 0) throw ConfigError("student.d_tok", "must be positive");
    if (cfg.d_h == 0) throw ConfigError("student.d_h", "must be positive");
    StudentModel m;
    m.window = cfg.window;
    m.embedding = Matrix(vocab_size, cfg.d_tok);
    for (double& v : m.embedding.values()) v = rng.normal() * 0.1;
    m.hidden = MlpLayer::random((cfg.window + 1) * cfg.d_tok, cfg.d_h, Activation::ReLU, rng);
    m.output = MlpLayer::random(cfg.d_h, vocab_size, Activation::Identity, rng);
    return m;
}

StudentGrads StudentGrads::like(const StudentModel& m) {
    return {Matrix(m.embedding.rows(), m.embedding.cols()), MlpGrads::like(m.hidden),
            MlpGrads::like(m.output)};
}

void StudentGrads::zero() {
    embedding.fill(0.0);
    hidden.zero();
    output.zero();
}

std::vector<ParamBlock> student_params(StudentModel& m, StudentGrads& g) {
    return {
        {"embedding", m.embedding.values(), g.embedding.values()},
        {"hidden.weight", m.hidden.weight.values(), g.hidden.weight.values()},
        {"hidden.bias", m.hidden.bias, g.hidden.bias},
        {"output.weight", m.output.weight.values(), g.output.weight.values()},
        {"output.bias", m.output.bias, g.output.bias},
    };
}

DistillExample make_example(const Vocab& vocab, const std::string& prompt,
                            const knowledge::SemanticRecord& record) {
    DistillExample ex{vocab.encode(prompt), vocab.encode(knowledge::serialize(record))};
    ex.y.push_back(Vocab::kEos);
    return ex;
}

std::span<const TokenId> bag_tokens(std::span<const TokenId> x) {
    for (std::size_t i = x.size(); i-- > 0;)
        if (x[i] == Vocab::kSep) return x.subspan(i + 1);
    return x;
}

Vector bag_mean(const StudentModel& m, std::span<const TokenId> bag) {
    Vector out(m.d_tok(), 0.0);
    if (bag.empty()) return out;
    for (auto t : bag) axpy(1.0, m.embedding.row(t), out);
    for (double& v : out) v /= static_cast<double>(bag.size());
    return out;
}

void student_input(const StudentModel& m, std::span<const TokenId> seq, std::size_t end,
                   std::span<const double> bag, std::span<double> out) {
    const std::size_t d = m.d_tok();
    for (std::size_t k = 0; k < m.window; ++k) {
        // Slot k holds token end - window + k, or <pad> before the start.
        const std::size_t back = m.window - k;
        const TokenId t = end >= back ? seq[end - back] : Vocab::kPad;
        const auto e = m.embedding.row(t);
        std::copy(e.begin(), e.end(), out.begin() + static_cast<std::ptrdiff_t>(k * d));
    }
    std::copy(bag.begin(), bag.end(), out.begin() + static_cast<std::ptrdiff_t>(m.window * d));
}

Vector next_token_distribution(const StudentModel& m, std::span<const TokenId> context,
                               std::span<const double> bag) {
    check_ids(context, m.vocab_size());
    Vector in(m.in_dim()), h(m.d_h());
    student_input(m, context, context.size(), bag, in);
    hidden_forward(m, in, h);
    Vector logits = m.output.bias;
    matvec_acc(m.output.weight, h, logits);
    apply_activation(Activation::Softmax, logits);
    return logits;
}

LossValue distill_loss(const StudentModel& m, const DistillExample& ex, StudentGrads* grads) {
    if (ex.y.empty()) throw DimensionError("distill_loss: empty target sequence");
    const std::size_t V = m.vocab_size();
    check_ids(ex.x, V);
    check_ids(ex.y, V);
    TokenSequence seq(ex.x);
    seq.push_back(Vocab::kBos);
    const std::size_t start = seq.size();
    seq.insert(seq.end(), ex.y.begin(), ex.y.end());
    const auto bag_ids = bag_tokens(ex.x);
    const Vector bag = bag_mean(m, bag_ids);

    Vector in(m.in_dim()), h(m.d_h()), logits(V), dh(m.d_h()), din(m.in_dim());
    Vector dbag(m.d_tok(), 0.0);
    LossValue out;
    for (std::size_t i = start; i < seq.size(); ++i) {
        student_input(m, seq, i, bag, in);
        hidden_forward(m, in, h);
        std::copy(m.output.bias.begin(), m.output.bias.end(), logits.begin());
        matvec_acc(m.output.weight, h, logits);
        log_softmax(logits);
        const TokenId target = seq[i];
        out.total -= logits[target];
        if (!grads) continue;

        // dL/dlogits = softmax - onehot.
        for (double& v : logits) v = std::exp(v);
        logits[target] -= 1.0;
        add_outer(grads->output.weight, logits, h);
        axpy(1.0, logits, grads->output.bias);
        std::fill(dh.begin(), dh.end(), 0.0);
        matvec_t_acc(m.output.weight, logits, dh);
        for (std::size_t k = 0; k < dh.size(); ++k)
            if (h[k] <= 0.0) dh[k] = 0.0;
        add_outer(grads->hidden.weight, dh, in);
        axpy(1.0, dh, grads->hidden.bias);
        std::fill(din.begin(), din.end(), 0.0);
        matvec_t_acc(m.hidden.weight, dh, din);
        const std::size_t d = m.d_tok();
        for (std::size_t k = 0; k < m.window; ++k) {
            const std::size_t back = m.window - k;
            const TokenId t = i >= back ? seq[i - back] : Vocab::kPad;
            axpy(1.0, std::span<const double>(din).subspan(k * d, d), grads->embedding.row(t));
        }
        axpy(1.0, std::span<const double>(din).subspan(m.window * d, d), dbag);
    }
    if (grads && !bag_ids.empty()) {
        const double s = 1.0 / static_cast<double>(bag_ids.size());
        for (auto t : bag_ids) axpy(s, dbag, grads->embedding.row(t));
    }
    out.tokens = ex.y.size();
    out.per_token = out.total / static_cast<double>(out.tokens);
    return out;
}

TokenSequence greedy_decode(const StudentModel& m, std::span<const TokenId> x, std::size_t max_len) {
    check_ids(x, m.vocab_size());
    TokenSequence seq(x.begin(), x.end());
    seq.push_back(Vocab::kBos);
    const Vector bag = bag_mean(m, bag_tokens(x));
    TokenSequence out;
    while (out.size() < max_len) {
        const Vector p = next_token_distribution(m, seq, bag);
        // max_element returns the first maximum, i.e. the lowest id on ties.
        const auto best = static_cast<TokenId>(std::max_element(p.begin(), p.end()) - p.begin());
        out.push_back(best);
        seq.push_back(best);
        if (best == Vocab::kEos) break;
    }
    return out;
}

Matrix position_inputs(const StudentModel& m, std::span<const TokenId> ids) {
    check_ids(ids, m.vocab_size());
    const Vector bag = bag_mean(m, bag_tokens(ids));
    Matrix out(ids.size(), m.in_dim());
    for (std::size_t j = 0; j < ids.size(); ++j) student_input(m, ids, j + 1, bag, out.row(j));
    return out;
}

SemanticEmbedding semantic_embedding(const StudentModel& m, const Vocab& vocab, const std::string& text) {
    SemanticEmbedding out{Vector(m.d_sem(), 0.0), false};
    const TokenSequence ids = vocab.encode(text);
    if (ids.empty()) {
        out.empty_text = true;
        return out;
    }
    const Matrix inputs = position_inputs(m, ids);
    Vector h(m.d_h());
    for (std::size_t j = 0; j < inputs.rows(); ++j) {
        hidden_forward(m, inputs.row(j), h);
        axpy(1.0, h, out.value);
    }
    for (double& v : out.value) v /= static_cast<double>(ids.size());
    return out;
}

void save_student(const StudentModel& m, const std::filesystem::path& p) {
    std::string out(kMagic);
    io::put_u32(out, kVersion);
    io::put_u32(out, static_cast<std::uint32_t>(m.vocab_size()));
    io::put_u32(out, static_cast<std::uint32_t>(m.window));
    io::put_u32(out, static_cast<std::uint32_t>(m.d_tok()));
    io::put_u32(out, static_cast<std::uint32_t>(m.d_h()));
    io::put_f32s(out, m.embedding.values());
    io::put_f32s(out, m.hidden.weight.values());
    io::put_f32s(out, m.hidden.bias);
    io::put_f32s(out, m.output.weight.values());
    io::put_f32s(out, m.output.bias);
    io::write_file(p, out);
}

StudentModel load_student(const std::filesystem::path& p) {
    const std::string data = io::read_file(p);
    io::BinaryReader r(data);
    r.expect(kMagic, "student checkpoint: " + p.string());
    const auto version = r.u32();
    if (version != kVersion)
        throw ParseError(4, p.string() + ": unsupported checkpoint version " + std::to_string(version));
    const std::size_t V = r.u32(), W = r.u32(), d_tok = r.u32(), d_h = r.u32();
    if (V < 4 || W == 0 || d_tok == 0 || d_h == 0) throw ParseError(8, p.string() + ": bad header");
    StudentModel m;
    m.window = W;
    m.embedding = Matrix(V, d_tok);
    m.hidden = MlpLayer::zeros((W + 1) * d_tok, d_h, Activation::ReLU);
    m.output = MlpLayer::zeros(d_h, V, Activation::Identity);
    const std::size_t expected = 24 + 4 * (V * d_tok + m.hidden.weight.size() + d_h +
                                           m.output.weight.size() + V);
    if (data.size() != expected)
        throw ParseError(std::min(data.size(), expected),
                         p.string() + ": checkpoint size does not match its header");
    r.f32s(m.embedding.values());
    r.f32s(m.hidden.weight.values());
    r.f32s(m.hidden.bias);
    r.f32s(m.output.weight.values());
    r.f32s(m.output.bias);
    return m;
}

}  // namespace msd::distill
