// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#include "msd/ctr/model.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>

#include "msd/error.hpp"
#include "msd/io/binary.hpp"
#include "msd/io/text.hpp"

namespace msd::ctr {

namespace {

constexpr std::string_view kMagic = "MSDC";
constexpr std::uint32_t kVersion = 1;

const TextFeatures kEmptyText{};

std::size_t id_row(std::uint32_t id, std::size_t rows) { return id < rows ? id : 0; }

Matrix small_table(std::size_t rows, std::size_t cols, Rng& rng) {
    Matrix m(rows, cols);
    for (double& v : m.values()) v = rng.uniform(-0.05, 0.05);
    return m;
}

void put_block(std::span<double> dst, std::size_t offset, std::span<const double> src) {
    std::copy(src.begin(), src.end(), dst.begin() + static_cast<std::ptrdiff_t>(offset));
}

// Every parameter tensor, in checkpoint order, regardless of variant.
std::vector<std::span<double>> all_values(CtrModel& m) {
    std::vector<std::span<double>> out = {m.user_emb.values(), m.item_emb.values(),
                                          m.hour_emb.values(), m.device_emb.values()};
    for (auto* mlp : {&m.adaptors.user, &m.adaptors.item, &m.head}) {
        for (auto& l : mlp->layers) {
            out.push_back(l.weight.values());
            out.push_back(l.bias);
        }
    }
    if (m.lora) {
        out.push_back(m.lora->a().values());
        out.push_back(m.lora->b().values());
    }
    return out;
}

}  // namespace

std::string_view variant_name(Variant v) noexcept {
    switch (v) {
        case Variant::Full: return "full";
        case Variant::NoLora: return "no_lora";
        case Variant::NoItemFusion: return "no_item_fusion";
        case Variant::NoUserLevel: return "no_user_level";
        case Variant::IdOnly: return "id_only";
    }
    return "?";
}

Variant parse_variant(std::string_view s) {
    for (auto v : {Variant::Full, Variant::NoLora, Variant::NoItemFusion, Variant::NoUserLevel, Variant::IdOnly})
        if (variant_name(v) == s) return v;
    throw ConfigError("variant", "unknown variant '" + std::string(s) + "'");
}

bool uses_lora(Variant v) noexcept { return v != Variant::NoLora && v != Variant::IdOnly; }
bool uses_user_level(Variant v) noexcept { return v != Variant::NoUserLevel && v != Variant::IdOnly; }
bool uses_item_fusion(Variant v) noexcept { return v != Variant::NoItemFusion && v != Variant::IdOnly; }
bool uses_semantics(Variant v) noexcept { return v != Variant::IdOnly; }

TextFeatures text_features(const distill::StudentModel& student, distill::TokenSequence ids) {
    TextFeatures t;
    t.ids = std::move(ids);
    t.bag = distill::bag_mean(student, distill::bag_tokens(t.ids));
    t.base = Matrix(t.ids.size(), student.d_h());
    Vector in(student.in_dim());
    for (std::size_t j = 0; j < t.ids.size(); ++j) {
        distill::student_input(student, t.ids, j + 1, t.bag, in);
        auto row = t.base.row(j);
        std::copy(student.hidden.bias.begin(), student.hidden.bias.end(), row.begin());
        matvec_acc(student.hidden.weight, in, row);
    }
    return t;
}

FeatureContext::FeatureContext(const synth::Corpus& corpus, const distill::StudentModel* student,
                               const distill::Vocab* vocab)
    : corpus_(&corpus), student_(student), exposure_(synth::exposure_table(corpus.catalog)) {
    if (!student_) return;
    if (!vocab) throw ConfigError("vocab", "a student needs its vocabulary");
    items_.resize(corpus.catalog.size() + 1);
    for (const auto& it : corpus.catalog.items) items_[it.id] = text_features(*student_, vocab->encode(it.text));
    users_.resize(corpus.users.size() + 1);
    for (const auto& u : corpus.users)
        users_[u.id] = text_features(*student_, vocab->encode(synth::user_text(corpus.catalog, u)));
}

const TextFeatures& FeatureContext::item_text(synth::ItemId id) const noexcept {
    return id < items_.size() ? items_[id] : kEmptyText;
}

const TextFeatures& FeatureContext::user_text(synth::UserId id) const noexcept {
    return id < users_.size() ? users_[id] : kEmptyText;
}

Vector pooled_embedding(const distill::StudentModel& student, const TextFeatures& text,
                        const LoraLayer* lora) {
    Vector out(student.d_h(), 0.0);
    if (text.ids.empty()) return out;
    Vector in(student.in_dim()), pre(student.d_h());
    for (std::size_t j = 0; j < text.ids.size(); ++j) {
        const auto base = text.base.row(j);
        std::copy(base.begin(), base.end(), pre.begin());
        if (lora) {
            distill::student_input(student, text.ids, j + 1, text.bag, in);
            lora_delta_acc(*lora, in, pre);
        }
        apply_activation(Activation::ReLU, pre);
        axpy(1.0, pre, out);
    }
    for (double& v : out) v /= static_cast<double>(text.ids.size());
    return out;
}

void pooled_embedding_backward(const distill::StudentModel& student, const TextFeatures& text,
                               const LoraLayer& lora, std::span<const double> upstream,
                               LoraGrads& acc) {
    if (text.ids.empty()) return;
    const double inv_n = 1.0 / static_cast<double>(text.ids.size());
    Vector in(student.in_dim()), pre(student.d_h()), d_pre(student.d_h());
    LoraTape tape;
    for (std::size_t j = 0; j < text.ids.size(); ++j) {
        const auto base = text.base.row(j);
        std::copy(base.begin(), base.end(), pre.begin());
        distill::student_input(student, text.ids, j + 1, text.bag, in);
        lora_delta_acc(lora, in, pre, &tape);
        bool any = false;
        for (std::size_t k = 0; k < pre.size(); ++k) {
            d_pre[k] = pre[k] > 0.0 ? upstream[k] * inv_n : 0.0;
            any |= d_pre[k] != 0.0;
        }
        if (any) lora_backward_params(lora, tape, d_pre, acc);
    }
}

CtrModel CtrModel::init(const CtrConfig& cfg, std::size_t n_users, std::size_t n_items,
                        std::size_t d_sem, const distill::StudentModel* student, Rng& rng) {
    if (cfg.d_id == 0) throw ConfigError("ctr.d_id", "must be positive");
    fusion::validate(cfg.fusion);
    if (uses_semantics(cfg.variant) && d_sem == 0)
        throw ConfigError("variant", std::string(variant_name(cfg.variant)) + " needs a student model");
    CtrModel m;
    m.cfg = cfg;
    Rng tables = rng.split(1), adapt = rng.split(2), head = rng.split(3), lora = rng.split(4);
    m.user_emb = small_table(n_users + 1, cfg.d_id, tables);
    m.item_emb = small_table(n_items + 1, cfg.d_id, tables);
    m.hour_emb = small_table(synth::kHourBuckets + 1, cfg.d_id, tables);
    m.device_emb = small_table(synth::kDevices + 1, cfg.d_id, tables);
    m.adaptors = fusion::AdaptorSet::random(std::max<std::size_t>(d_sem, 1), cfg.adaptor, adapt);
    std::vector<std::size_t> dims = {m.input_dim()};
    dims.insert(dims.end(), cfg.head_hidden.begin(), cfg.head_hidden.end());
    dims.push_back(1);
    m.head = Mlp::random(dims, Activation::ReLU, Activation::Identity, head);
    if (uses_lora(cfg.variant)) {
        if (!student) throw ConfigError("variant", "LoRA variants need the student's hidden weight");
        m.lora = LoraLayer::wrap(student->hidden.weight, cfg.lora_rank, cfg.lora_alpha, lora);
    }
    return m;
}

CtrGrads CtrGrads::like(const CtrModel& m) {
    CtrGrads g{Matrix(m.user_emb.rows(), m.user_emb.cols()),
               Matrix(m.item_emb.rows(), m.item_emb.cols()),
               Matrix(m.hour_emb.rows(), m.hour_emb.cols()),
               Matrix(m.device_emb.rows(), m.device_emb.cols()),
               fusion::AdaptorGrads::like(m.adaptors),
               zero_grads(m.head),
               std::nullopt};
    if (m.lora) g.lora = LoraGrads::like(*m.lora);
    return g;
}

void CtrGrads::zero() {
    for (auto* t : {&user_emb, &item_emb, &hour_emb, &device_emb}) t->fill(0.0);
    adaptors.zero();
    for (auto& h : head) h.zero();
    if (lora) lora->zero();
}

std::vector<ParamBlock> ctr_params(CtrModel& m, CtrGrads& g) {
    std::vector<ParamBlock> out = {
        {"user_emb", m.user_emb.values(), g.user_emb.values()},
        {"item_emb", m.item_emb.values(), g.item_emb.values()},
        {"hour_emb", m.hour_emb.values(), g.hour_emb.values()},
        {"device_emb", m.device_emb.values(), g.device_emb.values()},
    };
    auto add_mlp = [&](const std::string& name, Mlp& mlp, std::vector<MlpGrads>& grads) {
        for (std::size_t k = 0; k < mlp.layers.size(); ++k) {
            out.push_back({name + std::to_string(k) + ".weight", mlp.layers[k].weight.values(),
                           grads[k].weight.values()});
            out.push_back({name + std::to_string(k) + ".bias", mlp.layers[k].bias, grads[k].bias});
        }
    };
    if (uses_semantics(m.cfg.variant)) {
        add_mlp("adaptor.user", m.adaptors.user, g.adaptors.user);
        add_mlp("adaptor.item", m.adaptors.item, g.adaptors.item);
    }
    add_mlp("head", m.head, g.head);
    if (m.lora) {
        out.push_back({"lora.a", m.lora->a().values(), g.lora->a.values()});
        out.push_back({"lora.b", m.lora->b().values(), g.lora->b.values()});
    }
    return out;
}

const Vector& SemanticLookup::item(synth::ItemId id) {
    auto it = items_.find(id);
    if (it == items_.end()) {
        const auto* lora = model_->lora ? &*model_->lora : nullptr;
        it = items_.emplace(id, pooled_embedding(*ctx_->student(), ctx_->item_text(id), lora)).first;
    }
    return it->second;
}

const Vector& SemanticLookup::user(synth::UserId id) {
    auto it = users_.find(id);
    if (it == users_.end()) {
        const auto* lora = model_->lora ? &*model_->lora : nullptr;
        it = users_.emplace(id, pooled_embedding(*ctx_->student(), ctx_->user_text(id), lora)).first;
    }
    return it->second;
}

void SemanticLookup::add_item_grad(synth::ItemId id, std::span<const double> g) {
    auto& acc = item_grads_[id];
    if (acc.empty()) acc.assign(g.size(), 0.0);
    axpy(1.0, g, acc);
}

void SemanticLookup::add_user_grad(synth::UserId id, std::span<const double> g) {
    auto& acc = user_grads_[id];
    if (acc.empty()) acc.assign(g.size(), 0.0);
    axpy(1.0, g, acc);
}

void SemanticLookup::backward(LoraGrads& acc) const {
    if (!model_->lora) return;
    // Sorted ids keep the floating-point accumulation order fixed.
    auto run = [&](const auto& grads, auto text_of) {
        std::vector<std::uint32_t> ids;
        for (const auto& [id, _] : grads) ids.push_back(id);
        std::sort(ids.begin(), ids.end());
        for (auto id : ids)
            pooled_embedding_backward(*ctx_->student(), text_of(id), *model_->lora, grads.at(id), acc);
    };
    run(item_grads_, [&](std::uint32_t id) -> const TextFeatures& { return ctx_->item_text(id); });
    run(user_grads_, [&](std::uint32_t id) -> const TextFeatures& { return ctx_->user_text(id); });
}

void SemanticLookup::clear() {
    items_.clear();
    users_.clear();
    item_grads_.clear();
    user_grads_.clear();
}

double sigmoid(double z) noexcept {
    return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

double forward_logit(const CtrModel& m, const FeatureContext& ctx, const synth::InteractionRow& row,
                     bool train_mode, Rng* mask_rng, SemanticLookup& lookup, RowTape* tape) {
    const std::size_t d = m.cfg.d_id, p = m.d_proj();
    Vector x(m.input_dim(), 0.0);
    put_block(x, 0, m.user_emb.row(id_row(row.user_id, m.user_emb.rows())));
    put_block(x, d, m.item_emb.row(id_row(row.target_item_id, m.item_emb.rows())));
    if (!row.history.empty()) {
        std::span<double> hist(x.data() + 2 * d, d);
        for (auto h : row.history) axpy(1.0, m.item_emb.row(id_row(h, m.item_emb.rows())), hist);
        for (double& v : hist) v /= static_cast<double>(row.history.size());
    }
    put_block(x, 3 * d, m.hour_emb.row(row.hour_bucket < synth::kHourBuckets ? row.hour_bucket + 1 : 0));
    put_block(x, 4 * d, m.device_emb.row(row.device < synth::kDevices ? row.device + 1 : 0));

    const Variant v = m.cfg.variant;
    if (uses_semantics(v)) {
        const Vector zeros(ctx.d_sem(), 0.0);
        const Vector& e_u = uses_user_level(v) ? lookup.user(row.user_id) : zeros;
        const Vector& e_t = lookup.item(row.target_item_id);
        std::vector<Vector> e_hist;
        std::vector<std::uint64_t> freq;
        if (uses_item_fusion(v)) {
            for (auto h : row.history) {
                e_hist.push_back(lookup.item(h));
                freq.push_back(ctx.frequency(h));
            }
        }
        fusion::ProjectionTape local;
        const auto proj = fusion::project(m.adaptors, e_u, e_t, e_hist, tape ? &tape->projection : &local);
        if (uses_user_level(v)) put_block(x, 5 * d, proj.user);
        put_block(x, 5 * d + p, proj.target);
        fusion::FusionResult fused;
        if (uses_item_fusion(v)) {
            fusion::FusionConfig fc = m.cfg.fusion;
            fc.train_mode = train_mode;
            Rng unused(0);
            if (train_mode && !mask_rng) throw ConfigError("mask_rng", "training-mode fusion needs an rng");
            fused = fusion::fuse_relevant_items(proj.target, proj.history, freq, fc, mask_rng ? *mask_rng : unused);
            put_block(x, 5 * d + 2 * p, fused.e_item);
        }
        if (tape) {
            tape->fusion = std::move(fused);
            tape->semantic = true;
        }
    }
    const Vector out = mlp_stack_forward(m.head, x, tape ? &tape->head : nullptr);
    if (tape) tape->x = std::move(x);
    return out[0];
}

void backward_logit(const CtrModel& m, const FeatureContext& ctx, const synth::InteractionRow& row,
                    const RowTape& tape, double dlogit, CtrGrads& g, SemanticLookup& lookup) {
    (void)ctx;
    const std::size_t d = m.cfg.d_id, p = m.d_proj();
    const Vector up = {dlogit};
    const Vector dx = mlp_stack_backward(m.head, tape.head, up, g.head);
    const std::span<const double> dxs(dx);
    axpy(1.0, dxs.subspan(0, d), g.user_emb.row(id_row(row.user_id, m.user_emb.rows())));
    axpy(1.0, dxs.subspan(d, d), g.item_emb.row(id_row(row.target_item_id, m.item_emb.rows())));
    if (!row.history.empty()) {
        const double s = 1.0 / static_cast<double>(row.history.size());
        for (auto h : row.history) axpy(s, dxs.subspan(2 * d, d), g.item_emb.row(id_row(h, m.item_emb.rows())));
    }
    axpy(1.0, dxs.subspan(3 * d, d), g.hour_emb.row(row.hour_bucket < synth::kHourBuckets ? row.hour_bucket + 1 : 0));
    axpy(1.0, dxs.subspan(4 * d, d), g.device_emb.row(row.device < synth::kDevices ? row.device + 1 : 0));

    const Variant v = m.cfg.variant;
    if (!uses_semantics(v) || !tape.semantic) return;
    const Vector d_user = uses_user_level(v) ? Vector(dxs.begin() + 5 * d, dxs.begin() + 5 * d + p) : Vector(p, 0.0);
    const Vector d_target(dxs.begin() + 5 * d + p, dxs.begin() + 5 * d + 2 * p);
    std::vector<Vector> d_hist;
    if (uses_item_fusion(v))
        d_hist = fusion::fusion_backward(tape.fusion, row.history.size(), dxs.subspan(5 * d + 2 * p, p));
    const auto in = fusion::project_backward(m.adaptors, tape.projection, d_user, d_target, d_hist, g.adaptors);
    if (!m.lora) return;
    if (uses_user_level(v)) lookup.add_user_grad(row.user_id, in.user);
    lookup.add_item_grad(row.target_item_id, in.target);
    for (std::size_t i = 0; i < d_hist.size(); ++i)
        if (!in.history[i].empty()) lookup.add_item_grad(row.history[i], in.history[i]);
}

std::vector<double> predict(const CtrModel& m, const FeatureContext& ctx,
                            std::span<const synth::InteractionRow> rows, std::size_t threads) {
    std::vector<double> out(rows.size());
    auto run = [&](std::size_t lo, std::size_t hi) {
        SemanticLookup lookup(m, ctx);
        for (std::size_t i = lo; i < hi; ++i)
            out[i] = sigmoid(forward_logit(m, ctx, rows[i], false, nullptr, lookup));
    };
    threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(rows.size(), 1));
    if (threads == 1) {
        run(0, rows.size());
        return out;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    const std::size_t chunk = (rows.size() + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            try {
                run(std::min(rows.size(), t * chunk), std::min(rows.size(), (t + 1) * chunk));
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

void save_ctr(const CtrModel& m, const std::filesystem::path& p) {
    std::string out(kMagic);
    io::put_u32(out, kVersion);
    const auto& c = m.cfg;
    io::put_u32(out, static_cast<std::uint32_t>(c.variant));
    io::put_u32(out, static_cast<std::uint32_t>(c.d_id));
    io::put_u32(out, static_cast<std::uint32_t>(c.adaptor.d_proj));
    io::put_u32(out, static_cast<std::uint32_t>(c.adaptor.hidden.size()));
    for (auto h : c.adaptor.hidden) io::put_u32(out, static_cast<std::uint32_t>(h));
    io::put_u32(out, static_cast<std::uint32_t>(c.head_hidden.size()));
    for (auto h : c.head_hidden) io::put_u32(out, static_cast<std::uint32_t>(h));
    io::put_u32(out, static_cast<std::uint32_t>(c.fusion.k_top));
    io::put_u32(out, static_cast<std::uint32_t>(c.lora_rank));
    io::put_u32(out, m.lora ? 1u : 0u);
    io::put_f64(out, c.fusion.p_max);
    io::put_f64(out, c.lora_alpha);
    io::put_u32(out, static_cast<std::uint32_t>(m.user_emb.rows()));
    io::put_u32(out, static_cast<std::uint32_t>(m.item_emb.rows()));
    io::put_u32(out, static_cast<std::uint32_t>(m.adaptors.d_sem()));
    for (auto block : all_values(const_cast<CtrModel&>(m))) io::put_f32s(out, block);
    io::write_file(p, out);
}

CtrModel load_ctr(const std::filesystem::path& p, const distill::StudentModel* student) {
    const std::string data = io::read_file(p);
    io::BinaryReader r(data);
    r.expect(kMagic, "CTR checkpoint: " + p.string());
    if (const auto version = r.u32(); version != kVersion)
        throw ParseError(4, p.string() + ": unsupported checkpoint version " + std::to_string(version));
    CtrConfig c;
    const auto variant = r.u32();
    if (variant > static_cast<std::uint32_t>(Variant::IdOnly)) throw ParseError(8, "unknown variant code");
    c.variant = static_cast<Variant>(variant);
    c.d_id = r.u32();
    c.adaptor.d_proj = r.u32();
    c.adaptor.hidden.resize(r.u32());
    for (auto& h : c.adaptor.hidden) h = r.u32();
    c.head_hidden.resize(r.u32());
    for (auto& h : c.head_hidden) h = r.u32();
    c.fusion.k_top = r.u32();
    c.lora_rank = r.u32();
    const bool has_lora = r.u32() != 0;
    c.fusion.p_max = r.f64();
    c.lora_alpha = r.f64();
    const std::size_t user_rows = r.u32(), item_rows = r.u32(), d_sem = r.u32();
    if (user_rows == 0 || item_rows == 0) throw ParseError(r.pos(), "empty id tables");
    if (has_lora && !student) throw ConfigError("student", "this CTR checkpoint needs its student model");
    Rng rng(0);
    CtrModel m = CtrModel::init(c, user_rows - 1, item_rows - 1, uses_semantics(c.variant) ? d_sem : 0,
                                has_lora ? student : nullptr, rng);
    if (has_lora != m.lora.has_value()) throw ParseError(r.pos(), "LoRA flag does not match the variant");
    if (m.adaptors.d_sem() != d_sem) throw ParseError(r.pos(), "semantic dimension mismatch");
    std::size_t floats = 0;
    for (auto block : all_values(m)) floats += block.size();
    if (r.remaining() != 4 * floats) throw ParseError(r.pos(), p.string() + ": parameter data has the wrong size");
    for (auto block : all_values(m)) r.f32s(block);
    return m;
}

}  // namespace msd::ctr
