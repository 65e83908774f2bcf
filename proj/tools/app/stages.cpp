// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#include "stages.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <memory>
#include <set>

#include "msd/ctr/metrics.hpp"
#include "msd/ctr/model.hpp"
#include "msd/ctr/train.hpp"
#include "msd/distill/f1.hpp"
#include "msd/distill/student.hpp"
#include "msd/distill/train.hpp"
#include "msd/distill/vocab.hpp"
#include "msd/error.hpp"
#include "msd/io/text.hpp"
#include "msd/knowledge/prompt.hpp"
#include "msd/knowledge/record.hpp"
#include "msd/knowledge/sampling.hpp"
#include "msd/knowledge/teacher.hpp"
#include "msd/serving/serving.hpp"
#include "msd/synth/corpus.hpp"
#include "stats.hpp"

namespace msd::app {

namespace fs = std::filesystem;
using io::format_double;

namespace {

bool g_logging = true;

// Per-stage random streams, all derived from the run seed.
enum Stream : std::uint64_t { kGen = 1, kSampling = 2, kStudent = 3, kTrace = 8 };
constexpr std::uint64_t kCtrInitStream = 0xC1;

const std::vector<ctr::Variant> kVariants = {ctr::Variant::Full, ctr::Variant::NoLora,
                                             ctr::Variant::NoItemFusion, ctr::Variant::NoUserLevel,
                                             ctr::Variant::IdOnly};

constexpr const char* kPromptsHeader = "#msd-prompts\tv1";
constexpr const char* kEventsHeader = "#msd-events\tv1";

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '\\') out += "\\\\";
        else if (c == '\t') out += "\\t";
        else if (c == '\n') out += "\\n";
        else out += c;
    }
    return out;
}

std::string unescape(std::string_view s, std::size_t line) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '\\') {
            out += s[i];
            continue;
        }
        if (++i == s.size()) throw ParseError(i, "line " + std::to_string(line) + ": dangling escape");
        if (s[i] == '\\') out += '\\';
        else if (s[i] == 't') out += '\t';
        else if (s[i] == 'n') out += '\n';
        else throw ParseError(i, "line " + std::to_string(line) + ": unknown escape");
    }
    return out;
}

struct PromptLine {
    std::uint64_t subject_id = 0;
    knowledge::Level level = knowledge::Level::Item;
    std::string prompt;
};

void write_prompts(const fs::path& p, const std::vector<knowledge::DistillSample>& samples) {
    std::string out = std::string(kPromptsHeader) + "\n";
    for (const auto& s : samples)
        out += std::to_string(s.record.subject_id) + "\t" + std::string(knowledge::level_name(s.record.level)) +
               "\t" + escape(s.prompt) + "\n";
    io::write_file(p, out);
}

std::vector<PromptLine> read_prompts(const fs::path& p) {
    std::vector<PromptLine> out;
    std::size_t n = 1;
    for (const auto& line : io::read_lines_with_header(p, kPromptsHeader)) {
        ++n;
        const auto f = io::split(line, '\t');
        if (f.size() != 3) throw ParseError(0, p.string() + " line " + std::to_string(n) + ": expected 3 fields");
        out.push_back({io::parse_u64(f[0], "subject_id"), knowledge::parse_level(f[1]), unescape(f[2], n)});
    }
    return out;
}

void require(const fs::path& p) {
    if (!fs::exists(p)) throw ConfigError("--out", "missing input " + p.string());
}

std::string seconds_since(std::chrono::steady_clock::time_point t0) {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", s);
    return buf;
}

// Everything the CTR stages read from disk.
struct CtrInputs {
    synth::Corpus corpus;
    distill::Vocab vocab;
    distill::StudentModel student;
    ctr::RowSplits splits;
    std::unique_ptr<ctr::FeatureContext> semantic;
    std::unique_ptr<ctr::FeatureContext> ids_only;

    const ctr::FeatureContext& context(ctr::Variant v) const {
        return ctr::uses_semantics(v) ? *semantic : *ids_only;
    }
};

std::unique_ptr<CtrInputs> load_ctr_inputs(const fs::path& out, const fs::path& student_file) {
    require(out / "corpus");
    require(student_file);
    auto in = std::make_unique<CtrInputs>();
    in->corpus = synth::read_corpus(out / "corpus");
    in->vocab = distill::Vocab::load(out / "student" / "vocab.txt");
    in->student = distill::load_student(student_file);
    in->splits = ctr::split_rows(in->corpus.rows);
    in->semantic = std::make_unique<ctr::FeatureContext>(in->corpus, &in->student, &in->vocab);
    in->ids_only = std::make_unique<ctr::FeatureContext>(in->corpus, nullptr, nullptr);
    return in;
}

struct TrainedCtr {
    ctr::CtrModel model;
    ctr::CtrRun run;
};

TrainedCtr train_variant(const RunConfig& cfg, const CtrInputs& in, ctr::Variant v, std::uint64_t run_seed) {
    const auto& ctx = in.context(v);
    Rng init = Rng(run_seed).split(kCtrInitStream);
    auto model = ctr::CtrModel::init(cfg.model(v), ctx.n_users(), ctx.n_items(), ctx.d_sem(), &in.student, init);
    auto run = ctr::train_ctr(model, ctx, in.splits.train, in.splits.valid, cfg.ctr_train(run_seed));
    return {std::move(model), std::move(run)};
}

std::string curve_tsv(const ctr::CtrRun& run) {
    std::string out = "epoch\tsteps\ttrain_loss\tval_logloss\tval_auc\tbest\n";
    for (const auto& p : run.curve)
        out += std::to_string(p.epoch) + "\t" + std::to_string(p.steps) + "\t" + format_double(p.train_loss) + "\t" +
               format_double(p.val_logloss) + "\t" + format_double(p.val_auc) + "\t" +
               (p.epoch == run.best_epoch ? "1" : "0") + "\n";
    return out;
}

std::vector<distill::HeldOutExample> heldout_examples(const fs::path& out, const distill::Vocab& vocab) {
    const auto prompts = read_prompts(out / "knowledge" / "prompts_heldout.tsv");
    const auto records = knowledge::read_distillation_set(out / "knowledge" / "distill_heldout.tsv");
    if (prompts.size() != records.size())
        throw ParseError(0, "held-out prompts and records differ in length");
    std::vector<distill::HeldOutExample> ex;
    for (std::size_t i = 0; i < prompts.size(); ++i) ex.push_back({vocab.encode(prompts[i].prompt), records[i]});
    return ex;
}

std::vector<std::pair<std::size_t, fs::path>> checkpoints(const fs::path& dir) {
    std::vector<std::pair<std::size_t, fs::path>> out;
    if (!fs::exists(dir)) return out;
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string name = e.path().filename().string();
        if (name.rfind("ckpt_", 0) == 0 && e.path().extension() == ".bin")
            out.emplace_back(io::parse_u64(name.substr(5, name.size() - 9), "checkpoint step"), e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::string step_name(std::size_t step) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "ckpt_%06zu.bin", step);
    return buf;
}

}  // namespace

void set_logging(bool enabled) { g_logging = enabled; }

void log(const std::string& stage, const std::vector<std::pair<std::string, std::string>>& kv) {
    if (!g_logging) return;
    std::string line = "stage=" + stage;
    for (const auto& [k, v] : kv) line += " " + k + "=" + v;
    std::fprintf(stderr, "%s\n", line.c_str());
}

std::map<std::string, std::string> read_key_values(const fs::path& p) {
    std::map<std::string, std::string> out;
    for (const auto& line : io::split(io::read_file(p), '\n')) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError(0, p.string() + ": expected key=value, got '" + line + "'");
        out[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return out;
}

CorrelationResult correlate(std::vector<CorrelationPoint> points) {
    std::stable_sort(points.begin(), points.end(), [](const CorrelationPoint& a, const CorrelationPoint& b) {
        return a.f1 != b.f1 ? a.f1 < b.f1 : a.step < b.step;
    });
    std::vector<double> f1, auc;
    for (const auto& p : points) {
        f1.push_back(p.f1);
        auc.push_back(p.auc);
    }
    return {std::move(points), spearman(f1, auc)};
}

std::string correlation_tsv(const CorrelationResult& r) {
    std::string out = "step\tf1\tauc\n";
    for (const auto& p : r.points)
        out += std::to_string(p.step) + "\t" + format_double(p.f1) + "\t" + format_double(p.auc) + "\n";
    return out;
}

std::string correlation_summary(const CorrelationResult& r) {
    return "checkpoints=" + std::to_string(r.points.size()) +
           "\nspearman=" + (r.rho ? format_double(*r.rho) : std::string("undefined")) + "\n";
}

void write_events(const fs::path& p, const std::vector<serving::ServeEvent>& events) {
    std::string out = std::string(kEventsHeader) + "\n";
    for (const auto& e : events)
        out += std::to_string(e.id) + "\t" + std::string(serving::source_name(e.source)) + "\t" +
               (e.evicted ? std::to_string(*e.evicted) : std::string()) + "\n";
    io::write_file(p, out);
}

std::vector<serving::ServeEvent> read_events(const fs::path& p) {
    std::vector<serving::ServeEvent> out;
    for (const auto& line : io::read_lines_with_header(p, kEventsHeader)) {
        const auto f = io::split(line, '\t');
        if (f.size() != 3) throw ParseError(0, p.string() + ": expected 3 fields in '" + line + "'");
        serving::ServeEvent e;
        e.id = static_cast<synth::ItemId>(io::parse_u64(f[0], "item_id"));
        if (f[1] == "hot") e.source = serving::Source::Hot;
        else if (f[1] == "lru") e.source = serving::Source::Lru;
        else if (f[1] == "computed") e.source = serving::Source::Computed;
        else throw ParseError(0, p.string() + ": unknown source '" + f[1] + "'");
        if (!f[2].empty()) e.evicted = static_cast<synth::ItemId>(io::parse_u64(f[2], "evicted"));
        out.push_back(e);
    }
    return out;
}

Pipeline::Pipeline(RunConfig cfg, fs::path out) : cfg_(std::move(cfg)), out_(std::move(out)), manifest_(out_) {
    cfg_.validate();
    fs::create_directories(out_);
    io::write_file(out_ / "config.json", to_json(cfg_).dump(2) + "\n");
}

void Pipeline::run_stage(const StageSpec& spec, const std::function<void()>& body) {
    if (done_[spec.name]) return;
    std::vector<std::string> inputs;
    for (const auto& dir : spec.input_dirs)
        for (auto& f : list_files(out_, dir)) inputs.push_back(std::move(f));
    const std::string hash = io::hex64(io::fnv1a(section_text(cfg_, spec.sections)));
    if (manifest_.up_to_date(spec.name, hash, inputs)) {
        log(spec.name, {{"status", "skipped"}});
        ++skipped_;
    } else {
        log(spec.name, {{"status", "start"}});
        const auto t0 = std::chrono::steady_clock::now();
        for (const auto& dir : spec.output_dirs) fs::remove_all(out_ / dir);
        for (const auto& dir : spec.output_dirs) fs::create_directories(out_ / dir);
        body();
        manifest_.record(spec.name, hash, inputs, spec.output_dirs);
        log(spec.name, {{"status", "done"}, {"seconds", seconds_since(t0)}});
        ++executed_;
    }
    done_[spec.name] = true;
}

void Pipeline::gen() {
    run_stage({"gen", {"seed", "synth"}, {}, {"corpus"}}, [&] {
        Rng rng = Rng(cfg_.seed).split(kGen);
        const auto corpus = synth::generate_corpus(cfg_.synth, rng);
        synth::write_corpus(corpus, out_ / "corpus");
        std::size_t clicks = 0;
        for (const auto& r : corpus.rows) clicks += r.label;
        log("gen", {{"items", std::to_string(corpus.catalog.size())},
                    {"users", std::to_string(corpus.users.size())},
                    {"rows", std::to_string(corpus.rows.size())},
                    {"clicks", std::to_string(clicks)}});
    });
}

void Pipeline::knowledge() {
    gen();
    run_stage({"knowledge", {"seed", "knowledge"}, {"corpus"}, {"knowledge"}}, [&] {
        const auto& k = cfg_.knowledge;
        const auto corpus = synth::read_corpus(out_ / "corpus");
        const auto exposure = synth::exposure_table(corpus.catalog);

        std::unique_ptr<knowledge::Teacher> teacher;
        if (k.teacher == "http") {
            teacher = knowledge::HttpTeacher::from_env();
            if (!teacher) throw ConfigError("knowledge.teacher", "\"http\" needs MSD_TEACHER_URL to be set");
        } else {
            teacher = std::make_unique<knowledge::MockTeacher>(corpus.vocab);
        }

        std::vector<synth::UserId> train_users, test_users;
        for (const auto& u : corpus.users) {
            const auto split = synth::split_of(u.id);
            if (split == synth::Split::Train) train_users.push_back(u.id);
            if (split == synth::Split::Test) test_users.push_back(u.id);
        }
        Rng rng = Rng(cfg_.seed).split(kSampling);
        const auto items = knowledge::sample_distillation_set(corpus.catalog, exposure,
                                                              {k.n_items, k.per_category_min}, rng);
        const auto users = knowledge::sample_distillation_users(corpus, train_users,
                                                                {k.n_users, k.per_category_min}, rng);

        // Held out: the first items by id that were not sampled, and test-split users.
        const std::set<synth::ItemId> sampled(items.begin(), items.end());
        std::vector<synth::ItemId> ho_items;
        for (const auto& it : corpus.catalog.items)
            if (!sampled.count(it.id) && ho_items.size() < k.heldout_items) ho_items.push_back(it.id);
        std::vector<synth::UserId> ho_users(
            test_users.begin(), test_users.begin() + std::min(k.heldout_users, test_users.size()));

        const auto item_pool = knowledge::item_reference_pool(corpus, k.reference_per_category);
        const auto user_pool = knowledge::user_reference_pool(corpus, train_users, k.reference_per_category);
        const knowledge::KnowledgeTemplates templates{knowledge::PromptTemplate::item_default(k.item_token_budget),
                                                      knowledge::PromptTemplate::user_default(k.user_token_budget)};

        auto save = [&](const std::vector<knowledge::DistillSample>& samples, const std::string& name) {
            std::vector<knowledge::SemanticRecord> records;
            std::size_t degenerate = 0;
            for (const auto& s : samples) {
                records.push_back(s.record);
                degenerate += s.record.degenerate();
            }
            knowledge::write_distillation_set(out_ / "knowledge" / ("distill_" + name + ".tsv"), records);
            write_prompts(out_ / "knowledge" / ("prompts_" + name + ".tsv"), samples);
            log("knowledge", {{"set", name}, {"records", std::to_string(records.size())},
                              {"degenerate", std::to_string(degenerate)}});
        };
        save(knowledge::build_distillation_set(corpus, items, users, *teacher, templates, item_pool, user_pool,
                                               k.threads),
             "train");
        save(knowledge::build_distillation_set(corpus, ho_items, ho_users, *teacher, templates, item_pool,
                                               user_pool, k.threads),
             "heldout");
    });
}

void Pipeline::distill() {
    knowledge();
    run_stage({"distill", {"seed", "distill"}, {"corpus", "knowledge"}, {"student"}}, [&] {
        const fs::path kdir = out_ / "knowledge";
        const auto corpus = synth::read_corpus(out_ / "corpus");
        const auto train_prompts = read_prompts(kdir / "prompts_train.tsv");
        const auto train_records = knowledge::read_distillation_set(kdir / "distill_train.tsv");
        if (train_prompts.size() != train_records.size())
            throw ParseError(0, "training prompts and records differ in length");

        // Vocabulary: everything the student reads or writes, plus every
        // item title so that CTR-time texts have no unknown words.
        std::vector<std::string> texts;
        for (std::size_t i = 0; i < train_prompts.size(); ++i) {
            texts.push_back(train_prompts[i].prompt);
            texts.push_back(knowledge::serialize(train_records[i]));
        }
        for (const auto& it : corpus.catalog.items) texts.push_back(it.text);
        const auto vocab = distill::Vocab::build(texts);
        vocab.save(out_ / "student" / "vocab.txt");

        std::vector<distill::DistillExample> train;
        for (std::size_t i = 0; i < train_prompts.size(); ++i)
            train.push_back(distill::make_example(vocab, train_prompts[i].prompt, train_records[i]));
        const auto heldout = heldout_examples(out_, vocab);
        const auto ho_prompts = read_prompts(kdir / "prompts_heldout.tsv");
        std::vector<distill::DistillExample> val;
        for (std::size_t i = 0; i < heldout.size(); ++i)
            val.push_back(distill::make_example(vocab, ho_prompts[i].prompt, heldout[i].truth));

        const auto tcfg = cfg_.student_train();
        Rng rng = Rng(cfg_.seed).split(kStudent);
        auto run = distill::train_student(
            vocab.size(), train, val, tcfg, rng, [&](std::size_t step, const distill::StudentModel& m) {
                distill::save_student(m, out_ / "student" / step_name(step));
            });
        for (const auto& p : run.curve)
            log("distill", {{"step", std::to_string(p.step)}, {"train_nll", format_double(p.train_loss)},
                            {"val_nll", format_double(p.val_loss)}});
        io::write_file(out_ / "student" / "loss_curve.tsv", distill::format_loss_curve(run.curve));
        distill::save_student(run.model, out_ / "student" / "student.bin");

        // Scores use the stored (float32) student, as every later stage does.
        const auto stored = distill::load_student(out_ / "student" / "student.bin");
        const auto f1 = distill::evaluate_phrase_f1(stored, vocab, heldout, cfg_.distill.max_decode,
                                                    cfg_.distill.cosine_threshold, cfg_.distill.threads);
        const double first = run.curve.front().val_loss, last = run.curve.back().val_loss;
        std::string report = "vocab_size=" + std::to_string(vocab.size()) +
                             "\ntrain_examples=" + std::to_string(train.size()) +
                             "\nheldout_examples=" + std::to_string(heldout.size()) +
                             "\nval_nll_step0=" + format_double(first) + "\nval_nll_final=" + format_double(last) +
                             "\nval_nll_drop_pct=" + format_double(100.0 * (first - last) / first) +
                             "\nprecision=" + format_double(f1.precision) + "\nrecall=" + format_double(f1.recall) +
                             "\nf1=" + format_double(f1.f1) + "\nevaluated=" + std::to_string(f1.evaluated) +
                             "\nskipped=" + std::to_string(f1.skipped) + "\n";
        io::write_file(out_ / "student" / "f1.txt", report);
        log("distill", {{"val_nll_step0", format_double(first)}, {"val_nll_final", format_double(last)},
                        {"f1", format_double(f1.f1)}});
    });
}

void Pipeline::train() {
    distill();
    run_stage({"train", {"seed", "ctr"}, {"corpus", "student"}, {"ctr"}}, [&] {
        const auto in = load_ctr_inputs(out_, out_ / "student" / "student.bin");
        for (auto v : {ctr::Variant::Full, ctr::Variant::IdOnly}) {
            const std::string name(ctr::variant_name(v));
            const auto t0 = std::chrono::steady_clock::now();
            const auto trained = train_variant(cfg_, *in, v, cfg_.seed);
            fs::create_directories(out_ / "ctr" / name);
            ctr::save_ctr(trained.model, out_ / "ctr" / name / "model.bin");
            io::write_file(out_ / "ctr" / name / "curve.tsv", curve_tsv(trained.run));
            for (const auto& p : trained.run.curve)
                log("train", {{"variant", name}, {"epoch", std::to_string(p.epoch)},
                              {"train_loss", format_double(p.train_loss)}, {"val_auc", format_double(p.val_auc)}});
            log("train", {{"variant", name}, {"best_epoch", std::to_string(trained.run.best_epoch)},
                          {"seconds", seconds_since(t0)}});
        }
    });
}

void Pipeline::eval() {
    train();
    run_stage({"eval", {"seed", "ctr"}, {"corpus", "student", "ctr"}, {"eval"}}, [&] {
        const auto in = load_ctr_inputs(out_, out_ / "student" / "student.bin");
        const auto base = ctr::load_ctr(out_ / "ctr" / "id_only" / "model.bin", nullptr);
        const auto full = ctr::load_ctr(out_ / "ctr" / "full" / "model.bin", &in->student);
        const auto t = cfg_.ctr.threads;
        const auto base_report = ctr::evaluate(base, *in->ids_only, in->splits.test, cfg_.seed, {}, 0.0, t);
        const auto full_report =
            ctr::evaluate(full, *in->semantic, in->splits.test, cfg_.seed, "id_only", base_report.auc, t);
        io::write_file(out_ / "eval" / "eval.txt", full_report.to_key_value() + "\n" + base_report.to_key_value());
        io::write_file(out_ / "eval" / "eval.tsv",
                       ctr::EvalReport::tsv_header() + full_report.to_tsv_row() + base_report.to_tsv_row());
        log("eval", {{"auc_full", format_double(full_report.auc)}, {"auc_id_only", format_double(base_report.auc)},
                     {"relaimpr_pct", full_report.relaimpr ? format_double(*full_report.relaimpr) : "undefined"}});
    });
}

void Pipeline::ablate() {
    distill();
    run_stage({"ablate", {"seed", "ctr"}, {"corpus", "student"}, {"ablation"}}, [&] {
        const auto in = load_ctr_inputs(out_, out_ / "student" / "student.bin");
        std::map<ctr::Variant, std::vector<ctr::EvalReport>> reports;
        std::string runs = ctr::EvalReport::tsv_header();
        for (std::size_t k = 0; k < cfg_.ctr.n_seeds; ++k) {
            const std::uint64_t run_seed = cfg_.seed + k;
            for (auto v : kVariants) {
                const auto t0 = std::chrono::steady_clock::now();
                const auto trained = train_variant(cfg_, *in, v, run_seed);
                auto report = ctr::evaluate(trained.model, in->context(v), in->splits.test, run_seed, {}, 0.0,
                                            cfg_.ctr.threads);
                report.variant = std::string(ctr::variant_name(v));
                runs += report.to_tsv_row();
                log("ablate", {{"variant", report.variant}, {"seed", std::to_string(run_seed)},
                               {"auc", format_double(report.auc)}, {"seconds", seconds_since(t0)}});
                reports[v].push_back(std::move(report));
            }
        }
        io::write_file(out_ / "ablation" / "runs.tsv", runs);

        std::map<ctr::Variant, double> auc_mean;
        std::string table = "variant\tn_seeds\tauc_mean\tauc_stdev\tlogloss_mean\trelaimpr_vs_id_only_pct\n";
        for (auto v : kVariants) {
            std::vector<double> aucs;
            for (const auto& r : reports[v]) aucs.push_back(r.auc);
            auc_mean[v] = mean(aucs);
        }
        const double base = auc_mean[ctr::Variant::IdOnly];
        std::string summary;
        for (auto v : kVariants) {
            std::vector<double> aucs, losses;
            for (const auto& r : reports[v]) {
                aucs.push_back(r.auc);
                losses.push_back(r.logloss);
            }
            const std::string name(ctr::variant_name(v));
            const std::string rel = base > 0.5 ? format_double(ctr::relaimpr(auc_mean[v], base)) : "undefined";
            table += name + "\t" + std::to_string(aucs.size()) + "\t" + format_double(auc_mean[v]) + "\t" +
                     format_double(stdev(aucs)) + "\t" + format_double(mean(losses)) + "\t" + rel + "\n";
            summary += "auc_mean." + name + "=" + format_double(auc_mean[v]) + "\n";
            summary += "auc_stdev." + name + "=" + format_double(stdev(aucs)) + "\n";
        }
        const double full = auc_mean[ctr::Variant::Full];
        bool dominates = true;
        for (auto v : {ctr::Variant::NoLora, ctr::Variant::NoItemFusion, ctr::Variant::NoUserLevel})
            dominates = dominates && full >= auc_mean[v];
        summary += "n_seeds=" + std::to_string(cfg_.ctr.n_seeds) + "\n";
        summary += "full_minus_id_only=" + format_double(full - base) + "\n";
        summary += std::string("full_ge_ablations=") + (dominates ? "1" : "0") + "\n";
        io::write_file(out_ / "ablation" / "ablation.tsv", table);
        io::write_file(out_ / "ablation" / "ablation.txt", summary);
        log("ablate", {{"full_minus_id_only", format_double(full - base)},
                       {"full_ge_ablations", dominates ? "1" : "0"}});
    });
}

void Pipeline::correlation() {
    distill();
    run_stage({"correlation", {"seed", "ctr", "distill"}, {"corpus", "knowledge", "student"}, {"correlation"}}, [&] {
        const auto ckpts = checkpoints(out_ / "student");
        if (ckpts.size() < 2)
            throw ConfigError("distill.ckpt_every",
                              "correlation needs at least 2 checkpoints, found " + std::to_string(ckpts.size()));
        const auto vocab = distill::Vocab::load(out_ / "student" / "vocab.txt");
        const auto heldout = heldout_examples(out_, vocab);
        std::vector<CorrelationPoint> points;
        for (const auto& [step, path] : ckpts) {
            const auto t0 = std::chrono::steady_clock::now();
            const auto in = load_ctr_inputs(out_, path);
            const auto f1 = distill::evaluate_phrase_f1(in->student, in->vocab, heldout, cfg_.distill.max_decode,
                                                        cfg_.distill.cosine_threshold, cfg_.distill.threads);
            const auto trained = train_variant(cfg_, *in, ctr::Variant::Full, cfg_.seed);
            const auto report = ctr::evaluate(trained.model, *in->semantic, in->splits.test, cfg_.seed, {}, 0.0,
                                              cfg_.ctr.threads);
            points.push_back({step, f1.f1, report.auc});
            log("correlation", {{"step", std::to_string(step)}, {"f1", format_double(f1.f1)},
                                {"auc", format_double(report.auc)}, {"seconds", seconds_since(t0)}});
        }
        const auto result = correlate(std::move(points));
        io::write_file(out_ / "correlation" / "correlation.tsv", correlation_tsv(result));
        io::write_file(out_ / "correlation" / "correlation.txt", correlation_summary(result));
        log("correlation", {{"spearman", result.rho ? format_double(*result.rho) : "undefined"}});
    });
}

void Pipeline::serve_replay() {
    train();
    run_stage({"serve", {"seed", "serving"}, {"corpus", "student", "ctr/full"}, {"serving"}}, [&] {
        const auto& s = cfg_.serving;
        const auto latency = cfg_.latency();
        const auto in = load_ctr_inputs(out_, out_ / "student" / "student.bin");
        const auto model = ctr::load_ctr(out_ / "ctr" / "full" / "model.bin", &in->student);
        const auto embed = serving::make_item_embedder(model, *in->semantic);
        const auto exposure = synth::exposure_table(in->corpus.catalog);
        const std::size_t n_items = in->corpus.catalog.size();

        const std::size_t hot_n = s.hot_share > 0.0 ? serving::hot_size_for_share(exposure, s.hot_share) : s.hot_n;
        const auto hot = serving::HotStore::build(exposure, hot_n, embed);
        if (!hot.warning().empty()) log("serve", {{"warning", "\"" + hot.warning() + "\""}});
        hot.save(out_ / "serving" / "hot_store.bin");

        Rng rng = Rng(cfg_.seed).split(kTrace);
        const auto trace = serving::exposure_trace(exposure, s.trace_length, rng);
        serving::write_trace(out_ / "serving" / "trace.txt", trace);

        serving::LruTier lru(s.lru_capacity, embed);
        const serving::EmbeddingService service(hot, lru, n_items);
        std::vector<serving::ServeEvent> events;
        const auto report = serving::replay(service, trace, latency, n_items, &events);
        write_events(out_ / "serving" / "events.tsv", events);

        // Tier agreement: the stored hot embeddings, an LRU miss, an LRU hit
        // and a direct computation must give the same bytes.
        bool identical = true;
        serving::LruTier check(std::max<std::size_t>(1, n_items), embed);
        auto same = [](const serving::EmbeddingVec& a, const serving::EmbeddingVec& b) {
            return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
        };
        for (synth::ItemId id = 1; id <= n_items; ++id) {
            const auto direct = embed(id);
            const auto miss = check.get(id);
            const auto hit = check.get(id);
            identical = identical && same(direct, miss.value) && same(direct, hit.value) && hit.hit;
            if (const auto* h = hot.find(id)) identical = identical && same(*h, direct);
        }

        std::uint64_t hot_exposure = 0;
        for (auto id : hot.ids()) hot_exposure += exposure.frequency(id);
        const double ratio = report.mean_latency_us / report.all_hot_mean_us;
        const double always = report.compute_always_mean_us / report.all_hot_mean_us;
        std::string text = report.to_key_value();
        text += "hot_n=" + std::to_string(hot.size()) + "\n";
        text += "hot_exposure_share=" +
                format_double(static_cast<double>(hot_exposure) / static_cast<double>(exposure.total)) + "\n";
        text += "lru_capacity=" + std::to_string(s.lru_capacity) + "\n";
        text += "cached_over_all_hot=" + format_double(ratio) + "\n";
        text += "compute_always_over_all_hot=" + format_double(always) + "\n";
        text += std::string("tiers_identical=") + (identical ? "1" : "0") + "\n";
        io::write_file(out_ / "serving" / "serving.txt", text);
        log("serve", {{"hot_n", std::to_string(hot.size())}, {"miss_rate", format_double(report.miss_rate())},
                      {"cached_over_all_hot", format_double(ratio)},
                      {"compute_always_over_all_hot", format_double(always)},
                      {"tiers_identical", identical ? "1" : "0"}});
    });
}

void Pipeline::run_all() {
    gen();
    knowledge();
    distill();
    train();
    eval();
    ablate();
    correlation();
    serve_replay();
}

}  // namespace msd::app
