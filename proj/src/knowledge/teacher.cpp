// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#include "msd/knowledge/teacher.hpp"

#include <atomic>
#include <exception>
#include <map>
#include <sstream>
#include <thread>

#include "msd/error.hpp"
#include "msd/io/text.hpp"
#include "msd/knowledge/sampling.hpp"

namespace msd::knowledge {

namespace {

std::vector<std::string> words_of(const std::string& text) {
    std::istringstream in(text);
    std::vector<std::string> out;
    for (std::string w; in >> w;) out.push_back(w);
    return out;
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

bool rule_has(const synth::AttributeVocab& vocab, const std::string& key, const std::string& tag) {
    const auto it = vocab.implicit_rules.find(key);
    if (it == vocab.implicit_rules.end()) return false;
    return std::find(it->second.begin(), it->second.end(), tag) != it->second.end();
}

}  // namespace

SemanticRecord mock_item_record(const synth::AttributeVocab& vocab, const std::string& item_text) {
    const auto words = words_of(item_text);
    SemanticRecord rec;
    rec.level = Level::Item;
    if (words.empty()) return rec;
    for (const auto& t : vocab.explicit_tags)
        if (std::find(words.begin(), words.end(), t) != words.end()) rec.explicit_phrases.push_back(t);
    const std::string& brand = words.front();
    const std::string& category = words.back();
    rec.implicit_phrases = vocab.implied_tags(brand, category);
    for (const auto& tag : rec.implicit_phrases) {
        const std::string& source = rule_has(vocab, brand, tag) ? brand : category;
        if (!rec.rationale.empty()) rec.rationale += ' ';
        rec.rationale += source + " implies " + tag + ".";
    }
    return rec;
}

SemanticRecord mock_user_record(const synth::AttributeVocab& vocab, const std::string& user_text) {
    std::map<std::string, std::size_t> explicit_count, implicit_count;
    std::size_t pos = 0;
    while (pos <= user_text.size()) {
        auto end = user_text.find(", ", pos);
        if (end == std::string::npos) end = user_text.size();
        const auto title = mock_item_record(vocab, user_text.substr(pos, end - pos));
        for (const auto& t : title.explicit_phrases) ++explicit_count[t];
        for (const auto& t : title.implicit_phrases) ++implicit_count[t];
        pos = end + 2;
    }
    SemanticRecord rec;
    rec.level = Level::User;
    for (const auto& t : vocab.explicit_tags)
        if (explicit_count[t] >= 2) rec.explicit_phrases.push_back(t);
    for (const auto& t : vocab.implicit_tags) {
        if (implicit_count[t] < 2) continue;
        rec.implicit_phrases.push_back(t);
        if (!rec.rationale.empty()) rec.rationale += ' ';
        rec.rationale += "history implies " + t + ".";
    }
    return rec;
}

std::string MockTeacher::generate(const std::string& prompt) const {
    const auto lv = prompt.find("Level: ");
    if (lv == std::string::npos) throw ParseError(0, "prompt has no 'Level:' line");
    const auto lv_end = prompt.find('\n', lv);
    const Level level = parse_level(trim(std::string_view(prompt).substr(lv + 7, lv_end - lv - 7)));
    const auto sep = prompt.rfind("<sep>");
    if (sep == std::string::npos) throw ParseError(prompt.size(), "prompt has no <sep> marker");
    const std::string payload = trim(std::string_view(prompt).substr(sep + 5));
    return serialize(level == Level::Item ? mock_item_record(vocab_, payload)
                                          : mock_user_record(vocab_, payload));
}

std::string subject_text(const synth::Corpus& corpus, Level level, std::uint64_t subject_id) {
    if (level == Level::Item) return corpus.catalog.at(static_cast<synth::ItemId>(subject_id)).text;
    if (subject_id < 1 || subject_id > corpus.users.size())
        throw NotFoundError("unknown user id " + std::to_string(subject_id));
    return synth::user_text(corpus.catalog, corpus.users[subject_id - 1]);
}

SemanticRecord mock_teacher_generate(const synth::Corpus& corpus, Level level,
                                     std::uint64_t subject_id) {
    const auto text = subject_text(corpus, level, subject_id);
    auto rec = level == Level::Item ? mock_item_record(corpus.vocab, text)
                                    : mock_user_record(corpus.vocab, text);
    rec.subject_id = subject_id;
    rec.level = level;
    return rec;
}

std::vector<DistillSample> build_distillation_set(const synth::Corpus& corpus,
                                                  std::span<const synth::ItemId> items,
                                                  std::span<const synth::UserId> users,
                                                  const Teacher& teacher,
                                                  const KnowledgeTemplates& templates,
                                                  std::span<const ReferenceExample> item_pool,
                                                  std::span<const ReferenceExample> user_pool,
                                                  std::size_t threads) {
    std::vector<std::pair<Level, std::uint64_t>> subjects;
    std::vector<synth::ItemId> sorted_items(items.begin(), items.end());
    std::vector<synth::UserId> sorted_users(users.begin(), users.end());
    std::sort(sorted_items.begin(), sorted_items.end());
    std::sort(sorted_users.begin(), sorted_users.end());
    for (auto id : sorted_items) subjects.emplace_back(Level::Item, id);
    for (auto id : sorted_users) subjects.emplace_back(Level::User, id);

    std::vector<DistillSample> out(subjects.size());
    std::vector<std::exception_ptr> errors(subjects.size());
    auto work = [&](std::size_t k) {
        const auto [level, id] = subjects[k];
        const auto text = subject_text(corpus, level, id);
        const bool is_item = level == Level::Item;
        const std::string category =
            is_item ? corpus.catalog.at(static_cast<synth::ItemId>(id)).category
                    : dominant_category(corpus, corpus.users[id - 1]);
        const auto pool = is_item ? item_pool : user_pool;
        const ReferenceExample* example =
            pool.empty() ? nullptr : &select_incontext_example({category, text}, pool);
        auto& sample = out[k];
        sample.prompt = render_prompt(is_item ? templates.item : templates.user, level, text, example);
        sample.record = parse_teacher_output(teacher.generate(sample.prompt));
        sample.record.subject_id = id;
        sample.record.level = level;
    };

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k; (k = next.fetch_add(1)) < subjects.size();) {
            try {
                work(k);
            } catch (...) {
                errors[k] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < std::max<std::size_t>(threads, 1); ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

void write_distillation_set(const std::filesystem::path& p, std::span<const SemanticRecord> records) {
    std::string out = "#msd-distill\tv1\n";
    for (const auto& r : records) out += encode_dataset_line(r) + "\n";
    io::write_file(p, out);
}

std::vector<SemanticRecord> read_distillation_set(const std::filesystem::path& p) {
    std::vector<SemanticRecord> out;
    for (const auto& line : io::read_lines_with_header(p, "#msd-distill\tv1"))
        if (!line.empty()) out.push_back(decode_dataset_line(line));
    return out;
}

}  // namespace msd::knowledge
