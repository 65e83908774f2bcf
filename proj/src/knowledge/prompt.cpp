// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#include "msd/knowledge/prompt.hpp"

#include <algorithm>
#include <map>

#include "msd/error.hpp"
#include "msd/io/text.hpp"
#include "msd/io/tokenize.hpp"
#include "msd/knowledge/sampling.hpp"
#include "msd/knowledge/teacher.hpp"

namespace msd::knowledge {

namespace {

constexpr std::string_view kSlots[] = {"level", "example_input", "example_output", "payload"};

const char* kItemTemplate =
    "Level: {{level}}\n"
    "You describe a grocery product. List the key phrases stated in its title (EXPLICIT), "
    "the attributes a shopper would infer from brand and category (IMPLICIT), and explain "
    "each inference in one short sentence (RATIONALE).\n"
    "Example title: {{example_input}}\n"
    "Example answer:\n{{example_output}}"
    "Answer in the same format.\n"
    "<sep> {{payload}}\n";

const char* kUserTemplate =
    "Level: {{level}}\n"
    "You describe a shopper from the products they bought, separated by commas. List the "
    "key phrases shared by several purchases (EXPLICIT), the attributes they repeatedly "
    "prefer (IMPLICIT), and explain each preference in one short sentence (RATIONALE).\n"
    "Example history: {{example_input}}\n"
    "Example answer:\n{{example_output}}"
    "Answer in the same format.\n"
    "<sep> {{payload}}\n";

std::string fill(const std::string& tpl, const std::map<std::string_view, std::string>& values) {
    std::string out;
    std::size_t pos = 0;
    while (true) {
        const auto open = tpl.find("{{", pos);
        if (open == std::string::npos) break;
        const auto close = tpl.find("}}", open);
        out.append(tpl, pos, open - pos);
        const std::string_view name(tpl.data() + open + 2, close - open - 2);
        out += values.at(name);
        pos = close + 2;
    }
    out.append(tpl, pos);
    return out;
}

}  // namespace

PromptTemplate::PromptTemplate(std::string text, std::size_t token_budget)
    : text_(std::move(text)), budget_(token_budget) {
    std::size_t pos = 0, payloads = 0;
    while ((pos = text_.find("{{", pos)) != std::string::npos) {
        const auto close = text_.find("}}", pos);
        if (close == std::string::npos)
            throw ConfigError("prompt_template", "unterminated slot at byte " + std::to_string(pos));
        const std::string_view name(text_.data() + pos + 2, close - pos - 2);
        if (std::find(std::begin(kSlots), std::end(kSlots), name) == std::end(kSlots))
            throw ConfigError("prompt_template", "unknown slot '" + std::string(name) + "'");
        if (name == "payload") {
            ++payloads;
            if (text_.rfind("<sep>", pos) == std::string::npos)
                throw ConfigError("prompt_template", "{{payload}} must follow a <sep> marker");
        }
        pos = close + 2;
    }
    if (payloads != 1) throw ConfigError("prompt_template", "{{payload}} must appear exactly once");
    if (budget_ == 0) throw ConfigError("token_budget", "must be positive");
}

PromptTemplate PromptTemplate::item_default(std::size_t token_budget) {
    return PromptTemplate(kItemTemplate, token_budget);
}

PromptTemplate PromptTemplate::user_default(std::size_t token_budget) {
    return PromptTemplate(kUserTemplate, token_budget);
}

PromptTemplate PromptTemplate::from_file(const std::filesystem::path& p, std::size_t token_budget) {
    return PromptTemplate(io::read_file(p), token_budget);
}

ReferenceExample make_reference(std::uint64_t id, std::string category, std::string input,
                                std::string output) {
    ReferenceExample ex{id, std::move(category), std::move(input), std::move(output), {}};
    for (auto& t : io::tokenize(ex.input)) ex.tokens.insert(std::move(t));
    return ex;
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
    if (a.empty() && b.empty()) return 1.0;
    std::size_t inter = 0;
    for (const auto& t : a) inter += b.count(t);
    return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

const ReferenceExample& select_incontext_example(const PromptSubject& subject,
                                                 std::span<const ReferenceExample> pool) {
    if (pool.empty()) throw ConfigError("example_pool", "in-context example pool is empty");
    std::set<std::string> tokens;
    for (auto& t : io::tokenize(subject.text)) tokens.insert(std::move(t));
    const bool any_match = std::any_of(pool.begin(), pool.end(), [&](const ReferenceExample& e) {
        return e.category == subject.category;
    });
    const ReferenceExample* best = nullptr;
    double best_score = -1.0;
    for (const auto& e : pool) {
        if (any_match && e.category != subject.category) continue;
        const double s = jaccard(tokens, e.tokens);
        if (s > best_score || (s == best_score && e.id < best->id)) {
            best = &e;
            best_score = s;
        }
    }
    return *best;
}

std::size_t count_tokens(const std::string& text) { return io::tokenize(text).size(); }

std::string render_prompt(const PromptTemplate& tpl, Level level, const std::string& payload,
                          const ReferenceExample* example) {
    std::map<std::string_view, std::string> values{
        {"level", std::string(level_name(level))},
        {"example_input", example ? example->input : ""},
        {"example_output", example ? example->output : ""},
        {"payload", payload},
    };
    std::string out = fill(tpl.text(), values);
    if (count_tokens(out) <= tpl.token_budget()) return out;
    values["example_input"].clear();
    values["example_output"].clear();
    out = fill(tpl.text(), values);
    const std::size_t total = count_tokens(out);
    if (total <= tpl.token_budget()) return out;

    // Drop trailing payload tokens; the payload is rebuilt from whitespace
    // words so the kept prefix reads like the original text.
    std::vector<std::string> words = io::split(payload, ' ');
    while (!words.empty()) {
        words.pop_back();
        values["payload"] = io::join(words, " ");
        out = fill(tpl.text(), values);
        if (count_tokens(out) <= tpl.token_budget()) return out;
    }
    throw ConfigError("token_budget", "template alone exceeds the budget of " +
                                          std::to_string(tpl.token_budget()) + " tokens");
}

std::vector<ReferenceExample> item_reference_pool(const synth::Corpus& corpus,
                                                  std::size_t per_category) {
    std::map<std::string, std::size_t> taken;
    std::vector<ReferenceExample> pool;
    for (const auto& it : corpus.catalog.items) {
        if (taken[it.category]++ >= per_category) continue;
        pool.push_back(make_reference(it.id, it.category, it.text,
                                      serialize(mock_item_record(corpus.vocab, it.text))));
    }
    return pool;
}

std::vector<ReferenceExample> user_reference_pool(const synth::Corpus& corpus,
                                                  std::span<const synth::UserId> candidates,
                                                  std::size_t per_category) {
    std::map<std::string, std::size_t> taken;
    std::vector<ReferenceExample> pool;
    for (auto uid : candidates) {
        const auto& user = corpus.users.at(uid - 1);
        const auto cat = dominant_category(corpus, user);
        if (taken[cat]++ >= per_category) continue;
        const auto text = synth::user_text(corpus.catalog, user);
        pool.push_back(make_reference(uid, cat, text, serialize(mock_user_record(corpus.vocab, text))));
    }
    return pool;
}

}  // namespace msd::knowledge
