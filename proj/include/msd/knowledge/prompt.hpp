// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <set>
#include <span>
#include <string>

#include "msd/knowledge/record.hpp"
#include "msd/synth/corpus.hpp"

namespace msd::knowledge {

/// Plain text with {{slot}} placeholders. Known slots: {{level}},
/// {{example_input}}, {{example_output}}, {{payload}}. Any other slot name is
/// a ConfigError at construction. {{payload}} must appear exactly once and
/// be preceded by a "<sep>" marker so readers can locate the subject text.
class PromptTemplate {
public:
    PromptTemplate(std::string text, std::size_t token_budget);

    static PromptTemplate item_default(std::size_t token_budget = 256);
    static PromptTemplate user_default(std::size_t token_budget = 384);
    static PromptTemplate from_file(const std::filesystem::path& p, std::size_t token_budget);

    const std::string& text() const noexcept { return text_; }
    std::size_t token_budget() const noexcept { return budget_; }

private:
    std::string text_;
    std::size_t budget_;
};

/// One reference input/output pair in the in-context pool.
struct ReferenceExample {
    std::uint64_t id = 0;
    std::string category;
    std::string input;   // subject text
    std::string output;  // serialized SemanticRecord
    std::set<std::string> tokens;
};

ReferenceExample make_reference(std::uint64_t id, std::string category, std::string input,
                                std::string output);

struct PromptSubject {
    std::string category;
    std::string text;
};

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b);

/// Among pool entries of the subject's category, the one with the highest
/// Jaccard overlap of token sets (ties: lowest id). Without a category match
/// the whole pool is scanned. Throws ConfigError on an empty pool.
const ReferenceExample& select_incontext_example(const PromptSubject& subject,
                                                 std::span<const ReferenceExample> pool);

/// Fills the template. When the result exceeds the token budget the example
/// slots are rendered empty; if it still does not fit, payload tokens are
/// dropped from the end until it does. Deterministic in its inputs.
std::string render_prompt(const PromptTemplate& tpl, Level level, const std::string& payload,
                          const ReferenceExample* example);

std::size_t count_tokens(const std::string& text);

/// Reference pool: for each category the `per_category` lowest-id items,
/// paired with the mock teacher's record as the reference output.
std::vector<ReferenceExample> item_reference_pool(const synth::Corpus& corpus,
                                                  std::size_t per_category);

/// Same for users; `candidates` are scanned in order and the first
/// `per_category` users of each dominant category are kept.
std::vector<ReferenceExample> user_reference_pool(const synth::Corpus& corpus,
                                                  std::span<const synth::UserId> candidates,
                                                  std::size_t per_category);

}  // namespace msd::knowledge
