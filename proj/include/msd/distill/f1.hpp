// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "msd/distill/student.hpp"
#include "msd/knowledge/record.hpp"

namespace msd::distill {

struct PhraseScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t matches = 0;
};

using PhraseEmbedder = std::function<Vector(const std::string&)>;

/// Greedy one-to-one matching: all (predicted, truth) pairs sorted by cosine
/// descending (ties: lower predicted index, then lower truth index); a pair
/// is taken when neither side is matched yet and cosine >= threshold. Pairs
/// involving a zero vector never match. P = matches/|predicted|,
/// R = matches/|truth|, each 0 on an empty list; F1 = 0 when P + R = 0.
PhraseScore phrase_f1(std::span<const std::string> predicted, std::span<const std::string> truth,
                      const PhraseEmbedder& embed, double threshold = 0.8);

/// Key phrases (explicit followed by implicit) compared through the
/// student's semantic embeddings.
PhraseScore phrase_f1(const knowledge::SemanticRecord& predicted,
                      const knowledge::SemanticRecord& truth, const StudentModel& m,
                      const Vocab& vocab, double threshold = 0.8);

/// Reads decoded tokens back into a record. Sections start at the token
/// pairs "explicit :", "implicit :" and "rationale :"; phrases end at ";";
/// the tokens of a phrase are joined with single spaces. Anything outside a
/// section is ignored and decoding stops at <eos>. Never throws on content.
knowledge::SemanticRecord record_from_tokens(const Vocab& vocab, std::span<const TokenId> ids);

struct HeldOutExample {
    TokenSequence x;
    knowledge::SemanticRecord truth;
};

struct F1Report {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;               // mean of per-example F1
    std::size_t evaluated = 0;
    std::size_t skipped = 0;       // truth without key phrases
};

/// Greedy-decodes every example and averages per-example scores. Work is
/// split over `threads`; the reduction runs in example order so the result
/// does not depend on the thread count.
F1Report evaluate_phrase_f1(const StudentModel& m, const Vocab& vocab,
                            std::span<const HeldOutExample> examples, std::size_t max_len,
                            double threshold = 0.8, std::size_t threads = 1);

}  // namespace msd::distill
