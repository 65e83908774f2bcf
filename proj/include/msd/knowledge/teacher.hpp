// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "msd/knowledge/prompt.hpp"
#include "msd/knowledge/record.hpp"
#include "msd/synth/corpus.hpp"

namespace msd::knowledge {

/// A text generator that answers one prompt. Implementations must be safe
/// to call from several threads at once.
class Teacher {
public:
    virtual ~Teacher() = default;
    virtual std::string generate(const std::string& prompt) const = 0;
    virtual std::string name() const = 0;
    virtual bool deterministic() const noexcept = 0;
};

/// Rule-based stand-in for an LLM. Reads the "Level:" line and the text after
/// the last <sep> marker of the prompt, and answers with the serialized
/// record the vocabulary rules imply. Pure: same prompt, same bytes.
class MockTeacher final : public Teacher {
public:
    explicit MockTeacher(synth::AttributeVocab vocab) : vocab_(std::move(vocab)) {}

    std::string generate(const std::string& prompt) const override;
    std::string name() const override { return "mock"; }
    bool deterministic() const noexcept override { return true; }

private:
    synth::AttributeVocab vocab_;
};

/// POSTs the prompt as text/plain to an HTTP endpoint and returns the body.
/// Configured from MSD_TEACHER_URL (http://host:port/path) and the optional
/// bearer token MSD_TEACHER_TOKEN. Never used by default.
class HttpTeacher final : public Teacher {
public:
    HttpTeacher(std::string url, std::string token);

    /// nullptr when MSD_TEACHER_URL is unset.
    static std::unique_ptr<HttpTeacher> from_env();

    std::string generate(const std::string& prompt) const override;
    std::string name() const override { return "http"; }
    bool deterministic() const noexcept override { return false; }

private:
    std::string host_;
    int port_ = 80;
    std::string path_;
    std::string token_;
};

/// Mock records from the item text: explicit = vocabulary explicit tags
/// present as words; implicit = tags implied by the brand (first word) and
/// category (last word); one rationale sentence per implicit phrase.
SemanticRecord mock_item_record(const synth::AttributeVocab& vocab, const std::string& item_text);

/// Mock records from a user text (item titles joined by ", "): explicit =
/// explicit tags present in at least two titles; implicit = implicit tags
/// implied for at least two titles.
SemanticRecord mock_user_record(const synth::AttributeVocab& vocab, const std::string& user_text);

/// The mock record for a catalog subject by id. Throws NotFoundError for
/// unknown ids. Identical to parsing MockTeacher's answer to any prompt
/// whose payload is the subject's untruncated text.
SemanticRecord mock_teacher_generate(const synth::Corpus& corpus, Level level,
                                     std::uint64_t subject_id);

struct DistillSample {
    SemanticRecord record;
    std::string prompt;
};

struct KnowledgeTemplates {
    PromptTemplate item = PromptTemplate::item_default();
    PromptTemplate user = PromptTemplate::user_default();
};

/// Renders prompts, asks the teacher and parses answers. Items come first,
/// then users, each in ascending id order, independent of `threads`
/// (results are placed by index, not by completion order). A malformed
/// teacher answer propagates as ParseError.
std::vector<DistillSample> build_distillation_set(const synth::Corpus& corpus,
                                                  std::span<const synth::ItemId> items,
                                                  std::span<const synth::UserId> users,
                                                  const Teacher& teacher,
                                                  const KnowledgeTemplates& templates,
                                                  std::span<const ReferenceExample> item_pool,
                                                  std::span<const ReferenceExample> user_pool,
                                                  std::size_t threads = 1);

/// One encode_dataset_line() per line, header "#msd-distill\tv1".
void write_distillation_set(const std::filesystem::path& p, std::span<const SemanticRecord> records);
std::vector<SemanticRecord> read_distillation_set(const std::filesystem::path& p);

/// The subject text a record refers to.
std::string subject_text(const synth::Corpus& corpus, Level level, std::uint64_t subject_id);

}  // namespace msd::knowledge
