// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace msd::knowledge {

enum class Level { Item, User };

std::string_view level_name(Level l) noexcept;
Level parse_level(std::string_view s);

/// Teacher output for one item or user: key phrases that are literally
/// present in the subject text (explicit), phrases inferred from world
/// knowledge (implicit), and the reasoning that links them.
struct SemanticRecord {
    std::uint64_t subject_id = 0;
    Level level = Level::Item;
    std::vector<std::string> explicit_phrases;
    std::vector<std::string> implicit_phrases;
    std::string rationale;

    /// True when either phrase list is empty. The mock teacher emits such
    /// records for items no rule applies to and reports them through this flag.
    bool degenerate() const noexcept { return explicit_phrases.empty() || implicit_phrases.empty(); }

    friend bool operator==(const SemanticRecord&, const SemanticRecord&) = default;
};

/// Canonical teacher-output grammar:
///
///     EXPLICIT: <phrase>;<phrase>...\n
///     IMPLICIT: <phrase>;<phrase>...\n
///     RATIONALE: <text>\n
///
/// Each section appears exactly once, in any order. A single space after the
/// colon is optional. Inside values, '\' escapes itself, ';' and newline
/// ("\\", "\;", "\n"); any other escape is an error. Phrase lists may be
/// empty, individual phrases may not.
///
/// serialize() always writes the order above with one space after the colon.
/// subject_id and level are not part of the grammar.
std::string serialize(const SemanticRecord& r);

/// Parses the canonical grammar. Throws msd::ParseError carrying the byte
/// offset of the first fault; never aborts the process. The returned record
/// has subject_id 0 and level Item.
SemanticRecord parse_teacher_output(std::string_view raw);

/// Distillation dataset line: "subject_id TAB level TAB payload" where the
/// payload is serialize(record) with '\', TAB and newline written as "\\",
/// "\t" and "\n" so that the record fits on one line.
std::string encode_dataset_line(const SemanticRecord& r);
SemanticRecord decode_dataset_line(std::string_view line);

}  // namespace msd::knowledge
