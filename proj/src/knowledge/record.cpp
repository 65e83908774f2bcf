// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#include "msd/knowledge/record.hpp"

#include <array>
#include <optional>

#include "msd/error.hpp"
#include "msd/io/text.hpp"

namespace msd::knowledge {

namespace {

constexpr std::array<std::string_view, 3> kKeys = {"EXPLICIT", "IMPLICIT", "RATIONALE"};

std::string escape_value(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (c == '\\') out += "\\\\";
        else if (c == ';') out += "\\;";
        else if (c == '\n') out += "\\n";
        else out += c;
    }
    return out;
}

std::string escape_list(const std::vector<std::string>& phrases) {
    std::string out;
    for (std::size_t i = 0; i < phrases.size(); ++i) {
        if (i) out += ';';
        out += escape_value(phrases[i]);
    }
    return out;
}

// Resolves one escape starting at value[i] == '\\'; `base` maps to raw offsets.
char unescape_at(std::string_view value, std::size_t i, std::size_t base) {
    if (i + 1 >= value.size()) throw ParseError(base + i, "dangling backslash");
    switch (value[i + 1]) {
        case '\\': return '\\';
        case ';': return ';';
        case 'n': return '\n';
        default: throw ParseError(base + i, std::string("unknown escape '\\") + value[i + 1] + "'");
    }
}

std::vector<std::string> parse_list(std::string_view value, std::size_t base) {
    std::vector<std::string> out;
    if (value.empty()) return out;
    std::string cur;
    std::size_t phrase_start = 0;
    for (std::size_t i = 0; i < value.size(); ++i) {
        const char c = value[i];
        if (c == '\\') {
            cur += unescape_at(value, i, base);
            ++i;
        } else if (c == ';') {
            if (cur.empty()) throw ParseError(base + phrase_start, "empty phrase");
            out.push_back(std::move(cur));
            cur.clear();
            phrase_start = i + 1;
        } else {
            cur += c;
        }
    }
    if (cur.empty()) throw ParseError(base + phrase_start, "empty phrase");
    out.push_back(std::move(cur));
    return out;
}

std::string parse_text(std::string_view value, std::size_t base) {
    std::string out;
    for (std::size_t i = 0; i < value.size(); ++i) {
        if (value[i] == '\\') {
            out += unescape_at(value, i, base);
            ++i;
        } else {
            out += value[i];
        }
    }
    return out;
}

}  // namespace

std::string_view level_name(Level l) noexcept { return l == Level::Item ? "item" : "user"; }

Level parse_level(std::string_view s) {
    if (s == "item") return Level::Item;
    if (s == "user") return Level::User;
    throw ParseError(0, "unknown level '" + std::string(s) + "'");
}

std::string serialize(const SemanticRecord& r) {
    return "EXPLICIT: " + escape_list(r.explicit_phrases) + "\nIMPLICIT: " +
           escape_list(r.implicit_phrases) + "\nRATIONALE: " + escape_value(r.rationale) + "\n";
}

SemanticRecord parse_teacher_output(std::string_view raw) {
    if (raw.empty()) throw ParseError(0, "empty input");
    SemanticRecord rec;
    std::array<bool, 3> seen{};
    std::size_t pos = 0;
    while (pos < raw.size()) {
        std::size_t end = raw.find('\n', pos);
        if (end == std::string_view::npos) end = raw.size();
        const std::string_view line = raw.substr(pos, end - pos);
        if (line.empty()) throw ParseError(pos, "empty line");
        const auto colon = line.find(':');
        if (colon == std::string_view::npos) throw ParseError(pos, "missing ':' after section key");
        const std::string_view key = line.substr(0, colon);
        std::optional<std::size_t> which;
        for (std::size_t k = 0; k < kKeys.size(); ++k)
            if (key == kKeys[k]) which = k;
        if (!which) throw ParseError(pos, "unknown section '" + std::string(key) + "'");
        if (seen[*which]) throw ParseError(pos, "duplicate section '" + std::string(key) + "'");
        seen[*which] = true;
        std::size_t vstart = colon + 1;
        if (vstart < line.size() && line[vstart] == ' ') ++vstart;
        const std::string_view value = line.substr(vstart);
        const std::size_t base = pos + vstart;
        switch (*which) {
            case 0: rec.explicit_phrases = parse_list(value, base); break;
            case 1: rec.implicit_phrases = parse_list(value, base); break;
            default: rec.rationale = parse_text(value, base); break;
        }
        pos = end + 1;
    }
    for (std::size_t k = 0; k < kKeys.size(); ++k) {
        if (!seen[k]) throw ParseError(raw.size(), "missing section '" + std::string(kKeys[k]) + "'");
    }
    return rec;
}

std::string encode_dataset_line(const SemanticRecord& r) {
    std::string payload;
    for (char c : serialize(r)) {
        if (c == '\\') payload += "\\\\";
        else if (c == '\t') payload += "\\t";
        else if (c == '\n') payload += "\\n";
        else payload += c;
    }
    return std::to_string(r.subject_id) + '\t' + std::string(level_name(r.level)) + '\t' + payload;
}

SemanticRecord decode_dataset_line(std::string_view line) {
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string_view::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string_view::npos) throw ParseError(0, "dataset line needs three TAB-separated fields");
    const auto id = io::parse_u64(line.substr(0, t1), "subject_id");
    const auto level = parse_level(line.substr(t1 + 1, t2 - t1 - 1));
    std::string payload;
    const std::string_view enc = line.substr(t2 + 1);
    for (std::size_t i = 0; i < enc.size(); ++i) {
        if (enc[i] != '\\') {
            payload += enc[i];
            continue;
        }
        if (i + 1 >= enc.size()) throw ParseError(t2 + 1 + i, "dangling backslash in dataset line");
        const char n = enc[++i];
        if (n == '\\') payload += '\\';
        else if (n == 't') payload += '\t';
        else if (n == 'n') payload += '\n';
        else throw ParseError(t2 + i, "unknown escape in dataset line");
    }
    SemanticRecord rec = parse_teacher_output(payload);
    rec.subject_id = id;
    rec.level = level;
    return rec;
}

}  // namespace msd::knowledge
