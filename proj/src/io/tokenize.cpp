// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#include "msd/io/tokenize.hpp"

#include <array>
#include <cctype>

namespace msd::io {

namespace {

constexpr std::array<std::string_view, 4> kMarkers = {"<pad>", "<bos>", "<eos>", "<sep>"};

bool is_word_char(unsigned char c) {
    return c >= 0x80 || std::isalnum(c) || c == '-' || c == '_';
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) out.push_back(std::move(cur));
        cur.clear();
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        const auto c = static_cast<unsigned char>(text[i]);
        if (c == '<') {
            bool matched = false;
            for (auto m : kMarkers) {
                if (text.size() - i >= m.size()) {
                    std::string lower;
                    for (std::size_t k = 0; k < m.size(); ++k)
                        lower += static_cast<char>(std::tolower(static_cast<unsigned char>(text[i + k])));
                    if (lower == m) {
                        flush();
                        out.emplace_back(m);
                        i += m.size() - 1;
                        matched = true;
                        break;
                    }
                }
            }
            if (matched) continue;
        }
        if (std::isspace(c)) {
            flush();
        } else if (is_word_char(c)) {
            cur += c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c);
        } else {
            flush();
            out.emplace_back(1, static_cast<char>(c));
        }
    }
    flush();
    return out;
}

}  // namespace msd::io
