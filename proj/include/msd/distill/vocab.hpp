// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace msd::distill {

using TokenId = std::uint32_t;
using TokenSequence = std::vector<TokenId>;

/// Dense token <-> id bijection. Ids 0..3 are <pad>, <bos>, <eos>, <sep>;
/// the remaining tokens follow in lexicographic order so that the same token
/// set always yields the same ids.
class Vocab {
public:
    static constexpr TokenId kPad = 0;
    static constexpr TokenId kBos = 1;
    static constexpr TokenId kEos = 2;
    static constexpr TokenId kSep = 3;

    /// Only the special tokens.
    Vocab();

    /// Collects every token of `texts` (after io::tokenize).
    static Vocab build(std::span<const std::string> texts);

    std::size_t size() const noexcept { return tokens_.size(); }
    const std::string& token(TokenId id) const;
    bool contains(const std::string& token) const { return ids_.count(token) != 0; }

    /// Tokens missing from the vocabulary map to <pad>, which carries no
    /// information in the student's input.
    TokenId id(const std::string& token) const;
    TokenSequence encode(const std::string& text) const;
    /// Space-joined tokens; ids >= size() throw DimensionError.
    std::string decode(std::span<const TokenId> ids) const;

    /// One token per line, in id order.
    void save(const std::filesystem::path& p) const;
    static Vocab load(const std::filesystem::path& p);

    friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

private:
    explicit Vocab(std::vector<std::string> tokens);

    std::vector<std::string> tokens_;
    std::unordered_map<std::string, TokenId> ids_;
};

}  // namespace msd::distill
