// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#include "msd/distill/vocab.hpp"

#include <set>

#include "msd/error.hpp"
#include "msd/io/text.hpp"
#include "msd/io/tokenize.hpp"

namespace msd::distill {

namespace {

const std::vector<std::string> kSpecials = {"<pad>", "<bos>", "<eos>", "<sep>"};

}  // namespace

Vocab::Vocab() : Vocab(kSpecials) {}

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        if (!ids_.emplace(tokens_[i], static_cast<TokenId>(i)).second)
            throw ParseError(0, "duplicate vocabulary token '" + tokens_[i] + "'");
    }
}

Vocab Vocab::build(std::span<const std::string> texts) {
    std::set<std::string> seen;
    for (const auto& t : texts)
        for (auto& tok : io::tokenize(t)) seen.insert(std::move(tok));
    std::vector<std::string> tokens = kSpecials;
    for (const auto& s : kSpecials) seen.erase(s);
    tokens.insert(tokens.end(), seen.begin(), seen.end());
    return Vocab(std::move(tokens));
}

const std::string& Vocab::token(TokenId id) const {
    if (id >= tokens_.size())
        throw DimensionError("token id " + std::to_string(id) + " >= vocabulary size " +
                             std::to_string(tokens_.size()));
    return tokens_[id];
}

TokenId Vocab::id(const std::string& token) const {
    const auto it = ids_.find(token);
    return it == ids_.end() ? kPad : it->second;
}

TokenSequence Vocab::encode(const std::string& text) const {
    TokenSequence out;
    for (const auto& t : io::tokenize(text)) out.push_back(id(t));
    return out;
}

std::string Vocab::decode(std::span<const TokenId> ids) const {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) out += ' ';
        out += token(ids[i]);
    }
    return out;
}

void Vocab::save(const std::filesystem::path& p) const {
    std::string out;
    for (const auto& t : tokens_) out += t + "\n";
    io::write_file(p, out);
}

Vocab Vocab::load(const std::filesystem::path& p) {
    auto lines = io::split(io::read_file(p), '\n');
    if (!lines.empty() && lines.back().empty()) lines.pop_back();
    for (std::size_t i = 0; i < kSpecials.size(); ++i) {
        if (i >= lines.size() || lines[i] != kSpecials[i])
            throw ParseError(0, p.string() + ": vocabulary must start with the special tokens");
    }
    return Vocab(std::move(lines));
}

}  // namespace msd::distill
