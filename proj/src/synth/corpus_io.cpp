// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#include <string>

#include "msd/error.hpp"
#include "msd/io/text.hpp"
#include "msd/synth/corpus.hpp"

namespace msd::synth {

namespace {

constexpr const char* kCatalogHeader = "#msd-catalog\tv1";
constexpr const char* kUsersHeader = "#msd-users\tv1";
constexpr const char* kRowsHeader = "#msd-interactions\tv1";
constexpr const char* kWorldHeader = "#msd-world\tv1";

std::string id_list(const std::vector<ItemId>& ids) {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(ids[i]);
    }
    return out;
}

std::vector<ItemId> parse_id_list(const std::string& s) {
    std::vector<ItemId> out;
    if (s.empty()) return out;
    for (const auto& part : io::split(s, ','))
        out.push_back(static_cast<ItemId>(io::parse_u64(part, "item id")));
    return out;
}

std::vector<std::string> fields(const std::string& line, std::size_t expected,
                                const std::string& file) {
    auto f = io::split(line, '\t');
    if (f.size() != expected) {
        throw ParseError(0, file + ": expected " + std::to_string(expected) + " fields, got " +
                                std::to_string(f.size()));
    }
    return f;
}

}  // namespace

void write_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
    std::string cat = std::string(kCatalogHeader) + "\n";
    for (const auto& it : corpus.catalog.items) {
        cat += std::to_string(it.id) + '\t' + it.category + '\t' + it.brand + '\t' + it.flavor +
               '\t' + io::join(it.explicit_tags, ",") + '\t' + std::to_string(it.exposure) + '\t' +
               it.text + '\n';
    }
    io::write_file(dir / "catalog.tsv", cat);

    std::string users = std::string(kUsersHeader) + "\n";
    for (const auto& u : corpus.users) {
        std::string prefs;
        for (std::size_t i = 0; i < u.prefs.size(); ++i) {
            if (i) prefs += ',';
            prefs += std::to_string(u.prefs[i].first) + ':' + io::format_double(u.prefs[i].second);
        }
        users += std::to_string(u.id) + '\t' + id_list(u.history) + '\t' + prefs + '\n';
    }
    io::write_file(dir / "users.tsv", users);

    std::string rows = std::string(kRowsHeader) + "\n";
    for (const auto& r : corpus.rows) {
        rows += std::to_string(r.row_id) + '\t' + std::to_string(r.user_id) + '\t' +
                std::to_string(r.target_item_id) + '\t' + id_list(r.history) + '\t' +
                std::to_string(r.hour_bucket) + '\t' + std::to_string(r.device) + '\t' +
                std::to_string(r.label) + '\t' + std::to_string(r.timestamp) + '\n';
    }
    io::write_file(dir / "interactions.tsv", rows);

    std::string world = std::string(kWorldHeader) + "\n";
    world += "base_logit\t" + io::format_double(corpus.base_logit) + '\n';
    for (std::size_t i = 0; i < corpus.popularity.size(); ++i)
        world += std::to_string(i + 1) + '\t' + io::format_double(corpus.popularity[i]) + '\n';
    io::write_file(dir / "world.tsv", world);
}

Corpus read_corpus(const std::filesystem::path& dir) {
    Corpus corpus;
    corpus.vocab = AttributeVocab::standard();
    for (const auto& line : io::read_lines_with_header(dir / "catalog.tsv", kCatalogHeader)) {
        auto f = fields(line, 7, "catalog.tsv");
        Item it;
        it.id = static_cast<ItemId>(io::parse_u64(f[0], "item_id"));
        if (it.id != corpus.catalog.items.size() + 1)
            throw ParseError(0, "catalog.tsv: item ids must be dense and ascending");
        it.category = f[1];
        it.brand = f[2];
        it.flavor = f[3];
        if (!f[4].empty()) it.explicit_tags = io::split(f[4], ',');
        it.exposure = io::parse_u64(f[5], "exposure");
        it.text = f[6];
        corpus.catalog.items.push_back(std::move(it));
    }
    for (const auto& line : io::read_lines_with_header(dir / "users.tsv", kUsersHeader)) {
        auto f = fields(line, 3, "users.tsv");
        User u;
        u.id = static_cast<UserId>(io::parse_u64(f[0], "user_id"));
        if (u.id != corpus.users.size() + 1)
            throw ParseError(0, "users.tsv: user ids must be dense and ascending");
        u.history = parse_id_list(f[1]);
        if (!f[2].empty()) {
            for (const auto& p : io::split(f[2], ',')) {
                auto kv = io::split(p, ':');
                if (kv.size() != 2) throw ParseError(0, "users.tsv: bad preference '" + p + "'");
                u.prefs.emplace_back(static_cast<int>(io::parse_u64(kv[0], "tag")),
                                     io::parse_double(kv[1], "weight"));
            }
        }
        corpus.users.push_back(std::move(u));
    }
    for (const auto& line : io::read_lines_with_header(dir / "interactions.tsv", kRowsHeader)) {
        auto f = fields(line, 8, "interactions.tsv");
        InteractionRow r;
        r.row_id = io::parse_u64(f[0], "row_id");
        r.user_id = static_cast<UserId>(io::parse_u64(f[1], "user_id"));
        r.target_item_id = static_cast<ItemId>(io::parse_u64(f[2], "target_item_id"));
        r.history = parse_id_list(f[3]);
        r.hour_bucket = static_cast<std::uint32_t>(io::parse_u64(f[4], "hour"));
        r.device = static_cast<std::uint32_t>(io::parse_u64(f[5], "device"));
        r.label = static_cast<int>(io::parse_u64(f[6], "label"));
        r.timestamp = io::parse_u64(f[7], "timestamp");
        corpus.rows.push_back(std::move(r));
    }
    for (const auto& line : io::read_lines_with_header(dir / "world.tsv", kWorldHeader)) {
        auto f = fields(line, 2, "world.tsv");
        if (f[0] == "base_logit") {
            corpus.base_logit = io::parse_double(f[1], "base_logit");
        } else {
            corpus.popularity.push_back(io::parse_double(f[1], "popularity"));
        }
    }
    return corpus;
}

}  // namespace msd::synth
