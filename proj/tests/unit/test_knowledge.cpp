// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <thread>

#include <httplib.h>

#include "doctest.h"
#include "msd/error.hpp"
#include "msd/io/tokenize.hpp"
#include "msd/knowledge/prompt.hpp"
#include "msd/knowledge/record.hpp"
#include "msd/knowledge/sampling.hpp"
#include "msd/knowledge/teacher.hpp"

using namespace msd;
using namespace msd::knowledge;

namespace {

synth::Corpus small_corpus() {
    synth::SynthConfig cfg;
    cfg.n_items = 80;
    cfg.n_users = 60;
    cfg.n_rows = 400;
    Rng rng(11);
    return synth::generate_corpus(cfg, rng);
}

std::string random_phrase(Rng& rng) {
    static const std::string alphabet = "abcxyz -;\\\n:\t";
    std::string s;
    const std::size_t len = 1 + rng.below(8);
    for (std::size_t i = 0; i < len; ++i) s += alphabet[rng.below(alphabet.size())];
    return s;
}

SemanticRecord random_record(Rng& rng) {
    SemanticRecord r;
    r.subject_id = rng.below(100000);
    r.level = rng.bernoulli(0.5) ? Level::Item : Level::User;
    for (std::size_t i = rng.below(4); i > 0; --i) r.explicit_phrases.push_back(random_phrase(rng));
    for (std::size_t i = rng.below(4); i > 0; --i) r.implicit_phrases.push_back(random_phrase(rng));
    if (rng.bernoulli(0.8)) r.rationale = random_phrase(rng) + random_phrase(rng);
    return r;
}

std::size_t parse_error_offset(std::string_view raw) {
    try {
        parse_teacher_output(raw);
    } catch (const ParseError& e) {
        return e.offset();
    }
    FAIL("expected a parse error");
    return 0;
}

// Exact first-order inclusion probabilities of PPS without replacement with
// certainty units peeled off iteratively; independent of the sampler code.
std::vector<double> pps_inclusion_oracle(const std::vector<double>& w, std::size_t k) {
    std::vector<double> pi(w.size(), 0.0);
    std::vector<bool> certain(w.size(), false);
    for (bool changed = true; changed;) {
        changed = false;
        std::size_t kk = k;
        double total = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) {
            if (certain[i]) --kk;
            else total += w[i];
        }
        for (std::size_t i = 0; i < w.size(); ++i) {
            if (certain[i]) {
                pi[i] = 1.0;
            } else {
                pi[i] = static_cast<double>(kk) * w[i] / total;
                if (pi[i] >= 1.0) {
                    certain[i] = true;
                    changed = true;
                }
            }
        }
    }
    return pi;
}

}  // namespace

TEST_CASE("record round trip on 100 seeded records") {
    Rng rng(2024);
    for (int i = 0; i < 100; ++i) {
        SemanticRecord r = random_record(rng);
        SemanticRecord back = parse_teacher_output(serialize(r));
        back.subject_id = r.subject_id;
        back.level = r.level;
        CHECK(back == r);
        CHECK(decode_dataset_line(encode_dataset_line(r)) == r);
        CHECK(encode_dataset_line(r).find('\n') == std::string::npos);
    }
}

TEST_CASE("parse errors carry byte offsets") {
    CHECK(parse_error_offset("") == 0);
    CHECK(parse_error_offset("EXPLICIT: a\nIMPLICIT b\nRATIONALE: r\n") == 12);
    CHECK(parse_error_offset("EXPLICIT: a\nEXPLICIT: b\n") == 12);
    CHECK(parse_error_offset("EXPLICIT: a;;b\nIMPLICIT: x\nRATIONALE: r\n") == 12);
    CHECK(parse_error_offset("EXPLICIT: a\\qb\nIMPLICIT: x\nRATIONALE: r\n") == 11);
    CHECK(parse_error_offset("FOO: a\n") == 0);
    const std::string missing = "EXPLICIT: a\nIMPLICIT: x\n";
    CHECK(parse_error_offset(missing) == missing.size());
    CHECK_THROWS_AS(decode_dataset_line("12\titem"), ParseError);
    CHECK_THROWS_AS(decode_dataset_line("12\tshop\tEXPLICIT: a"), ParseError);
}

TEST_CASE("escaped delimiter survives parsing") {
    const auto r = parse_teacher_output("IMPLICIT:x\nEXPLICIT: salt\\; pepper;lime\nRATIONALE: a\\nb\\\\c\n");
    CHECK(r.explicit_phrases == std::vector<std::string>{"salt; pepper", "lime"});
    CHECK(r.implicit_phrases == std::vector<std::string>{"x"});
    CHECK(r.rationale == "a\nb\\c");
    SemanticRecord w;
    w.explicit_phrases = {"a;b"};
    CHECK(serialize(w) == "EXPLICIT: a\\;b\nIMPLICIT: \nRATIONALE: \n");
}

TEST_CASE("stratified sampling examples") {
    Rng rng(5);
    SUBCASE("one category, n = all") {
        std::vector<std::size_t> strata(30, 0);
        std::vector<double> w(30, 1.0);
        CHECK(stratified_pps_sample(strata, w, 30, 3, rng).size() == 30);
    }
    SUBCASE("minimum saturation") {
        std::vector<std::size_t> strata(200, 0);
        std::fill(strata.begin() + 100, strata.end(), 1);
        std::vector<double> w(200);
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = 1.0 + static_cast<double>(i % 7);
        for (int rep = 0; rep < 20; ++rep) {
            const auto s = stratified_pps_sample(strata, w, 10, 5, rng);
            REQUIRE(s.size() == 10);
            CHECK(std::count_if(s.begin(), s.end(), [](std::size_t i) { return i < 100; }) == 5);
            CHECK(std::set<std::size_t>(s.begin(), s.end()).size() == 10);
        }
    }
    SUBCASE("budget below the stratum floor") {
        std::vector<std::size_t> strata = {0, 0, 1, 1, 2, 2};
        std::vector<double> w(6, 1.0);
        try {
            stratified_pps_sample(strata, w, 5, 2, rng);
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(e.key() == "per_category_min");
        }
    }
}

TEST_CASE("inclusion frequency follows sqrt(exposure)") {
    std::vector<double> exposure;
    for (int r = 1; r <= 40; ++r) exposure.push_back(std::round(5000.0 / std::pow(r, 1.1)) + 1.0);
    std::vector<double> w;
    for (double e : exposure) w.push_back(std::sqrt(e));
    std::vector<std::size_t> strata(w.size(), 0);
    const std::size_t k = 8;
    const auto pi = pps_inclusion_oracle(w, k);
    std::vector<double> freq(w.size(), 0.0);
    const int reps = 10000;
    Rng rng(77);
    for (int rep = 0; rep < reps; ++rep) {
        Rng sub = rng.split(static_cast<std::uint64_t>(rep));
        const auto s = stratified_pps_sample(strata, w, k, 0, sub);
        REQUIRE(s.size() == k);
        for (auto i : s) freq[i] += 1.0 / reps;
    }
    for (std::size_t i = 0; i < w.size(); ++i) {
        INFO("item " << i << " pi=" << pi[i] << " freq=" << freq[i]);
        CHECK(std::abs(freq[i] - pi[i]) <= 0.10 * pi[i]);
    }
}

TEST_CASE("distillation sample covers every category") {
    const auto corpus = small_corpus();
    const auto table = synth::exposure_table(corpus.catalog);
    Rng rng(3);
    const auto ids = sample_distillation_set(corpus.catalog, table, {20, 2}, rng);
    CHECK(ids.size() == 20);
    CHECK(std::is_sorted(ids.begin(), ids.end()));
    CHECK(std::adjacent_find(ids.begin(), ids.end()) == ids.end());
    std::map<std::string, int> per_cat;
    for (auto id : ids) ++per_cat[corpus.catalog.at(id).category];
    std::set<std::string> cats;
    for (const auto& it : corpus.catalog.items) cats.insert(it.category);
    for (const auto& c : cats) CHECK(per_cat[c] >= 2);

    std::vector<synth::UserId> users;
    for (const auto& u : corpus.users) users.push_back(u.id);
    Rng urng(4);
    const auto picked = sample_distillation_users(corpus, users, {24, 1}, urng);
    CHECK(picked.size() == 24);
    CHECK(std::is_sorted(picked.begin(), picked.end()));
}

TEST_CASE("in-context example selection") {
    std::vector<ReferenceExample> pool = {
        make_reference(4, "tea", "kyoto-leaf matcha organic tea", "o4"),
        make_reference(2, "tea", "greenfield lemon tea", "o2"),
        make_reference(9, "cake", "velvetta vanilla cake", "o9"),
        make_reference(1, "tea", "heritage-mill original tea", "o1"),
        make_reference(7, "juice", "bolt mango vegan juice", "o7"),
    };
    SUBCASE("pool of one") {
        CHECK(select_incontext_example({"juice", "x"}, std::span(pool).subspan(4, 1)).id == 7);
    }
    SUBCASE("duplicate text wins") {
        CHECK(select_incontext_example({"tea", "greenfield lemon tea"}, pool).id == 2);
    }
    SUBCASE("brute-force oracle") {
        const std::vector<PromptSubject> subjects = {
            {"tea", "kyoto-leaf lemon tea"}, {"tea", "velvetta vanilla tea"},
            {"cake", "bolt mango cake"},     {"noodles", "bolt mango vegan noodles"},
            {"tea", "zzz"},                  {"coffee", "velvetta vanilla cake"},
        };
        for (const auto& s : subjects) {
            const auto toks = io::tokenize(s.text);
            const std::set<std::string> st(toks.begin(), toks.end());
            bool has_cat = false;
            for (const auto& e : pool) has_cat |= e.category == s.category;
            std::uint64_t want = 0;
            double want_score = -1;
            for (const auto& e : pool) {
                if (has_cat && e.category != s.category) continue;
                std::vector<std::string> inter, uni;
                std::set_intersection(st.begin(), st.end(), e.tokens.begin(), e.tokens.end(),
                                      std::back_inserter(inter));
                std::set_union(st.begin(), st.end(), e.tokens.begin(), e.tokens.end(),
                               std::back_inserter(uni));
                const double score = static_cast<double>(inter.size()) / static_cast<double>(uni.size());
                if (score > want_score || (score == want_score && e.id < want)) {
                    want = e.id;
                    want_score = score;
                }
            }
            INFO(s.text);
            CHECK(select_incontext_example(s, pool).id == want);
        }
    }
    SUBCASE("empty pool") {
        CHECK_THROWS_AS(select_incontext_example({"tea", "x"}, {}), ConfigError);
    }
}

TEST_CASE("prompt templates") {
    CHECK_THROWS_AS(PromptTemplate("Level: {{level}} <sep> {{payload}} {{oops}}", 50), ConfigError);
    CHECK_THROWS_AS(PromptTemplate("Level: {{level}} no payload", 50), ConfigError);
    CHECK_THROWS_AS(PromptTemplate("{{payload}} <sep>", 50), ConfigError);

    const auto ex = make_reference(1, "tea", "greenfield lemon tea", "EXPLICIT: \nIMPLICIT: healthy\n");
    const auto tpl = PromptTemplate::item_default(256);
    const auto a = render_prompt(tpl, Level::Item, "bolt mango vegan juice", &ex);
    CHECK(a == render_prompt(tpl, Level::Item, "bolt mango vegan juice", &ex));
    CHECK(a.find("greenfield lemon tea") != std::string::npos);
    CHECK(a.find("<sep> bolt mango vegan juice") != std::string::npos);

    for (std::size_t budget : {200, 100, 80}) {
        const PromptTemplate small(tpl.text(), budget);
        std::string payload;
        for (int i = 0; i < 60; ++i) payload += "word" + std::to_string(i) + " ";
        const auto p = render_prompt(small, Level::Item, payload, &ex);
        CHECK(count_tokens(p) <= budget);
    }
    CHECK_THROWS_AS(render_prompt(PromptTemplate(tpl.text(), 10), Level::Item, "x", nullptr),
                    ConfigError);
}

TEST_CASE("mock teacher follows documented rules") {
    synth::AttributeVocab v;
    v.categories = {{"ice-cream"}};
    v.brands = {{"brandx", {"ice-cream"}}};
    v.explicit_tags = {"low-sugar", "vegan"};
    v.implicit_tags = {"budget", "premium"};
    v.implicit_rules = {{"brandx", {"premium"}}};
    const auto r = mock_item_record(v, "brandx low-sugar ice-cream");
    CHECK(r.explicit_phrases == std::vector<std::string>{"low-sugar"});
    CHECK(r.implicit_phrases == std::vector<std::string>{"premium"});
    CHECK(r.rationale == "brandx implies premium.");

    const auto plain = mock_item_record(v, "nobrand vanilla ice-cream");
    CHECK(plain.implicit_phrases.empty());
    CHECK(plain.degenerate());
    CHECK(parse_teacher_output(serialize(plain)).implicit_phrases.empty());

    const auto user = mock_user_record(
        v, "brandx low-sugar ice-cream, other vegan ice-cream, brandx vegan low-sugar ice-cream");
    CHECK(user.explicit_phrases == std::vector<std::string>{"low-sugar", "vegan"});
    CHECK(user.implicit_phrases == std::vector<std::string>{"premium"});
}

TEST_CASE("mock teacher on the synthetic corpus") {
    const auto corpus = small_corpus();
    const MockTeacher teacher(corpus.vocab);
    CHECK(teacher.deterministic());
    const auto tpl = PromptTemplate::item_default();
    for (const auto& item : corpus.catalog.items) {
        const auto rec = mock_teacher_generate(corpus, Level::Item, item.id);
        for (const auto& p : rec.explicit_phrases) CHECK(item.text.find(p) != std::string::npos);
        CHECK(rec.implicit_phrases == corpus.vocab.implied_tags(item.brand, item.category));
        const auto prompt = render_prompt(tpl, Level::Item, item.text, nullptr);
        const auto raw = teacher.generate(prompt);
        CHECK(raw == teacher.generate(prompt));
        CHECK(raw == serialize(rec));
    }
    for (const auto& u : corpus.users) {
        const auto rec = mock_teacher_generate(corpus, Level::User, u.id);
        const auto text = synth::user_text(corpus.catalog, u);
        for (const auto& p : rec.explicit_phrases) CHECK(text.find(p) != std::string::npos);
    }
    CHECK_THROWS_AS(mock_teacher_generate(corpus, Level::Item, 0), NotFoundError);
    CHECK_THROWS_AS(mock_teacher_generate(corpus, Level::User, 10000), NotFoundError);
}

TEST_CASE("distillation set assembly is ordered and thread-independent") {
    const auto corpus = small_corpus();
    const MockTeacher teacher(corpus.vocab);
    const std::vector<synth::ItemId> items = {40, 3, 17, 9};
    const std::vector<synth::UserId> users = {12, 5};
    std::vector<synth::UserId> all_users;
    for (const auto& u : corpus.users) all_users.push_back(u.id);
    const auto ipool = item_reference_pool(corpus, 1);
    const auto upool = user_reference_pool(corpus, all_users, 1);
    const KnowledgeTemplates templates;
    const auto one = build_distillation_set(corpus, items, users, teacher, templates, ipool, upool, 1);
    const auto four = build_distillation_set(corpus, items, users, teacher, templates, ipool, upool, 4);
    REQUIRE(one.size() == 6);
    std::vector<std::uint64_t> order;
    for (std::size_t i = 0; i < one.size(); ++i) {
        CHECK(one[i].record == four[i].record);
        CHECK(one[i].prompt == four[i].prompt);
        order.push_back(one[i].record.subject_id);
        CHECK(one[i].record == mock_teacher_generate(corpus, one[i].record.level, one[i].record.subject_id));
    }
    CHECK(order == std::vector<std::uint64_t>{3, 9, 17, 40, 5, 12});

    const auto dir = std::filesystem::temp_directory_path() / "msd_test_knowledge";
    std::filesystem::create_directories(dir);
    std::vector<SemanticRecord> recs;
    for (const auto& s : one) recs.push_back(s.record);
    write_distillation_set(dir / "distill.tsv", recs);
    CHECK(read_distillation_set(dir / "distill.tsv") == recs);
    std::filesystem::remove_all(dir);
}

TEST_CASE("http teacher talks to a loopback endpoint") {
    CHECK_THROWS_AS(HttpTeacher("https://x", ""), ConfigError);
    CHECK_THROWS_AS(HttpTeacher("http://:80/", ""), ConfigError);

    httplib::Server server;
    std::string seen_auth;
    server.Post("/gen", [&](const httplib::Request& req, httplib::Response& res) {
        seen_auth = req.get_header_value("Authorization");
        res.set_content("EXPLICIT: echo\nIMPLICIT: " + std::to_string(req.body.size()) +
                            "\nRATIONALE: \n",
                        "text/plain");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    if (port <= 0) {
        MESSAGE("loopback bind unavailable; skipping");
        return;
    }
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    const HttpTeacher teacher("http://127.0.0.1:" + std::to_string(port) + "/gen", "secret");
    const auto rec = parse_teacher_output(teacher.generate("hello"));
    CHECK(rec.explicit_phrases == std::vector<std::string>{"echo"});
    CHECK(rec.implicit_phrases == std::vector<std::string>{"5"});
    CHECK(seen_auth == "Bearer secret");
    const HttpTeacher missing("http://127.0.0.1:" + std::to_string(port) + "/nope", "");
    CHECK_THROWS_AS(missing.generate("x"), Error);
    server.stop();
    th.join();
}
