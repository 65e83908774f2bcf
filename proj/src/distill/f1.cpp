// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#include "msd/distill/f1.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <thread>
#include <tuple>

namespace msd::distill {

PhraseScore phrase_f1(std::span<const std::string> predicted, std::span<const std::string> truth,
                      const PhraseEmbedder& embed, double threshold) {
    PhraseScore s;
    if (predicted.empty() || truth.empty()) return s;
    std::vector<Vector> pe, te;
    for (const auto& p : predicted) pe.push_back(embed(p));
    for (const auto& t : truth) te.push_back(embed(t));
    std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < pe.size(); ++i) {
        for (std::size_t j = 0; j < te.size(); ++j) {
            const double c = cosine(pe[i], te[j]);
            if (std::isfinite(c) && c >= threshold) pairs.emplace_back(c, i, j);
        }
    }
    std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) {
        if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
        return std::tie(std::get<1>(a), std::get<2>(a)) < std::tie(std::get<1>(b), std::get<2>(b));
    });
    std::vector<bool> pu(pe.size(), false), tu(te.size(), false);
    for (const auto& [c, i, j] : pairs) {
        if (pu[i] || tu[j]) continue;
        pu[i] = tu[j] = true;
        ++s.matches;
    }
    s.precision = static_cast<double>(s.matches) / static_cast<double>(predicted.size());
    s.recall = static_cast<double>(s.matches) / static_cast<double>(truth.size());
    if (s.precision + s.recall > 0.0) s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
    return s;
}

namespace {

std::vector<std::string> key_phrases(const knowledge::SemanticRecord& r) {
    std::vector<std::string> out = r.explicit_phrases;
    out.insert(out.end(), r.implicit_phrases.begin(), r.implicit_phrases.end());
    return out;
}

}  // namespace

PhraseScore phrase_f1(const knowledge::SemanticRecord& predicted,
                      const knowledge::SemanticRecord& truth, const StudentModel& m,
                      const Vocab& vocab, double threshold) {
    // Phrases repeat a lot across records; embed each distinct one once.
    std::map<std::string, Vector> cache;
    auto embed = [&](const std::string& p) -> Vector {
        auto it = cache.find(p);
        if (it == cache.end()) it = cache.emplace(p, semantic_embedding(m, vocab, p).value).first;
        return it->second;
    };
    const auto p = key_phrases(predicted);
    const auto t = key_phrases(truth);
    return phrase_f1(p, t, embed, threshold);
}

knowledge::SemanticRecord record_from_tokens(const Vocab& vocab, std::span<const TokenId> ids) {
    knowledge::SemanticRecord rec;
    enum class Section { None, Explicit, Implicit, Rationale } section = Section::None;
    std::vector<std::string> cur;
    auto flush = [&] {
        if (cur.empty()) return;
        std::string phrase;
        for (std::size_t i = 0; i < cur.size(); ++i) phrase += (i ? " " : "") + cur[i];
        if (section == Section::Explicit) rec.explicit_phrases.push_back(phrase);
        else if (section == Section::Implicit) rec.implicit_phrases.push_back(phrase);
        else if (section == Section::Rationale) rec.rationale = phrase;
        cur.clear();
    };
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] == Vocab::kEos || ids[i] >= vocab.size()) break;
        const std::string& tok = vocab.token(ids[i]);
        const bool header = i + 1 < ids.size() && ids[i + 1] < vocab.size() &&
                            vocab.token(ids[i + 1]) == ":" &&
                            (tok == "explicit" || tok == "implicit" || tok == "rationale");
        if (header) {
            flush();
            section = tok == "explicit" ? Section::Explicit
                      : tok == "implicit" ? Section::Implicit
                                          : Section::Rationale;
            ++i;
        } else if (tok == ";" && section != Section::Rationale) {
            flush();
        } else if (section != Section::None) {
            cur.push_back(tok);
        }
    }
    flush();
    return rec;
}

F1Report evaluate_phrase_f1(const StudentModel& m, const Vocab& vocab,
                            std::span<const HeldOutExample> examples, std::size_t max_len,
                            double threshold, std::size_t threads) {
    std::vector<PhraseScore> scores(examples.size());
    std::vector<bool> skip(examples.size(), false);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k; (k = next.fetch_add(1)) < examples.size();) {
            const auto& ex = examples[k];
            if (ex.truth.explicit_phrases.empty() && ex.truth.implicit_phrases.empty()) {
                skip[k] = true;
                continue;
            }
            const auto decoded = greedy_decode(m, ex.x, max_len);
            scores[k] = phrase_f1(record_from_tokens(vocab, decoded), ex.truth, m, vocab, threshold);
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < std::max<std::size_t>(threads, 1); ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    F1Report r;
    for (std::size_t k = 0; k < examples.size(); ++k) {
        if (skip[k]) {
            ++r.skipped;
            continue;
        }
        r.precision += scores[k].precision;
        r.recall += scores[k].recall;
        r.f1 += scores[k].f1;
        ++r.evaluated;
    }
    if (r.evaluated) {
        const double n = static_cast<double>(r.evaluated);
        r.precision /= n;
        r.recall /= n;
        r.f1 /= n;
    }
    return r;
}

}  // namespace msd::distill
