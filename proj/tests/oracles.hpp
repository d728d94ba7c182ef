#pragma once

// Independent reference computations shared by unit and acceptance tests.
// Nothing here calls into the library under test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

inline double exact_jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
    std::size_t inter = 0;
    for (const auto& x : a) inter += b.count(x);
    const std::size_t uni = a.size() + b.size() - inter;
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

// Two random string sets whose Jaccard similarity is close to `target`.
inline std::pair<std::set<std::string>, std::set<std::string>> set_pair(std::mt19937_64& rng, double target,
                                                                        std::size_t union_size) {
    const auto shared = static_cast<std::size_t>(std::llround(target * static_cast<double>(union_size)));
    const std::size_t rest = union_size - shared;
    const std::size_t only_a = rest / 2 + (rng() % 2 ? rest % 2 : 0);
    std::set<std::string> a;
    std::set<std::string> b;
    std::size_t made = 0;
    auto fresh = [&] { return "s" + std::to_string(rng()) + "_" + std::to_string(made++); };
    for (std::size_t i = 0; i < shared; ++i) {
        auto s = fresh();
        a.insert(s);
        b.insert(s);
    }
    for (std::size_t i = 0; i < only_a; ++i) a.insert(fresh());
    for (std::size_t i = 0; i < rest - only_a; ++i) b.insert(fresh());
    return {a, b};
}

inline std::vector<std::string> contiguous_shingles(const std::vector<std::string>& tokens, std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        std::string s;
        for (std::size_t k = 0; k < n; ++k) s += (k ? " " : "") + tokens[i + k];
        out.push_back(s);
    }
    return out;
}

struct PlantedCorpus {
    std::vector<std::pair<std::string, std::vector<std::string>>> docs;  // id, tokens
    std::vector<std::pair<std::string, std::string>> pairs;
};

// `singletons` unrelated documents plus `pairs` near-copies whose closing
// `tail_edits` tokens differ.
inline PlantedCorpus planted_corpus(std::uint64_t seed, std::size_t singletons, std::size_t pairs,
                                    std::size_t length = 200, std::size_t tail_edits = 8) {
    std::mt19937_64 rng(seed);
    std::vector<std::string> vocab;
    for (int i = 0; i < 5000; ++i) vocab.push_back("w" + std::to_string(i));
    auto random_doc = [&] {
        std::vector<std::string> t(length);
        for (auto& w : t) w = vocab[rng() % vocab.size()];
        return t;
    };
    PlantedCorpus out;
    char id[32];
    std::size_t next = 0;
    auto add = [&](std::vector<std::string> tokens) {
        std::snprintf(id, sizeof id, "p%03zu", next++);
        out.docs.emplace_back(id, std::move(tokens));
        return std::string(id);
    };
    for (std::size_t i = 0; i < singletons; ++i) add(random_doc());
    for (std::size_t p = 0; p < pairs; ++p) {
        auto original = random_doc();
        auto copy = original;
        for (std::size_t e = 0; e < tail_edits; ++e) copy[length - 1 - e] = "edit" + std::to_string(rng() % 100000);
        const auto a = add(original);
        const auto b = add(copy);
        out.pairs.emplace_back(a, b);
    }
    return out;
}

struct Prf {
    double precision;
    double recall;
    double f1;
};

// Textbook definitions written out from the counts; zero denominators give 0.
inline Prf prf(std::size_t tp, std::size_t fp, std::size_t fn) {
    const double p = tp + fp == 0 ? 0.0 : double(tp) / double(tp + fp);
    const double r = tp + fn == 0 ? 0.0 : double(tp) / double(tp + fn);
    const double f = p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
    return {p, r, f};
}

// Cohen's kappa from the full 2x2 contingency table.
inline std::pair<double, double> kappa(const std::vector<int>& a, const std::vector<int>& b) {
    double table[2][2] = {{0, 0}, {0, 0}};
    for (std::size_t i = 0; i < a.size(); ++i) table[a[i]][b[i]] += 1.0;
    const double n = static_cast<double>(a.size());
    const double observed = (table[0][0] + table[1][1]) / n;
    double expected = 0.0;
    for (int c = 0; c < 2; ++c) {
        const double row = table[c][0] + table[c][1];
        const double col = table[0][c] + table[1][c];
        expected += (row / n) * (col / n);
    }
    return {observed, (observed - expected) / (1.0 - expected)};
}

// Topics selected by each rule, enumerating every (topic, keyword) pair and
// ranking terms by a full sort. p_feat is row-major topics x terms.
inline std::set<std::size_t> keyword_proximity(const std::vector<double>& p_feat, std::size_t topics,
                                               std::size_t terms, const std::vector<std::size_t>& keywords,
                                               double gamma) {
    std::set<std::size_t> out;
    for (std::size_t t = 0; t < topics; ++t) {
        for (auto kw : keywords) {
            if (p_feat[t * terms + kw] > gamma) out.insert(t);
        }
    }
    return out;
}

inline std::set<std::size_t> top_terms(const std::vector<double>& p_feat, std::size_t topics, std::size_t terms,
                                       const std::vector<std::size_t>& keywords, std::size_t k) {
    std::set<std::size_t> out;
    for (std::size_t t = 0; t < topics; ++t) {
        std::vector<std::size_t> order(terms);
        for (std::size_t w = 0; w < terms; ++w) order[w] = w;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
            return p_feat[t * terms + x] > p_feat[t * terms + y];
        });
        for (std::size_t r = 0; r < std::min(k, terms); ++r) {
            if (std::find(keywords.begin(), keywords.end(), order[r]) != keywords.end()) out.insert(t);
        }
    }
    return out;
}

// Twenty documents, eight relevant, and three labelers whose mistakes fall on
// disjoint documents, so every document has a correct two-vote majority.
struct VoteFixture {
    std::vector<std::string> ids;
    std::vector<int> gold;
    std::vector<std::vector<int>> labelers;
};

inline VoteFixture vote_fixture() {
    VoteFixture f;
    for (int i = 0; i < 20; ++i) {
        f.ids.push_back("v" + std::to_string(100 + i));
        f.gold.push_back(i < 8 ? 1 : 0);
    }
    const std::vector<std::vector<int>> mistakes{{0, 1, 9, 10}, {2, 3, 11, 12}, {4, 13, 14, 15}};
    for (const auto& wrong : mistakes) {
        auto labels = f.gold;
        for (int i : wrong) labels[i] = 1 - labels[i];
        f.labelers.push_back(labels);
    }
    return f;
}

}  // namespace oracle
