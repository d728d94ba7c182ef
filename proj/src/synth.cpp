#include "hazardtm/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "json.hpp"

#include "hazardtm/error.hpp"
#include "hazardtm/hash.hpp"

namespace hazardtm::synth {

namespace {

using nlohmann::json;

const std::vector<std::string> kStopwords{
    "der", "die", "das", "und", "oder", "in", "im", "am", "an", "auf", "mit", "von", "vom", "zu", "zum", "zur",
    "den", "dem", "des", "ein", "eine", "einer", "einen", "ist", "sind", "war", "wird", "wurde", "nicht", "auch",
    "sich", "bei", "nach", "aus", "für", "es", "sie", "er", "wie", "noch", "so", "dass"};

const std::vector<std::string> kCountries{"deutschland", "österreich", "frankreich", "italien", "polen", "spanien"};
const std::vector<std::string> kCities{"berlin", "hamburg", "dresden", "passau", "köln"};
const std::vector<std::string> kRessorts{"politik", "panorama", "wirtschaft", "wissen"};

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    double uniform() { return unit_double(engine_()); }
    std::size_t below(std::size_t n) { return std::min(n - 1, static_cast<std::size_t>(uniform() * n)); }
    std::size_t between(std::size_t lo, std::size_t hi) { return lo + below(hi - lo + 1); }
    std::size_t pick(const std::vector<double>& cumulative) {
        const double u = uniform() * cumulative.back();
        return std::min<std::size_t>(cumulative.size() - 1,
                                     std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
    }

private:
    std::mt19937_64 engine_;
};

std::string capitalize(const std::string& w) {
    std::string out = w;
    if (!out.empty() && out[0] >= 'a' && out[0] <= 'z') out[0] = static_cast<char>(out[0] - 'a' + 'A');
    return out;
}

struct Topic {
    std::vector<std::string> words;
    std::vector<double> cumulative;
};

Topic make_topic(std::vector<std::string> words) {
    Topic t;
    t.words = std::move(words);
    double acc = 0.0;
    for (std::size_t r = 0; r < t.words.size(); ++r) {
        acc += 1.0 / std::pow(static_cast<double>(r) + 2.0, 0.8);
        t.cumulative.push_back(acc);
    }
    return t;
}

std::vector<std::string> pseudo_words(Rng& rng, std::size_t n, std::set<std::string>& taken,
                                      const std::vector<std::string>& avoid) {
    static const std::vector<std::string> onsets{"b", "d", "f", "g", "k", "l", "m", "n", "p", "r",
                                                 "s", "t", "w", "z", "br", "gr", "kl", "st", "tr", "sch"};
    static const std::vector<std::string> vowels{"a", "e", "i", "o", "u", "ei", "au", "ä", "ö"};
    static const std::vector<std::string> codas{"", "n", "r", "l", "s", "t", "ng", "ch"};
    std::vector<std::string> out;
    while (out.size() < n) {
        std::string w;
        const std::size_t syllables = rng.between(2, 3);
        for (std::size_t s = 0; s < syllables; ++s) {
            w += onsets[rng.below(onsets.size())];
            w += vowels[rng.below(vowels.size())];
            w += codas[rng.below(codas.size())];
        }
        const bool clash = std::any_of(avoid.begin(), avoid.end(),
                                       [&](const std::string& a) { return w.find(a) != std::string::npos; });
        if (clash || !taken.insert(w).second) continue;
        out.push_back(w);
    }
    return out;
}

}  // namespace

void SynthConfig::validate() const {
    if (num_docs < 10) throw Error(ErrorCode::ConfigError, "synthetic corpus needs at least 10 documents");
    if (!(relevant_share > 0.0 && relevant_share < 1.0)) {
        throw Error(ErrorCode::ConfigError, "relevant_share must lie in (0, 1)");
    }
    if (background_topics < 1 || words_per_topic < 10) {
        throw Error(ErrorCode::ConfigError, "need >= 1 background topic of >= 10 words");
    }
    if (min_length < 40 || max_length < min_length) throw Error(ErrorCode::ConfigError, "bad document length range");
    if (!(duplicate_share >= 0.0 && duplicate_share < 0.5)) {
        throw Error(ErrorCode::ConfigError, "duplicate_share must lie in [0, 0.5)");
    }
    if (!(train_share > 0.0 && train_share < 1.0)) throw Error(ErrorCode::ConfigError, "train_share must lie in (0, 1)");
}

SynthCorpus generate(const SynthConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    SynthCorpus out;
    out.config = cfg;
    out.keywords = {"hochwasser", "flut", "überschwemmung"};
    out.intruders = {"flutlicht"};
    out.stopwords = kStopwords;
    out.gazetteer.countries = {kCountries.begin(), kCountries.end()};
    out.gazetteer.cities = {kCities.begin(), kCities.end()};

    std::set<std::string> taken{kStopwords.begin(), kStopwords.end()};
    taken.insert(kCountries.begin(), kCountries.end());
    taken.insert(kCities.begin(), kCities.end());
    std::vector<std::string> avoid = out.keywords;
    avoid.insert(avoid.end(), out.intruders.begin(), out.intruders.end());

    std::vector<Topic> background;
    for (std::size_t t = 0; t < cfg.background_topics; ++t) {
        background.push_back(make_topic(pseudo_words(rng, cfg.words_per_topic, taken, avoid)));
    }
    // Keywords lead the hazard topic, followed by its own vocabulary.
    auto hazard_words = out.keywords;
    const auto extra = pseudo_words(rng, cfg.words_per_topic - hazard_words.size(), taken, avoid);
    hazard_words.insert(hazard_words.end(), extra.begin(), extra.end());
    const Topic hazard = make_topic(hazard_words);
    std::vector<double> keyword_cumulative;
    for (std::size_t i = 0; i < out.keywords.size(); ++i) keyword_cumulative.push_back(hazard.cumulative[i]);

    const auto num_copies = static_cast<std::size_t>(std::round(cfg.duplicate_share * cfg.num_docs));
    const std::size_t num_originals = cfg.num_docs - num_copies;
    const auto num_relevant = static_cast<std::size_t>(std::round(cfg.relevant_share * num_originals));
    std::vector<int> relevant(num_originals, 0);
    std::fill(relevant.begin(), relevant.begin() + static_cast<std::ptrdiff_t>(num_relevant), 1);
    for (std::size_t i = num_originals; i > 1; --i) std::swap(relevant[i - 1], relevant[rng.below(i)]);

    auto render = [&](const std::vector<std::string>& words) {
        std::string textout;
        bool sentence_start = true;
        std::size_t in_sentence = 0;
        for (std::size_t i = 0; i < words.size(); ++i) {
            if (!textout.empty()) textout += ' ';
            textout += sentence_start ? capitalize(words[i]) : words[i];
            sentence_start = false;
            if (++in_sentence >= 8 && (rng.uniform() < 0.25 || in_sentence >= 16)) {
                textout += i + 1 < words.size() && rng.uniform() < 0.2 ? "," : ".";
                if (textout.back() == '.') sentence_start = true;
                in_sentence = 0;
            }
        }
        if (textout.back() != '.') textout += '.';
        return textout;
    };

    const std::chrono::sys_days first{std::chrono::year{2019} / 1 / 1};
    char idbuf[32];
    std::vector<std::vector<std::string>> contents;
    for (std::size_t i = 0; i < num_originals; ++i) {
        const std::size_t length = rng.between(cfg.min_length, cfg.max_length);
        const std::size_t bg1 = rng.below(background.size());
        const std::size_t bg2 = rng.below(background.size());
        double hazard_mass = 0.0;
        if (relevant[i]) hazard_mass = 0.3 + 0.5 * rng.uniform();
        const double bg1_share = 0.6 + 0.4 * rng.uniform();

        std::vector<std::string> words;
        words.push_back(kCountries[rng.below(kCountries.size())]);
        for (std::size_t w = 1; w < length; ++w) {
            const double u = rng.uniform();
            const Topic* topic = nullptr;
            if (u < hazard_mass) {
                topic = &hazard;
            } else if ((u - hazard_mass) / (1.0 - hazard_mass) < bg1_share) {
                topic = &background[bg1];
            } else {
                topic = &background[bg2];
            }
            words.push_back(topic->words[rng.pick(topic->cumulative)]);
        }
        if (!relevant[i]) {
            // Retrieved on an incidental keyword mention.
            const std::size_t mentions = rng.between(1, 2);
            for (std::size_t m = 0; m < mentions; ++m) {
                words[1 + rng.below(words.size() - 1)] = out.keywords[rng.pick(keyword_cumulative)];
            }
        } else if (std::none_of(words.begin(), words.end(), [&](const std::string& w) {
                       return std::find(out.keywords.begin(), out.keywords.end(), w) != out.keywords.end();
                   })) {
            words[1 + rng.below(words.size() - 1)] = out.keywords.front();
        }
        // Function words between content words, as in running text.
        std::vector<std::string> with_stopwords;
        for (std::size_t w = 0; w < words.size(); ++w) {
            with_stopwords.push_back(words[w]);
            if (w > 0 && rng.uniform() < 0.35) with_stopwords.push_back(kStopwords[rng.below(kStopwords.size())]);
        }
        // Never open on a city, which would read as a local dateline.
        std::swap(with_stopwords[0], with_stopwords[1]);
        contents.push_back(with_stopwords);

        std::snprintf(idbuf, sizeof idbuf, "doc%05zu", i + 1);
        corpus::RawDocument doc;
        doc.id = idbuf;
        doc.text = render(with_stopwords);
        if (rng.uniform() < 0.1) doc.text = "<p>" + doc.text + "</p>";
        doc.outlet = "synth-" + std::to_string(rng.below(4));
        doc.date = std::chrono::year_month_day{first + std::chrono::days{rng.below(730)}};
        doc.ressort = kRessorts[rng.below(kRessorts.size())];
        doc.hazard = cfg.hazard;
        out.docs.push_back(doc);

        eval::GoldLabel g;
        g.doc_id = doc.id;
        g.relevant = relevant[i];
        g.prominence = !relevant[i] ? eval::Prominence::None
                                    : (hazard_mass >= 0.5 ? eval::Prominence::Main : eval::Prominence::Mention);
        g.hazard = cfg.hazard;
        out.gold.push_back(g);
    }

    // Near-copies: the same article with its closing words rewritten.
    for (std::size_t c = 0; c < num_copies; ++c) {
        const std::size_t src = rng.below(num_originals);
        auto words = contents[src];
        const std::size_t edits = std::max<std::size_t>(1, words.size() / 60);
        for (std::size_t e = 0; e < edits; ++e) {
            const auto& bg = background[rng.below(background.size())];
            words[words.size() - 1 - e] = bg.words[rng.pick(bg.cumulative)];
        }
        std::snprintf(idbuf, sizeof idbuf, "doc%05zu", num_originals + c + 1);
        corpus::RawDocument doc = out.docs[src];
        doc.id = idbuf;
        doc.text = render(words);
        doc.outlet = "synth-copy";
        out.docs.push_back(doc);
        auto g = out.gold[src];
        g.doc_id = doc.id;
        out.gold.push_back(g);
        out.near_duplicates.emplace_back(out.docs[src].id, doc.id);
    }

    std::vector<std::size_t> order(out.gold.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    const auto num_train = static_cast<std::size_t>(std::round(cfg.train_share * order.size()));
    for (std::size_t r = 0; r < order.size(); ++r) {
        out.gold[order[r]].split = r < num_train ? eval::Split::Train : eval::Split::Test;
    }
    return out;
}

void write(const std::string& dir, const SynthCorpus& corpus) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const fs::path root(dir);
    corpus::write_jsonl((root / "corpus.jsonl").string(), corpus.docs);
    eval::write_gold_csv((root / "gold.csv").string(), corpus.gold);

    auto dump = [&](const std::string& name, const json& j) {
        std::ofstream out(root / name, std::ios::binary);
        if (!out) throw Error(ErrorCode::IoError, "cannot write " + (root / name).string());
        out << j.dump(2) << '\n';
    };
    dump("hazard.json", {{"hazard", corpus.config.hazard},
                         {"keywords", corpus.keywords},
                         {"intruders", corpus.intruders},
                         {"filter",
                          {{"min_tokens", 30},
                           {"max_tokens", 1700},
                           {"max_nonalpha_ratio", 0.11},
                           {"require_location", true},
                           {"forbidden_ressort_substrings", {"lokal"}}}}});
    dump("gazetteer.json", {{"countries", corpus.gazetteer.countries},
                            {"nationalities", json::array()},
                            {"cities", corpus.gazetteer.cities}});
    {
        std::ofstream out(root / "stopwords.txt", std::ios::binary);
        for (const auto& w : corpus.stopwords) out << w << '\n';
    }
    dump("pipeline.json",
         {{"hazard", corpus.config.hazard},
          {"seed", corpus.config.seed},
          {"paths",
           {{"corpus", "corpus.jsonl"},
            {"hazard_config", "hazard.json"},
            {"gazetteer", "gazetteer.json"},
            {"stopwords", "stopwords.txt"},
            {"gold", "gold.csv"},
            {"output_dir", "out"}}},
          {"features", {{"min_doc_freq", 2}, {"pos", json::array()}, {"keyword_match", "exact"}}},
          {"train", {{"kind", "lda"}, {"num_topics", 10}}},
          {"grid",
           {{"min_doc_freqs", {2, 5}},
            {"pos_sets", json::array({json::array()})},
            {"num_topics", {5, 10, 20}},
            {"kinds", {"lda", "nmf"}}}}});
}

}  // namespace hazardtm::synth
