#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "hazardtm/corpus.hpp"
#include "hazardtm/eval.hpp"

namespace hazardtm::synth {

/// A keyword-retrieved news collection drawn from a known topic mixture:
/// background topics plus one hazard topic that carries the keywords.
/// Every document contains a keyword; only documents with substantial
/// hazard-topic mass are labelled relevant.
struct SynthConfig {
    std::string hazard = "flood";
    std::size_t num_docs = 1000;
    double relevant_share = 0.3;
    std::size_t background_topics = 8;
    std::size_t words_per_topic = 60;
    std::size_t min_length = 120;  // content tokens per document
    std::size_t max_length = 220;
    double duplicate_share = 0.02;  // near-copies of earlier documents
    double train_share = 0.7;
    std::uint64_t seed = 123;

    void validate() const;
};

struct SynthCorpus {
    SynthConfig config;
    std::vector<corpus::RawDocument> docs;
    std::vector<eval::GoldLabel> gold;
    std::vector<std::string> keywords;
    std::vector<std::string> intruders;
    corpus::Gazetteer gazetteer;
    std::vector<std::string> stopwords;
    std::vector<std::pair<std::string, std::string>> near_duplicates;  // (original, copy)
};

SynthCorpus generate(const SynthConfig& cfg);

/// Writes corpus.jsonl, gold.csv, hazard.json, gazetteer.json, stopwords.txt
/// and a pipeline.json wired to them.
void write(const std::string& dir, const SynthCorpus& corpus);

}  // namespace hazardtm::synth
