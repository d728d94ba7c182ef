#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "hazardtm/corpus.hpp"
#include "hazardtm/features.hpp"
#include "hazardtm/metrics.hpp"
#include "hazardtm/topicmodel.hpp"

namespace hazardtm::classifier {

enum class PartitionMethod { KeywordProximity, TopTerms };
std::string_view to_string(PartitionMethod method);
PartitionMethod partition_method_from_string(std::string_view name);

struct PartitionRule {
    PartitionMethod method = PartitionMethod::TopTerms;
    double gamma = 0.0;   // keyword proximity: select when p_feat(keyword) > gamma
    std::size_t k = 1;    // top terms: select when a keyword ranks within the top k

    static PartitionRule keyword_proximity(double gamma) { return {PartitionMethod::KeywordProximity, gamma, 0}; }
    static PartitionRule top_terms(std::size_t k) { return {PartitionMethod::TopTerms, 0.0, k}; }
    void validate() const;
};

struct ClassifierConfig {
    double theta = 0.05;  // document discusses topic t when p_topic(d, t) >= theta
    PartitionRule rule;

    void validate() const;
};

/// Why a topic was selected: the witnessing keyword, its probability in the
/// topic and its 1-based rank among all features of the topic.
struct Evidence {
    std::size_t keyword = 0;  // feature index
    double probability = 0.0;
    std::size_t rank = 0;
};

struct TopicPartition {
    std::set<std::size_t> relevant_topics;
    std::map<std::size_t, Evidence> evidence;
};

/// The topic's strongest keyword: highest probability, lowest index on ties.
/// It is also the best-ranked keyword, so both rules can be decided from it
/// without rescanning p_feat.
struct TopicKeywordSummary {
    Evidence best;
};

std::vector<TopicKeywordSummary> summarize_keywords(const topicmodel::TopicModel& model,
                                                    const features::FeatureSpace& fs);
TopicPartition partition_from_summary(std::span<const TopicKeywordSummary> summary, const PartitionRule& rule);
TopicPartition partition_topics(const topicmodel::TopicModel& model, const features::FeatureSpace& fs,
                                const PartitionRule& rule);

struct PredictionSet {
    std::string source;
    std::map<std::string, int> predictions;
    std::map<std::string, std::vector<std::size_t>> explanations;  // positives only

    bool operator==(const PredictionSet&) const = default;
};

struct DocumentTopics {
    std::string doc_id;
    topicmodel::TopicDistribution topics;
};

/// Topic mixtures for `docs`: stored rows for training documents, fold-in
/// inference for the rest.
std::vector<DocumentTopics> document_topics(const topicmodel::TopicModel& model, const features::FeatureSpace& fs,
                                            std::span<const features::TokenizedDocument> docs);

/// Relevant-topic members reaching theta, ascending. Empty for degenerate rows.
std::vector<std::size_t> triggering_topics(const topicmodel::TopicDistribution& dist,
                                           const TopicPartition& partition, double theta);

PredictionSet classify(std::span<const DocumentTopics> docs, const TopicPartition& partition,
                       const ClassifierConfig& cfg, std::string source = "tm");

/// Classifies training documents of the model by id.
PredictionSet classify(const topicmodel::TopicModel& model, const TopicPartition& partition,
                       const ClassifierConfig& cfg, std::span<const std::string> doc_ids,
                       std::string source = "tm");

std::vector<double> theta_grid_default();
std::vector<double> gamma_grid_default();

struct SweepGrid {
    std::vector<std::size_t> min_doc_freqs{50, 100, 500, 1000, 5000, 10000};
    std::vector<std::set<std::string>> pos_sets{
        {"NOUN", "VERB", "ADJ"}, {"NOUN", "VERB", "PROPN"}, {"NOUN"}, {"NOUN", "PROPN"}};
    std::vector<std::size_t> num_topics{50, 100, 300, 500};
    std::vector<topicmodel::ModelKind> kinds{topicmodel::ModelKind::LDA, topicmodel::ModelKind::NMF};
    std::vector<PartitionMethod> methods{PartitionMethod::TopTerms, PartitionMethod::KeywordProximity};
    std::vector<double> thetas = theta_grid_default();
    std::vector<double> gammas = gamma_grid_default();
    std::vector<std::size_t> ks{1, 2, 3, 4, 5};
    features::KeywordMatch keyword_match = features::KeywordMatch::Exact;
    topicmodel::LDAConfig lda;
    topicmodel::NMFConfig nmf;

    std::size_t num_fits() const;
    std::size_t cells_per_fit() const;
};

struct FitSpec {
    std::size_t index = 0;  // position in grid order
    std::size_t min_doc_freq = 0;
    std::set<std::string> pos;
    topicmodel::ModelKind kind = topicmodel::ModelKind::LDA;
    std::size_t num_topics = 0;
};

struct SweepRow {
    FitSpec fit;
    PartitionRule rule;
    double theta = 0.0;
    std::size_t relevant_topics = 0;
    Confusion counts;
    Metrics metrics;
};

struct SweepInput {
    std::span<const features::TokenizedDocument> corpus;  // every document
    std::set<std::string> training_ids;                   // unique documents the models are fitted on
    corpus::KeywordList keywords;
    std::map<std::string, int> train_gold;                // doc id -> 0/1, train split only
};

/// Called once per successful fit, in grid order.
using FitCallback = std::function<void(const FitSpec&, const features::FeatureSpace&, const topicmodel::TopicModel&)>;

struct SweepOptions {
    std::size_t threads = 1;
    FitCallback on_fit;
};

/// Fits one model per (features, kind, topics) combination on the training
/// documents and scores every (rule, theta) cell on the train split.
std::vector<SweepRow> sweep(const SweepInput& input, const SweepGrid& grid, const SweepOptions& options = {});

/// Scores every rule/theta cell of one fitted model.
std::vector<SweepRow> evaluate_cells(const FitSpec& fit, const topicmodel::TopicModel& model,
                                     const features::FeatureSpace& fs, std::span<const DocumentTopics> train_docs,
                                     const std::map<std::string, int>& train_gold, const SweepGrid& grid);

enum class BalancedCriterion { MaxMin, MinAbsDiff };

struct SelectionSettings {
    double recall_floor = 0.05;
    BalancedCriterion balanced = BalancedCriterion::MaxMin;
};

struct Variants {
    SweepRow tm_f1;
    SweepRow tm_b;
    SweepRow tm_p;
    bool tm_p_fallback = false;  // no cell met the recall floor
};

Variants select_variants(std::span<const SweepRow> rows, const SelectionSettings& settings = {});

void write_sweep_csv(const std::string& path, std::span<const SweepRow> rows);
std::vector<SweepRow> read_sweep_csv(const std::string& path);

}  // namespace hazardtm::classifier
