#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "hazardtm/features.hpp"

namespace hazardtm::topicmodel {

enum class ModelKind { LDA, NMF };
std::string_view to_string(ModelKind kind);
ModelKind model_kind_from_string(std::string_view name);

/// Dirichlet prior: either learned ("auto") or a fixed symmetric value.
struct Prior {
    bool automatic = true;
    double value = 0.0;

    static Prior fixed(double v) { return {false, v}; }
};

struct LDAConfig {
    std::size_t num_topics = 10;
    Prior alpha;
    Prior eta;
    // `iterations` is the total Gibbs sweep budget, spread evenly over
    // `passes`; priors are re-estimated between passes.
    std::size_t iterations = 400;
    std::size_t passes = 20;
    std::uint64_t seed = 123;
    std::size_t burn_in = 30;        // fold-in sweeps discarded at inference
    std::size_t infer_samples = 30;  // fold-in sweeps averaged at inference
    bool check_invariants = false;   // count-conservation asserts after every sweep

    void validate() const;
    std::size_t sweeps_per_pass() const { return (iterations + passes - 1) / passes; }
};

struct NMFConfig {
    std::size_t num_topics = 10;
    std::size_t max_iters = 200;
    double tol = 1e-4;
    std::uint64_t seed = 123;
    std::size_t infer_iters = 300;

    void validate() const;
};

/// Diagnostics collected while fitting; not persisted.
struct FitLog {
    std::size_t sweeps = 0;
    std::size_t invariant_checks = 0;
    std::vector<double> objective;        // NMF squared Frobenius error per iteration
    std::size_t monotonicity_violations = 0;
    std::vector<std::vector<double>> alpha_history;
    std::vector<double> eta_history;
};

class TopicModel {
public:
    ModelKind kind = ModelKind::LDA;
    std::size_t num_topics = 0;
    std::size_t num_terms = 0;
    std::uint64_t fs_checksum = 0;
    std::variant<LDAConfig, NMFConfig> config;

    std::vector<double> p_feat;   // num_topics x num_terms, row-major
    std::vector<double> p_topic;  // num_docs x num_topics, row-major
    std::vector<std::string> doc_ids;
    std::vector<bool> empty_doc;    // rows set to uniform
    std::vector<bool> empty_topic;  // NMF topics whose H row vanished

    std::vector<double> alpha;        // LDA document-topic prior
    double eta = 0.0;                 // LDA topic-term prior
    std::vector<double> topic_scale;  // NMF: row sums of H
    std::vector<double> idf;          // NMF: weighting applied to new rows

    std::size_t num_docs() const { return doc_ids.size(); }
    std::uint64_t seed() const;
    double feat(std::size_t topic, std::size_t term) const { return p_feat[topic * num_terms + term]; }
    double topic(std::size_t doc, std::size_t t) const { return p_topic[doc * num_topics + t]; }
    std::optional<std::size_t> doc_index(const std::string& id) const;

    void save(const std::string& path) const;
    static TopicModel load(const std::string& path);

    void rebuild_index();

private:
    std::unordered_map<std::string, std::size_t> doc_index_;
};

/// Collapsed Gibbs sampling on a counts matrix.
TopicModel fit_lda(const features::DocTermMatrix& counts, const LDAConfig& cfg, FitLog* log = nullptr);

/// Multiplicative-update NMF (Frobenius loss) on a non-negative matrix.
TopicModel fit_nmf(const features::DocTermMatrix& m, const NMFConfig& cfg, FitLog* log = nullptr);

struct TopicDistribution {
    std::vector<double> probs;
    bool degenerate = false;  // empty input, uniform output
};

/// Topic mixture of an unseen document given its raw term counts.
TopicDistribution infer_topics(const TopicModel& model, const features::TermRow& row, std::uint64_t fs_checksum);

/// Batch form; NMF shares one Gram matrix across all rows.
std::vector<TopicDistribution> infer_topics(const TopicModel& model, std::span<const features::TermRow> rows,
                                            std::uint64_t fs_checksum);
/// Stored mixture of a training document.
TopicDistribution infer_topics(const TopicModel& model, const std::string& doc_id);

struct RankedTerm {
    std::size_t term = 0;
    double probability = 0.0;
};

/// Terms of `topic` by descending probability; ties go to the lower index.
std::vector<RankedTerm> top_terms(const TopicModel& model, std::size_t topic, std::size_t n);

/// CSV (topic_id, rank, term, probability) of the top-n terms of every topic.
void write_topics_csv(const std::string& path, const TopicModel& model, const features::FeatureSpace& fs,
                      std::size_t n);

}  // namespace hazardtm::topicmodel
