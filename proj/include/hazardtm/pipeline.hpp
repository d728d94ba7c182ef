#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "hazardtm/classifier.hpp"
#include "hazardtm/dedup.hpp"
#include "hazardtm/eval.hpp"
#include "hazardtm/features.hpp"
#include "hazardtm/topicmodel.hpp"

namespace hazardtm::pipeline {

inline constexpr const char* kVersion = "0.1.0";

struct Paths {
    std::string corpus;
    std::string hazard_config;
    std::string gazetteer;
    std::string stopwords;
    std::string gold;
    std::string output_dir = "out";
};

struct DedupParams {
    std::size_t num_hashes = dedup::kDefaultNumHashes;
    std::size_t shingle_size = dedup::kDefaultShingleSize;
    double threshold = dedup::kDefaultThreshold;
    dedup::LshParams lsh;
};

struct TrainParams {
    topicmodel::ModelKind kind = topicmodel::ModelKind::LDA;
    std::size_t num_topics = 10;
};

struct PipelineConfig {
    std::string hazard;
    std::uint64_t seed = 123;
    Paths paths;  // absolute after loading
    DedupParams dedup;
    features::FeatureConfig features;
    TrainParams train;
    classifier::SweepGrid grid;  // lda/nmf settings here are shared with `train`
    classifier::SelectionSettings selection;
    std::size_t threads = 1;
    bool save_fits = true;
    nlohmann::json source;  // the document this was parsed from

    void validate() const;
    std::uint64_t checksum() const;
};

/// Parses a pipeline config; relative paths resolve against `base_dir` and
/// `{hazard}` placeholders are replaced by the hazard id.
PipelineConfig config_from_json(const nlohmann::json& j, const std::string& base_dir,
                                const std::optional<std::string>& hazard_override = std::nullopt);
PipelineConfig load_config(const std::string& path, const std::optional<std::string>& hazard_override = std::nullopt);

/// HAZARDTM_OUTPUT_DIR and HAZARDTM_THREADS.
void apply_environment(PipelineConfig& cfg);

enum class LogLevel { Quiet, Normal, Debug };
void set_log_level(LogLevel level);

struct RunOptions {
    LogLevel log = LogLevel::Normal;
    std::vector<std::string> args;                  // recorded in the manifest
    std::map<std::string, std::string> versions;    // extra component versions
    std::vector<std::string> variants{"tm_f1", "tm_b", "tm_p"};
    std::vector<std::string> predictions;           // evaluate / ensemble inputs
    eval::Split split = eval::Split::Test;
    std::string model;                              // dump-topics; default model.bin
    std::string features;                           // dump-topics; default features.tsv
    std::size_t top_n = 20;
    std::optional<std::size_t> theta_topic;
};

const std::vector<std::string>& subcommands();

/// Runs one subcommand for one hazard and writes its manifest. Throws
/// hazardtm::Error on failure.
void run(const std::string& subcommand, PipelineConfig cfg, const RunOptions& opts);

// Artifact names inside the output directory.
namespace artifact {
inline constexpr const char* kCleanCorpus = "corpus.clean.jsonl";
inline constexpr const char* kRejections = "rejections.csv";
inline constexpr const char* kSignatures = "signatures.bin";
inline constexpr const char* kGroups = "groups.csv";
inline constexpr const char* kUniqueIds = "unique_ids.txt";
inline constexpr const char* kTokens = "tokens.jsonl";
inline constexpr const char* kFeatures = "features.tsv";
inline constexpr const char* kCounts = "counts.mat";
inline constexpr const char* kTfIdf = "tfidf.mat";
inline constexpr const char* kModel = "model.bin";
inline constexpr const char* kSweep = "sweep.csv";
inline constexpr const char* kTopics = "topics.csv";
inline constexpr const char* kThetaCurve = "theta_curve.csv";
inline constexpr const char* kReportText = "report.txt";
inline constexpr const char* kReportJson = "report.json";
}  // namespace artifact

}  // namespace hazardtm::pipeline
