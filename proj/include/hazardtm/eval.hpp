#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "hazardtm/classifier.hpp"
#include "hazardtm/metrics.hpp"

namespace hazardtm::eval {

using classifier::PredictionSet;

enum class Prominence { Main, Mention, None };
enum class Split { Train, Test };

std::string_view to_string(Prominence p);
std::string_view to_string(Split s);
Prominence prominence_from_string(std::string_view s);
Split split_from_string(std::string_view s);

struct GoldLabel {
    std::string doc_id;
    int relevant = 0;
    Prominence prominence = Prominence::None;
    std::string hazard;
    Split split = Split::Train;

    bool operator==(const GoldLabel&) const = default;
};

/// CSV with header doc_id,relevant,prominence,hazard,split.
std::vector<GoldLabel> read_gold_csv(const std::string& path);
void write_gold_csv(const std::string& path, std::span<const GoldLabel> gold);

/// doc id -> label for one split.
std::map<std::string, int> labels_for(std::span<const GoldLabel> gold, Split split);

struct Scores {
    Confusion counts;
    Metrics metrics;
    std::size_t n_main = 0;          // gold documents with prominence main
    std::size_t n_main_correct = 0;  // ... of which predicted relevant
};

struct EvalReport {
    std::string source;
    Split split = Split::Test;
    Scores overall;
    std::map<std::string, Scores> per_hazard;
};

EvalReport evaluate(const PredictionSet& pred, std::span<const GoldLabel> gold, Split split);

/// The all-positive predictor: recall 1, precision = positive rate.
EvalReport baseline(std::span<const GoldLabel> gold, Split split);

struct Agreement {
    double agreement = 0.0;
    double kappa = 0.0;
};

Agreement cohen_kappa(const std::map<std::string, int>& a, const std::map<std::string, int>& b);

/// Label seen at least twice among the three inputs.
PredictionSet majority_vote(const PredictionSet& a, const PredictionSet& b, const PredictionSet& c);
PredictionSet majority_vote(std::span<const PredictionSet> preds);

/// CSV with header doc_id,label and an optional explanation column of
/// ';'-separated topic ids.
PredictionSet import_external(const std::string& path, std::string source);
void write_predictions_csv(const std::string& path, const PredictionSet& pred);

nlohmann::json to_json(const EvalReport& report);
/// Fixed-width table, three decimals.
std::string render_text(std::span<const EvalReport> reports);

/// One row per document: its proportion of `topic` and its gold label.
void write_theta_curve_csv(const std::string& path, std::span<const classifier::DocumentTopics> docs,
                           std::size_t topic, const std::map<std::string, int>& gold);

}  // namespace hazardtm::eval
