#include "hazardtm/classifier.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <future>
#include <limits>
#include <memory>

#include "hazardtm/csv.hpp"
#include "hazardtm/error.hpp"
#include "hazardtm/text.hpp"

namespace hazardtm::classifier {

namespace tm = topicmodel;

std::string_view to_string(PartitionMethod method) {
    return method == PartitionMethod::KeywordProximity ? "keyword_proximity" : "top_terms";
}

PartitionMethod partition_method_from_string(std::string_view name) {
    if (name == "keyword_proximity") return PartitionMethod::KeywordProximity;
    if (name == "top_terms") return PartitionMethod::TopTerms;
    throw Error(ErrorCode::ConfigError, "unknown partition method '" + std::string(name) + "'");
}

void PartitionRule::validate() const {
    if (method == PartitionMethod::KeywordProximity && !(gamma > 0.0 && gamma < 1.0)) {
        throw Error(ErrorCode::ConfigError, "gamma must lie in (0, 1)");
    }
    if (method == PartitionMethod::TopTerms && k < 1) throw Error(ErrorCode::ConfigError, "k must be >= 1");
}

void ClassifierConfig::validate() const {
    if (!(theta >= 0.0 && theta <= 1.0)) throw Error(ErrorCode::ConfigError, "theta must lie in [0, 1]");
    rule.validate();
}

std::vector<TopicKeywordSummary> summarize_keywords(const tm::TopicModel& model, const features::FeatureSpace& fs) {
    if (fs.checksum() != model.fs_checksum || fs.size() != model.num_terms) {
        throw Error(ErrorCode::FeatureSpaceMismatch, "feature space does not belong to the model");
    }
    const auto& keywords = fs.keyword_indices();
    if (keywords.empty()) throw Error(ErrorCode::NoKeywordsInFeatureSpace, "feature space contains no keyword");

    std::vector<TopicKeywordSummary> out(model.num_topics);
    for (std::size_t t = 0; t < model.num_topics; ++t) {
        std::size_t best = keywords.front();
        for (auto kw : keywords) {
            if (model.feat(t, kw) > model.feat(t, best)) best = kw;
        }
        const double p = model.feat(t, best);
        std::size_t ahead = 0;
        for (std::size_t v = 0; v < model.num_terms; ++v) {
            const double q = model.feat(t, v);
            if (q > p || (q == p && v < best)) ++ahead;
        }
        out[t].best = {best, p, ahead + 1};
    }
    return out;
}

TopicPartition partition_from_summary(std::span<const TopicKeywordSummary> summary, const PartitionRule& rule) {
    rule.validate();
    TopicPartition part;
    for (std::size_t t = 0; t < summary.size(); ++t) {
        const auto& e = summary[t].best;
        const bool selected = rule.method == PartitionMethod::KeywordProximity ? e.probability > rule.gamma
                                                                                : e.rank <= rule.k;
        if (selected) {
            part.relevant_topics.insert(t);
            part.evidence.emplace(t, e);
        }
    }
    return part;
}

TopicPartition partition_topics(const tm::TopicModel& model, const features::FeatureSpace& fs,
                                const PartitionRule& rule) {
    const auto summary = summarize_keywords(model, fs);
    return partition_from_summary(summary, rule);
}

std::vector<DocumentTopics> document_topics(const tm::TopicModel& model, const features::FeatureSpace& fs,
                                            std::span<const features::TokenizedDocument> docs) {
    if (fs.checksum() != model.fs_checksum) {
        throw Error(ErrorCode::FeatureSpaceMismatch, "feature space does not belong to the model");
    }
    std::vector<DocumentTopics> out(docs.size());
    std::vector<features::TermRow> unseen;
    std::vector<std::size_t> unseen_at;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        out[i].doc_id = docs[i].doc_id;
        if (model.doc_index(docs[i].doc_id)) {
            out[i].topics = tm::infer_topics(model, docs[i].doc_id);
        } else {
            unseen.push_back(features::term_row(docs[i], fs));
            unseen_at.push_back(i);
        }
    }
    auto inferred = tm::infer_topics(model, unseen, fs.checksum());
    for (std::size_t j = 0; j < unseen_at.size(); ++j) out[unseen_at[j]].topics = std::move(inferred[j]);
    return out;
}

std::vector<std::size_t> triggering_topics(const tm::TopicDistribution& dist, const TopicPartition& partition,
                                           double theta) {
    std::vector<std::size_t> out;
    if (dist.degenerate) return out;
    for (auto t : partition.relevant_topics) {
        if (t < dist.probs.size() && dist.probs[t] >= theta) out.push_back(t);
    }
    return out;
}

PredictionSet classify(std::span<const DocumentTopics> docs, const TopicPartition& partition,
                       const ClassifierConfig& cfg, std::string source) {
    cfg.validate();
    PredictionSet out;
    out.source = std::move(source);
    for (const auto& d : docs) {
        auto trig = triggering_topics(d.topics, partition, cfg.theta);
        const int label = trig.empty() ? 0 : 1;
        if (!out.predictions.emplace(d.doc_id, label).second) {
            throw Error(ErrorCode::DuplicateId, "document '" + d.doc_id + "' classified twice");
        }
        if (label == 1) out.explanations.emplace(d.doc_id, std::move(trig));
    }
    return out;
}

PredictionSet classify(const tm::TopicModel& model, const TopicPartition& partition, const ClassifierConfig& cfg,
                       std::span<const std::string> doc_ids, std::string source) {
    std::vector<DocumentTopics> docs;
    docs.reserve(doc_ids.size());
    for (const auto& id : doc_ids) docs.push_back({id, tm::infer_topics(model, id)});
    return classify(docs, partition, cfg, std::move(source));
}

std::vector<double> theta_grid_default() {
    std::vector<double> out;
    for (int milli = 4; milli <= 200; milli += 2) out.push_back(milli / 1000.0);
    return out;
}

std::vector<double> gamma_grid_default() {
    std::vector<double> out;
    for (int step = 1; step <= 11; ++step) out.push_back(step * 18 / 1000.0);
    return out;
}

std::size_t SweepGrid::num_fits() const {
    return min_doc_freqs.size() * std::max<std::size_t>(1, pos_sets.size()) * kinds.size() * num_topics.size();
}

std::size_t SweepGrid::cells_per_fit() const {
    std::size_t rules = 0;
    for (auto m : methods) rules += m == PartitionMethod::KeywordProximity ? gammas.size() : ks.size();
    return rules * thetas.size();
}

std::vector<SweepRow> evaluate_cells(const FitSpec& fit, const tm::TopicModel& model, const features::FeatureSpace& fs,
                                     std::span<const DocumentTopics> train_docs,
                                     const std::map<std::string, int>& train_gold, const SweepGrid& grid) {
    const auto summary = summarize_keywords(model, fs);
    std::vector<int> gold;
    gold.reserve(train_docs.size());
    for (const auto& d : train_docs) gold.push_back(train_gold.at(d.doc_id));

    std::vector<SweepRow> rows;
    auto score_rule = [&](const PartitionRule& rule) {
        const auto part = partition_from_summary(summary, rule);
        // Strongest relevant-topic proportion per document; a document is
        // positive at theta iff this reaches theta.
        std::vector<double> strongest(train_docs.size(), -1.0);
        for (std::size_t i = 0; i < train_docs.size(); ++i) {
            const auto& dist = train_docs[i].topics;
            if (dist.degenerate) continue;
            for (auto t : part.relevant_topics) strongest[i] = std::max(strongest[i], dist.probs[t]);
        }
        for (double theta : grid.thetas) {
            SweepRow row;
            row.fit = fit;
            row.rule = rule;
            row.theta = theta;
            row.relevant_topics = part.relevant_topics.size();
            for (std::size_t i = 0; i < train_docs.size(); ++i) {
                row.counts.add(gold[i] == 1, strongest[i] >= theta && strongest[i] >= 0.0);
            }
            row.metrics = compute_metrics(row.counts);
            rows.push_back(std::move(row));
        }
    };
    for (auto method : grid.methods) {
        if (method == PartitionMethod::KeywordProximity) {
            for (double g : grid.gammas) score_rule(PartitionRule::keyword_proximity(g));
        } else {
            for (auto k : grid.ks) score_rule(PartitionRule::top_terms(k));
        }
    }
    return rows;
}

namespace {

struct FitJob {
    FitSpec spec;
    std::shared_ptr<const features::FeatureSpace> fs;
};

struct FitOutcome {
    std::optional<tm::TopicModel> model;
    std::vector<SweepRow> rows;
};

}  // namespace

std::vector<SweepRow> sweep(const SweepInput& input, const SweepGrid& grid, const SweepOptions& options) {
    if (grid.num_fits() == 0 || grid.cells_per_fit() == 0) {
        throw Error(ErrorCode::EmptyGrid, "sweep grid has no cells");
    }
    std::map<std::string, const features::TokenizedDocument*> by_id;
    for (const auto& d : input.corpus) by_id.emplace(d.doc_id, &d);

    std::vector<features::TokenizedDocument> training;
    for (const auto& d : input.corpus) {
        if (input.training_ids.contains(d.doc_id)) training.push_back(d);
    }
    std::vector<features::TokenizedDocument> train_split;
    for (const auto& [id, label] : input.train_gold) {
        auto it = by_id.find(id);
        if (it == by_id.end()) {
            throw Error(ErrorCode::ConfigError, "gold document '" + id + "' is missing from the corpus");
        }
        train_split.push_back(*it->second);
    }

    const auto pos_sets = grid.pos_sets.empty() ? std::vector<std::set<std::string>>{{}} : grid.pos_sets;
    std::vector<FitJob> jobs;
    std::size_t index = 0;
    for (auto min_df : grid.min_doc_freqs) {
        for (const auto& pos : pos_sets) {
            std::shared_ptr<const features::FeatureSpace> fs;
            try {
                fs = std::make_shared<const features::FeatureSpace>(features::build_feature_space(
                    training, input.keywords, {min_df, pos, grid.keyword_match}));
                if (fs->keyword_indices().empty()) {
                    throw Error(ErrorCode::NoKeywordsInFeatureSpace, "no keyword among the features");
                }
            } catch (const Error& e) {
                spdlog::warn("skipping min_doc_freq={} pos={{{}}}: {}", min_df,
                             text::join({pos.begin(), pos.end()}, ","), e.what());
                index += grid.kinds.size() * grid.num_topics.size();
                continue;
            }
            for (auto kind : grid.kinds) {
                for (auto k : grid.num_topics) {
                    jobs.push_back({{index++, min_df, pos, kind, k}, fs});
                }
            }
        }
    }

    auto run = [&](const FitJob& job) {
        FitOutcome out;
        try {
            const auto weighting = job.spec.kind == tm::ModelKind::LDA ? features::Weighting::Counts
                                                                       : features::Weighting::TfIdf;
            const auto matrix = features::vectorize(training, *job.fs, weighting);
            if (job.spec.kind == tm::ModelKind::LDA) {
                auto cfg = grid.lda;
                cfg.num_topics = job.spec.num_topics;
                out.model = tm::fit_lda(matrix, cfg);
            } else {
                auto cfg = grid.nmf;
                cfg.num_topics = job.spec.num_topics;
                out.model = tm::fit_nmf(matrix, cfg);
            }
        } catch (const Error& e) {
            spdlog::warn("skipping fit {} ({} with {} topics): {}", job.spec.index, tm::to_string(job.spec.kind),
                         job.spec.num_topics, e.what());
            return out;
        }
        const auto topics = document_topics(*out.model, *job.fs, train_split);
        out.rows = evaluate_cells(job.spec, *out.model, *job.fs, topics, input.train_gold, grid);
        return out;
    };

    std::vector<SweepRow> rows;
    const std::size_t threads = std::max<std::size_t>(1, options.threads);
    for (std::size_t start = 0; start < jobs.size(); start += threads) {
        const std::size_t end = std::min(jobs.size(), start + threads);
        std::vector<FitOutcome> outcomes(end - start);
        if (threads == 1) {
            outcomes[0] = run(jobs[start]);
        } else {
            std::vector<std::future<FitOutcome>> futures;
            for (std::size_t j = start; j < end; ++j) futures.push_back(std::async(std::launch::async, run, std::cref(jobs[j])));
            for (std::size_t j = start; j < end; ++j) outcomes[j - start] = futures[j - start].get();
        }
        for (std::size_t j = start; j < end; ++j) {
            auto& outcome = outcomes[j - start];
            if (!outcome.model) continue;
            spdlog::info("fit {}: {} topics={} min_df={} -> {} cells", jobs[j].spec.index,
                         tm::to_string(jobs[j].spec.kind), jobs[j].spec.num_topics, jobs[j].spec.min_doc_freq,
                         outcome.rows.size());
            if (options.on_fit) options.on_fit(jobs[j].spec, *jobs[j].fs, *outcome.model);
            rows.insert(rows.end(), std::make_move_iterator(outcome.rows.begin()),
                        std::make_move_iterator(outcome.rows.end()));
        }
    }
    if (rows.empty()) throw Error(ErrorCode::NoFeasibleConfig, "every model fit in the grid failed");
    return rows;
}

namespace {

// Returns true when a should be preferred over b; ties fall through to the
// smaller model and then to grid order (stable scan keeps the earlier row).
template <typename... Keys>
bool prefer(const SweepRow& a, const SweepRow& b, Keys... keys) {
    bool decided = false;
    bool result = false;
    auto check = [&](auto key) {
        if (decided) return;
        const double ka = key(a);
        const double kb = key(b);
        if (ka != kb) {
            decided = true;
            result = ka > kb;
        }
    };
    (check(keys), ...);
    if (!decided && a.fit.num_topics != b.fit.num_topics) return a.fit.num_topics < b.fit.num_topics;
    return result;
}

template <typename Pred, typename... Keys>
std::optional<std::size_t> argbest(std::span<const SweepRow> rows, Pred admissible, Keys... keys) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!admissible(rows[i])) continue;
        if (!best || prefer(rows[i], rows[*best], keys...)) best = i;
    }
    return best;
}

}  // namespace

Variants select_variants(std::span<const SweepRow> rows, const SelectionSettings& settings) {
    if (rows.empty()) throw Error(ErrorCode::EmptyGrid, "no sweep results to select from");
    auto p = [](const SweepRow& r) { return r.metrics.precision; };
    auto r = [](const SweepRow& x) { return x.metrics.recall; };
    auto f1 = [](const SweepRow& x) { return x.metrics.f1; };
    auto any = [](const SweepRow&) { return true; };

    Variants v;
    v.tm_f1 = rows[*argbest(rows, any, f1)];

    if (settings.balanced == BalancedCriterion::MaxMin) {
        auto min_pr = [](const SweepRow& x) { return std::min(x.metrics.precision, x.metrics.recall); };
        v.tm_b = rows[*argbest(rows, any, min_pr, f1)];
    } else {
        auto neg_gap = [](const SweepRow& x) { return -std::abs(x.metrics.precision - x.metrics.recall); };
        auto scored = [](const SweepRow& x) { return x.metrics.f1 > 0.0; };
        auto idx = argbest(rows, scored, neg_gap, f1);
        v.tm_b = idx ? rows[*idx] : v.tm_f1;
    }

    const double floor = settings.recall_floor;
    auto feasible = [floor](const SweepRow& x) { return x.metrics.recall >= floor; };
    if (auto idx = argbest(rows, feasible, p, r, f1)) {
        v.tm_p = rows[*idx];
    } else {
        spdlog::warn("no configuration reaches recall {}; tm_p falls back to the most precise cell", floor);
        v.tm_p = rows[*argbest(rows, any, p, r, f1)];
        v.tm_p_fallback = true;
    }
    return v;
}

namespace {

std::string fmt_double(double x) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, ptr);
}

double parse_double(const std::string& s, std::size_t line) {
    double x = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": bad number '" + s + "'");
    }
    return x;
}

std::size_t parse_size(const std::string& s, std::size_t line) {
    std::size_t x = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": bad count '" + s + "'");
    }
    return x;
}

const std::vector<std::string> kSweepHeader{"fit_index", "kind",  "num_topics", "min_doc_freq", "pos",
                                            "method",    "gamma", "k",          "theta",        "relevant_topics",
                                            "tp",        "fp",    "fn",         "tn",           "precision",
                                            "recall",    "f1"};

}  // namespace

void write_sweep_csv(const std::string& path, std::span<const SweepRow> rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    csv::write_row(out, kSweepHeader);
    for (const auto& r : rows) {
        const bool kp = r.rule.method == PartitionMethod::KeywordProximity;
        csv::write_row(out, {std::to_string(r.fit.index), std::string(tm::to_string(r.fit.kind)),
                             std::to_string(r.fit.num_topics), std::to_string(r.fit.min_doc_freq),
                             text::join({r.fit.pos.begin(), r.fit.pos.end()}, "+"), std::string(to_string(r.rule.method)),
                             kp ? fmt_double(r.rule.gamma) : "", kp ? "" : std::to_string(r.rule.k),
                             fmt_double(r.theta), std::to_string(r.relevant_topics), std::to_string(r.counts.tp),
                             std::to_string(r.counts.fp), std::to_string(r.counts.fn), std::to_string(r.counts.tn),
                             fmt_double(r.metrics.precision), fmt_double(r.metrics.recall),
                             fmt_double(r.metrics.f1)});
    }
}

std::vector<SweepRow> read_sweep_csv(const std::string& path) {
    const auto table = csv::read_file(path);
    if (table.empty() || table.front().fields != kSweepHeader) {
        throw Error(ErrorCode::ParseError, path + ": missing or unexpected sweep header");
    }
    std::vector<SweepRow> rows;
    for (std::size_t i = 1; i < table.size(); ++i) {
        const auto& f = table[i].fields;
        const auto line = table[i].line;
        if (f.size() != kSweepHeader.size()) {
            throw Error(ErrorCode::ParseError, path + ": wrong field count at line " + std::to_string(line));
        }
        SweepRow r;
        r.fit.index = parse_size(f[0], line);
        r.fit.kind = tm::model_kind_from_string(f[1]);
        r.fit.num_topics = parse_size(f[2], line);
        r.fit.min_doc_freq = parse_size(f[3], line);
        for (auto& tag : text::split(f[4], '+')) {
            if (!tag.empty()) r.fit.pos.insert(tag);
        }
        r.rule.method = partition_method_from_string(f[5]);
        if (r.rule.method == PartitionMethod::KeywordProximity) {
            r.rule.gamma = parse_double(f[6], line);
            r.rule.k = 0;
        } else {
            r.rule.k = parse_size(f[7], line);
        }
        r.theta = parse_double(f[8], line);
        r.relevant_topics = parse_size(f[9], line);
        r.counts = {parse_size(f[10], line), parse_size(f[11], line), parse_size(f[12], line), parse_size(f[13], line)};
        r.metrics = compute_metrics(r.counts);
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace hazardtm::classifier
