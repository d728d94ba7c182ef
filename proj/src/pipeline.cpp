#include "hazardtm/pipeline.hpp"

#include <spdlog/spdlog.h>
#include <spdlog/version.h>

#include <boost/version.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

#include "hazardtm/corpus.hpp"
#include "hazardtm/error.hpp"
#include "hazardtm/hash.hpp"
#include "hazardtm/synth.hpp"
#include "hazardtm/text.hpp"

namespace hazardtm::pipeline {

namespace fs = std::filesystem;
namespace tm = topicmodel;
using nlohmann::json;

namespace {

std::string substitute(std::string s, const std::string& hazard) {
    const std::string key = "{hazard}";
    for (auto pos = s.find(key); pos != std::string::npos; pos = s.find(key, pos + hazard.size())) {
        s.replace(pos, key.size(), hazard);
    }
    return s;
}

std::string resolve(const std::string& p, const std::string& base, const std::string& hazard) {
    if (p.empty()) return p;
    fs::path path(substitute(p, hazard));
    if (path.is_relative()) path = fs::path(base) / path;
    return path.lexically_normal().string();
}

tm::Prior prior_from_json(const json& j) {
    if (j.is_string()) {
        if (j.get<std::string>() == "auto") return {};
        throw Error(ErrorCode::ConfigError, "prior must be \"auto\" or a number");
    }
    return tm::Prior::fixed(j.get<double>());
}

features::KeywordMatch keyword_match_from(const std::string& s) {
    if (s == "exact") return features::KeywordMatch::Exact;
    if (s == "substring") return features::KeywordMatch::Substring;
    throw Error(ErrorCode::ConfigError, "keyword_match must be exact or substring");
}

template <typename T>
void read_if(const json& j, const char* key, T& target) {
    if (j.contains(key)) target = j.at(key).get<T>();
}

}  // namespace

PipelineConfig config_from_json(const json& j, const std::string& base_dir,
                                const std::optional<std::string>& hazard_override) {
    PipelineConfig cfg;
    try {
        cfg.hazard = hazard_override ? *hazard_override : j.at("hazard").get<std::string>();
        read_if(j, "seed", cfg.seed);
        read_if(j, "threads", cfg.threads);
        read_if(j, "save_fits", cfg.save_fits);
        if (j.contains("paths")) {
            const auto& p = j.at("paths");
            read_if(p, "corpus", cfg.paths.corpus);
            read_if(p, "hazard_config", cfg.paths.hazard_config);
            read_if(p, "gazetteer", cfg.paths.gazetteer);
            read_if(p, "stopwords", cfg.paths.stopwords);
            read_if(p, "gold", cfg.paths.gold);
            read_if(p, "output_dir", cfg.paths.output_dir);
        }
        for (auto* p : {&cfg.paths.corpus, &cfg.paths.hazard_config, &cfg.paths.gazetteer, &cfg.paths.stopwords,
                        &cfg.paths.gold, &cfg.paths.output_dir}) {
            *p = resolve(*p, base_dir, cfg.hazard);
        }
        if (j.contains("dedup")) {
            const auto& d = j.at("dedup");
            read_if(d, "num_hashes", cfg.dedup.num_hashes);
            read_if(d, "shingle_size", cfg.dedup.shingle_size);
            read_if(d, "threshold", cfg.dedup.threshold);
            read_if(d, "bands", cfg.dedup.lsh.bands);
            read_if(d, "rows", cfg.dedup.lsh.rows);
        }
        if (j.contains("features")) {
            const auto& f = j.at("features");
            read_if(f, "min_doc_freq", cfg.features.min_doc_freq);
            if (f.contains("pos")) cfg.features.allowed_pos = f.at("pos").get<std::set<std::string>>();
            if (f.contains("keyword_match")) {
                cfg.features.keyword_match = keyword_match_from(f.at("keyword_match").get<std::string>());
            }
        }
        cfg.grid.keyword_match = cfg.features.keyword_match;
        if (j.contains("lda")) {
            const auto& l = j.at("lda");
            auto& lda = cfg.grid.lda;
            read_if(l, "iterations", lda.iterations);
            read_if(l, "passes", lda.passes);
            read_if(l, "burn_in", lda.burn_in);
            read_if(l, "infer_samples", lda.infer_samples);
            if (l.contains("alpha")) lda.alpha = prior_from_json(l.at("alpha"));
            if (l.contains("eta")) lda.eta = prior_from_json(l.at("eta"));
        }
        if (j.contains("nmf")) {
            const auto& n = j.at("nmf");
            read_if(n, "max_iters", cfg.grid.nmf.max_iters);
            read_if(n, "tol", cfg.grid.nmf.tol);
            read_if(n, "infer_iters", cfg.grid.nmf.infer_iters);
        }
        cfg.grid.lda.seed = cfg.seed;
        cfg.grid.nmf.seed = cfg.seed;
        if (j.contains("train")) {
            const auto& t = j.at("train");
            if (t.contains("kind")) cfg.train.kind = tm::model_kind_from_string(t.at("kind").get<std::string>());
            read_if(t, "num_topics", cfg.train.num_topics);
        }
        if (j.contains("grid")) {
            const auto& g = j.at("grid");
            read_if(g, "min_doc_freqs", cfg.grid.min_doc_freqs);
            read_if(g, "pos_sets", cfg.grid.pos_sets);
            read_if(g, "num_topics", cfg.grid.num_topics);
            if (g.contains("kinds")) {
                cfg.grid.kinds.clear();
                for (const auto& k : g.at("kinds")) cfg.grid.kinds.push_back(tm::model_kind_from_string(k.get<std::string>()));
            }
            if (g.contains("methods")) {
                cfg.grid.methods.clear();
                for (const auto& m : g.at("methods")) {
                    cfg.grid.methods.push_back(classifier::partition_method_from_string(m.get<std::string>()));
                }
            }
            read_if(g, "thetas", cfg.grid.thetas);
            read_if(g, "gammas", cfg.grid.gammas);
            read_if(g, "ks", cfg.grid.ks);
        }
        if (j.contains("selection")) {
            const auto& s = j.at("selection");
            read_if(s, "recall_floor", cfg.selection.recall_floor);
            if (s.contains("balanced")) {
                const auto b = s.at("balanced").get<std::string>();
                if (b == "max_min") {
                    cfg.selection.balanced = classifier::BalancedCriterion::MaxMin;
                } else if (b == "min_abs_diff") {
                    cfg.selection.balanced = classifier::BalancedCriterion::MinAbsDiff;
                } else {
                    throw Error(ErrorCode::ConfigError, "selection.balanced must be max_min or min_abs_diff");
                }
            }
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ConfigError, std::string("pipeline config: ") + e.what());
    }
    cfg.source = j;
    if (hazard_override) cfg.source["hazard"] = *hazard_override;
    return cfg;
}

PipelineConfig load_config(const std::string& path, const std::optional<std::string>& hazard_override) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot read config " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ConfigError, path + ": " + e.what());
    }
    return config_from_json(j, fs::absolute(path).parent_path().string(), hazard_override);
}

void apply_environment(PipelineConfig& cfg) {
    if (const char* dir = std::getenv("HAZARDTM_OUTPUT_DIR"); dir && *dir) {
        cfg.paths.output_dir = resolve(dir, fs::current_path().string(), cfg.hazard);
    }
    if (const char* threads = std::getenv("HAZARDTM_THREADS"); threads && *threads) {
        try {
            cfg.threads = std::stoul(threads);
        } catch (const std::exception&) {
            throw Error(ErrorCode::ConfigError, "HAZARDTM_THREADS must be a positive integer");
        }
    }
}

void PipelineConfig::validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::ConfigError, msg); };
    if (hazard.empty()) fail("hazard id is empty");
    if (paths.output_dir.empty()) fail("output_dir is empty");
    if (dedup.num_hashes == 0 || dedup.shingle_size == 0) fail("dedup num_hashes and shingle_size must be > 0");
    if (!(dedup.threshold > 0.0 && dedup.threshold <= 1.0)) fail("dedup threshold must lie in (0, 1]");
    if (dedup.lsh.bands * dedup.lsh.rows == 0 || dedup.lsh.bands * dedup.lsh.rows > dedup.num_hashes) {
        fail("LSH bands x rows must be between 1 and num_hashes");
    }
    if (features.min_doc_freq < 1) fail("min_doc_freq must be >= 1");
    if (train.num_topics < 1) fail("train.num_topics must be >= 1");
    if (threads < 1) fail("threads must be >= 1");
    grid.lda.validate();
    grid.nmf.validate();
    if (grid.min_doc_freqs.empty() || grid.num_topics.empty() || grid.kinds.empty() || grid.methods.empty() ||
        grid.thetas.empty()) {
        fail("sweep grid has an empty axis");
    }
    for (auto m : grid.methods) {
        if (m == classifier::PartitionMethod::TopTerms && grid.ks.empty()) fail("grid ks is empty");
        if (m == classifier::PartitionMethod::KeywordProximity && grid.gammas.empty()) fail("grid gammas is empty");
    }
    for (auto m : grid.min_doc_freqs) {
        if (m < 1) fail("grid min_doc_freqs must be >= 1");
    }
    for (auto k : grid.num_topics) {
        if (k < 1) fail("grid num_topics must be >= 1");
    }
    for (double t : grid.thetas) {
        if (!(t >= 0.0 && t <= 1.0)) fail("grid thetas must lie in [0, 1]");
    }
    for (double g : grid.gammas) {
        if (!(g > 0.0 && g < 1.0)) fail("grid gammas must lie in (0, 1)");
    }
    for (auto k : grid.ks) {
        if (k < 1) fail("grid ks must be >= 1");
    }
    if (!(selection.recall_floor >= 0.0 && selection.recall_floor <= 1.0)) fail("recall_floor must lie in [0, 1]");
}

std::uint64_t PipelineConfig::checksum() const { return fnv1a64(source.dump()); }

void set_log_level(LogLevel level) {
    switch (level) {
        case LogLevel::Quiet: spdlog::set_level(spdlog::level::warn); break;
        case LogLevel::Normal: spdlog::set_level(spdlog::level::info); break;
        case LogLevel::Debug: spdlog::set_level(spdlog::level::debug); break;
    }
}

const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names{"ingest", "dedup",    "featurize", "train",       "sweep", "select",
                                                "classify", "evaluate", "ensemble", "dump-topics", "synth"};
    return names;
}

namespace {

struct Context {
    const PipelineConfig& cfg;
    const RunOptions& opts;
    fs::path out;
    std::vector<std::string> written;

    std::string at(const std::string& name) const { return (out / name).string(); }
    void wrote(const std::string& path) { written.push_back(fs::relative(path, out).string()); }
};

void require_file(const std::string& path, const std::string& what) {
    if (path.empty()) throw Error(ErrorCode::ConfigError, what + " path is not configured");
    if (!fs::exists(path)) throw Error(ErrorCode::IoError, what + " not found: " + path);
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
    std::vector<std::string> out;
    for (std::string line; std::getline(in, line);) {
        if (!line.empty()) out.push_back(line);
    }
    return out;
}

corpus::HazardConfig hazard_config(const PipelineConfig& cfg) {
    return corpus::load_hazard_config(cfg.paths.hazard_config, cfg.paths.gazetteer);
}

std::set<std::string> unique_ids(const Context& ctx) {
    const auto lines = read_lines(ctx.at(artifact::kUniqueIds));
    return {lines.begin(), lines.end()};
}

std::vector<features::TokenizedDocument> unique_docs(const Context& ctx) {
    const auto ids = unique_ids(ctx);
    std::vector<features::TokenizedDocument> out;
    for (auto& d : features::read_tokenized_jsonl(ctx.at(artifact::kTokens))) {
        if (ids.contains(d.doc_id)) out.push_back(std::move(d));
    }
    return out;
}

void do_ingest(Context& ctx) {
    const auto hc = hazard_config(ctx.cfg);
    auto result = corpus::ingest(corpus::read_jsonl(ctx.cfg.paths.corpus), hc);
    corpus::write_jsonl(ctx.at(artifact::kCleanCorpus), result.kept);
    corpus::write_rejections_csv(ctx.at(artifact::kRejections), result.rejected);
    ctx.wrote(ctx.at(artifact::kCleanCorpus));
    ctx.wrote(ctx.at(artifact::kRejections));
    spdlog::info("ingest: kept {}, rejected {}, exact duplicates {}, extra segments {}", result.kept.size(),
                 result.rejected.size(), result.exact_duplicates, result.segments_created);
}

void do_dedup(Context& ctx) {
    const auto docs = corpus::read_jsonl(ctx.at(artifact::kCleanCorpus));
    const auto& p = ctx.cfg.dedup;
    std::vector<dedup::MinHashSignature> sigs;
    std::vector<std::string> shingle_less;
    for (const auto& d : docs) {
        const auto tokens = text::tokenize(text::to_lower(d.text));
        const auto sh = dedup::shingles(tokens, p.shingle_size);
        if (sh.empty()) {
            shingle_less.push_back(d.id);
            continue;
        }
        sigs.push_back(dedup::signature(sh, p.num_hashes, ctx.cfg.seed, d.id));
    }
    for (const auto& id : shingle_less) spdlog::warn("dedup: '{}' has no shingles and is kept as unique", id);
    const auto groups = dedup::group_duplicates(sigs, p.threshold, p.lsh);
    dedup::write_signatures(ctx.at(artifact::kSignatures), sigs);
    dedup::write_groups_csv(ctx.at(artifact::kGroups), groups);
    auto reps = groups.representative_ids();
    reps.insert(reps.end(), shingle_less.begin(), shingle_less.end());
    std::sort(reps.begin(), reps.end());
    std::ofstream out(ctx.at(artifact::kUniqueIds), std::ios::binary);
    for (const auto& id : reps) out << id << '\n';
    out.close();
    for (const char* name : {artifact::kSignatures, artifact::kGroups, artifact::kUniqueIds}) ctx.wrote(ctx.at(name));
    spdlog::info("dedup: {} documents, {} unique", docs.size(), reps.size());
}

void do_featurize(Context& ctx) {
    require_file(ctx.cfg.paths.stopwords, "stopword list");
    const auto stop = features::load_stopwords(ctx.cfg.paths.stopwords);
    const auto docs = corpus::read_jsonl(ctx.at(artifact::kCleanCorpus));
    std::vector<features::TokenizedDocument> tokenized;
    tokenized.reserve(docs.size());
    for (const auto& d : docs) tokenized.push_back(features::normalize_tokens(d, stop));
    features::write_tokenized_jsonl(ctx.at(artifact::kTokens), tokenized);
    ctx.wrote(ctx.at(artifact::kTokens));

    const auto unique = unique_docs(ctx);
    const auto fs_ = features::build_feature_space(unique, hazard_config(ctx.cfg).keywords, ctx.cfg.features);
    fs_.save(ctx.at(artifact::kFeatures));
    features::vectorize(unique, fs_, features::Weighting::Counts).save(ctx.at(artifact::kCounts));
    features::vectorize(unique, fs_, features::Weighting::TfIdf).save(ctx.at(artifact::kTfIdf));
    for (const char* name : {artifact::kFeatures, artifact::kCounts, artifact::kTfIdf}) ctx.wrote(ctx.at(name));
    spdlog::info("featurize: {} documents, {} features ({} keywords)", tokenized.size(), fs_.size(),
                 fs_.keyword_indices().size());
}

void do_train(Context& ctx) {
    const auto& t = ctx.cfg.train;
    tm::FitLog log;
    tm::TopicModel model;
    if (t.kind == tm::ModelKind::LDA) {
        auto lda = ctx.cfg.grid.lda;
        lda.num_topics = t.num_topics;
        lda.check_invariants = lda.check_invariants || ctx.opts.log == LogLevel::Debug;
        model = tm::fit_lda(features::DocTermMatrix::load(ctx.at(artifact::kCounts)), lda, &log);
    } else {
        auto nmf = ctx.cfg.grid.nmf;
        nmf.num_topics = t.num_topics;
        model = tm::fit_nmf(features::DocTermMatrix::load(ctx.at(artifact::kTfIdf)), nmf, &log);
        if (log.monotonicity_violations > 0) {
            spdlog::warn("train: NMF objective rose in {} iterations", log.monotonicity_violations);
        }
    }
    model.save(ctx.at(artifact::kModel));
    ctx.wrote(ctx.at(artifact::kModel));
    spdlog::info("train: {} with {} topics on {} documents ({} sweeps/iterations, {} invariant checks)",
                 tm::to_string(t.kind), t.num_topics, model.num_docs(),
                 t.kind == tm::ModelKind::LDA ? log.sweeps : log.objective.size(), log.invariant_checks);
}

std::string fit_model_path(std::size_t index) { return "models/fit_" + std::to_string(index) + ".bin"; }
std::string fit_features_path(std::size_t index) { return "features/fit_" + std::to_string(index) + ".tsv"; }

void do_sweep(Context& ctx) {
    require_file(ctx.cfg.paths.gold, "gold label file");
    const auto gold = eval::read_gold_csv(ctx.cfg.paths.gold);
    const auto all = features::read_tokenized_jsonl(ctx.at(artifact::kTokens));

    classifier::SweepInput input;
    input.corpus = all;
    input.training_ids = unique_ids(ctx);
    input.keywords = hazard_config(ctx.cfg).keywords;
    for (const auto& g : gold) {
        if (g.split == eval::Split::Train && g.hazard == ctx.cfg.hazard) input.train_gold.emplace(g.doc_id, g.relevant);
    }
    auto grid = ctx.cfg.grid;
    grid.lda.check_invariants = grid.lda.check_invariants || ctx.opts.log == LogLevel::Debug;

    classifier::SweepOptions options;
    options.threads = ctx.cfg.threads;
    if (ctx.cfg.save_fits) {
        fs::create_directories(ctx.out / "models");
        fs::create_directories(ctx.out / "features");
        options.on_fit = [&ctx](const classifier::FitSpec& spec, const features::FeatureSpace& fsp,
                                const tm::TopicModel& model) {
            model.save(ctx.at(fit_model_path(spec.index)));
            fsp.save(ctx.at(fit_features_path(spec.index)));
            ctx.wrote(ctx.at(fit_model_path(spec.index)));
            ctx.wrote(ctx.at(fit_features_path(spec.index)));
        };
    }
    const auto rows = classifier::sweep(input, grid, options);
    classifier::write_sweep_csv(ctx.at(artifact::kSweep), rows);
    ctx.wrote(ctx.at(artifact::kSweep));
    spdlog::info("sweep: {} cells over {} train documents", rows.size(), input.train_gold.size());
}

json variant_json(const std::string& name, const classifier::SweepRow& r, bool fallback) {
    json j{{"variant", name},
           {"model", fit_model_path(r.fit.index)},
           {"features", fit_features_path(r.fit.index)},
           {"fit_index", r.fit.index},
           {"kind", tm::to_string(r.fit.kind)},
           {"num_topics", r.fit.num_topics},
           {"min_doc_freq", r.fit.min_doc_freq},
           {"pos", r.fit.pos},
           {"method", classifier::to_string(r.rule.method)},
           {"theta", r.theta},
           {"relevant_topics", r.relevant_topics},
           {"train", {{"precision", r.metrics.precision}, {"recall", r.metrics.recall}, {"f1", r.metrics.f1}}},
           {"recall_floor_fallback", fallback}};
    if (r.rule.method == classifier::PartitionMethod::KeywordProximity) {
        j["gamma"] = r.rule.gamma;
    } else {
        j["k"] = r.rule.k;
    }
    return j;
}

void do_select(Context& ctx) {
    const auto rows = classifier::read_sweep_csv(ctx.at(artifact::kSweep));
    const auto v = classifier::select_variants(rows, ctx.cfg.selection);
    fs::create_directories(ctx.out / "variants");
    for (const auto& [name, row, fallback] :
         {std::tuple{"tm_f1", v.tm_f1, false}, std::tuple{"tm_b", v.tm_b, false},
          std::tuple{"tm_p", v.tm_p, v.tm_p_fallback}}) {
        const auto path = ctx.at(std::string("variants/") + name + ".json");
        std::ofstream out(path, std::ios::binary);
        out << variant_json(name, row, fallback).dump(2) << '\n';
        ctx.wrote(path);
        const auto rule = row.rule.method == classifier::PartitionMethod::TopTerms
                              ? fmt::format("top_terms k={}", row.rule.k)
                              : fmt::format("keyword_proximity gamma={}", row.rule.gamma);
        spdlog::info("select: {} -> fit {} ({} {} topics), {}, theta {}: train P={:.3f} R={:.3f} F1={:.3f}", name,
                     row.fit.index, tm::to_string(row.fit.kind), row.fit.num_topics, rule, row.theta,
                     row.metrics.precision, row.metrics.recall, row.metrics.f1);
    }
}

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, path + ": " + e.what());
    }
}

void do_classify(Context& ctx) {
    const auto docs = features::read_tokenized_jsonl(ctx.at(artifact::kTokens));
    fs::create_directories(ctx.out / "predictions");
    for (const auto& name : ctx.opts.variants) {
        const auto vpath = ctx.at("variants/" + name + ".json");
        const auto v = read_json(vpath);
        const auto model_path = ctx.at(v.at("model").get<std::string>());
        const auto features_path = ctx.at(v.at("features").get<std::string>());
        require_file(model_path, "model of variant " + name);
        const auto model = tm::TopicModel::load(model_path);
        const auto fsp = features::FeatureSpace::load(features_path);
        classifier::ClassifierConfig cc;
        cc.theta = v.at("theta").get<double>();
        const auto method = classifier::partition_method_from_string(v.at("method").get<std::string>());
        cc.rule = method == classifier::PartitionMethod::KeywordProximity
                      ? classifier::PartitionRule::keyword_proximity(v.at("gamma").get<double>())
                      : classifier::PartitionRule::top_terms(v.at("k").get<std::size_t>());
        const auto partition = classifier::partition_topics(model, fsp, cc.rule);
        const auto topics = classifier::document_topics(model, fsp, docs);
        const auto pred = classifier::classify(topics, partition, cc, name);
        const auto out = ctx.at("predictions/" + name + ".csv");
        eval::write_predictions_csv(out, pred);
        ctx.wrote(out);
        const auto positives = std::count_if(pred.predictions.begin(), pred.predictions.end(),
                                             [](const auto& p) { return p.second == 1; });
        spdlog::info("classify: {} labels {} of {} documents relevant ({} relevant topics)", name, positives,
                     pred.predictions.size(), partition.relevant_topics.size());
    }
}

std::string source_name(const std::string& path) { return fs::path(path).stem().string(); }

std::vector<std::string> default_predictions(const Context& ctx) {
    std::vector<std::string> out;
    const auto dir = ctx.out / "predictions";
    if (fs::exists(dir)) {
        for (const auto& e : fs::directory_iterator(dir)) {
            if (e.path().extension() == ".csv") out.push_back(e.path().string());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

void do_evaluate(Context& ctx) {
    require_file(ctx.cfg.paths.gold, "gold label file");
    std::vector<eval::GoldLabel> gold;
    for (auto& g : eval::read_gold_csv(ctx.cfg.paths.gold)) {
        if (g.hazard == ctx.cfg.hazard) gold.push_back(std::move(g));
    }
    std::vector<eval::EvalReport> reports{eval::baseline(gold, ctx.opts.split)};
    const auto files = ctx.opts.predictions.empty() ? default_predictions(ctx) : ctx.opts.predictions;
    for (const auto& f : files) {
        reports.push_back(eval::evaluate(eval::import_external(f, source_name(f)), gold, ctx.opts.split));
    }
    const auto textual = eval::render_text(reports);
    std::ofstream(ctx.at(artifact::kReportText), std::ios::binary) << textual;
    json j = json::array();
    for (const auto& r : reports) j.push_back(eval::to_json(r));
    std::ofstream(ctx.at(artifact::kReportJson), std::ios::binary) << j.dump(2) << '\n';
    ctx.wrote(ctx.at(artifact::kReportText));
    ctx.wrote(ctx.at(artifact::kReportJson));
    if (ctx.opts.log != LogLevel::Quiet) std::fputs(textual.c_str(), stdout);
}

void do_ensemble(Context& ctx) {
    std::vector<std::string> files = ctx.opts.predictions;
    if (files.empty()) {
        for (const auto* v : {"tm_f1", "tm_b", "tm_p"}) files.push_back(ctx.at(std::string("predictions/") + v + ".csv"));
    }
    if (files.size() != 3) {
        throw Error(ErrorCode::ConfigError, "ensemble needs exactly 3 prediction files, got " +
                                                std::to_string(files.size()));
    }
    std::vector<eval::PredictionSet> preds;
    for (const auto& f : files) preds.push_back(eval::import_external(f, source_name(f)));
    const auto vote = eval::majority_vote(preds);
    fs::create_directories(ctx.out / "predictions");
    const auto out = ctx.at("predictions/majority.csv");
    eval::write_predictions_csv(out, vote);
    ctx.wrote(out);
}

void do_dump_topics(Context& ctx) {
    const auto model_path = ctx.opts.model.empty() ? ctx.at(artifact::kModel) : ctx.opts.model;
    const auto features_path = ctx.opts.features.empty() ? ctx.at(artifact::kFeatures) : ctx.opts.features;
    require_file(model_path, "model");
    require_file(features_path, "feature space");
    const auto model = tm::TopicModel::load(model_path);
    const auto fsp = features::FeatureSpace::load(features_path);
    if (fsp.checksum() != model.fs_checksum) {
        throw Error(ErrorCode::FeatureSpaceMismatch, "feature space does not belong to the model");
    }
    tm::write_topics_csv(ctx.at(artifact::kTopics), model, fsp, ctx.opts.top_n);
    ctx.wrote(ctx.at(artifact::kTopics));
    if (ctx.opts.theta_topic) {
        std::map<std::string, int> gold;
        if (!ctx.cfg.paths.gold.empty() && fs::exists(ctx.cfg.paths.gold)) {
            for (const auto& g : eval::read_gold_csv(ctx.cfg.paths.gold)) gold.emplace(g.doc_id, g.relevant);
        }
        std::vector<classifier::DocumentTopics> docs;
        for (const auto& id : model.doc_ids) docs.push_back({id, tm::infer_topics(model, id)});
        eval::write_theta_curve_csv(ctx.at(artifact::kThetaCurve), docs, *ctx.opts.theta_topic, gold);
        ctx.wrote(ctx.at(artifact::kThetaCurve));
    }
}

void do_synth(Context& ctx) {
    synth::SynthConfig sc;
    sc.hazard = ctx.cfg.hazard;
    sc.seed = ctx.cfg.seed;
    const auto corpus = synth::generate(sc);
    synth::write(ctx.out.string(), corpus);
    for (const char* name : {"corpus.jsonl", "gold.csv", "hazard.json", "gazetteer.json", "stopwords.txt",
                             "pipeline.json"}) {
        ctx.wrote(ctx.at(name));
    }
    spdlog::info("synth: {} documents written to {}", corpus.docs.size(), ctx.out.string());
}

void check_inputs(const std::string& sub, const PipelineConfig& cfg) {
    if (sub == "ingest") {
        require_file(cfg.paths.corpus, "corpus");
        require_file(cfg.paths.hazard_config, "hazard config");
        if (!cfg.paths.gazetteer.empty()) require_file(cfg.paths.gazetteer, "gazetteer");
    }
    if (sub == "featurize" || sub == "sweep") require_file(cfg.paths.hazard_config, "hazard config");
    if (sub == "featurize") require_file(cfg.paths.stopwords, "stopword list");
    if (sub == "sweep" || sub == "evaluate") require_file(cfg.paths.gold, "gold label file");

    // artifacts an earlier stage must have produced
    static const std::map<std::string, std::vector<const char*>> upstream{
        {"dedup", {artifact::kCleanCorpus}},
        {"featurize", {artifact::kCleanCorpus, artifact::kUniqueIds}},
        {"train", {artifact::kCounts, artifact::kTfIdf, artifact::kFeatures}},
        {"sweep", {artifact::kTokens, artifact::kUniqueIds}},
        {"select", {artifact::kSweep}},
        {"classify", {artifact::kTokens}},
    };
    if (auto it = upstream.find(sub); it != upstream.end()) {
        for (const char* name : it->second) {
            require_file((fs::path(cfg.paths.output_dir) / name).string(), std::string(name) + " (run an earlier stage)");
        }
    }
}

void write_manifest(const Context& ctx, const std::string& sub) {
    json versions{{"hazardtm", kVersion},
                  {"spdlog", std::to_string(SPDLOG_VER_MAJOR) + "." + std::to_string(SPDLOG_VER_MINOR) + "." +
                                 std::to_string(SPDLOG_VER_PATCH)},
                  {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                        std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                        std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                  {"boost", BOOST_LIB_VERSION}};
    for (const auto& [k, v] : ctx.opts.versions) versions[k] = v;
    char checksum[17];
    std::snprintf(checksum, sizeof checksum, "%016llx", static_cast<unsigned long long>(ctx.cfg.checksum()));
    json m{{"subcommand", sub},
           {"hazard", ctx.cfg.hazard},
           {"seed", ctx.cfg.seed},
           {"config_checksum", checksum},
           {"config", ctx.cfg.source},
           {"args", ctx.opts.args},
           {"versions", versions},
           {"outputs", ctx.written}};
    std::ofstream out(ctx.out / ("manifest_" + sub + ".json"), std::ios::binary);
    out << m.dump(2) << '\n';
}

}  // namespace

void run(const std::string& subcommand, PipelineConfig cfg, const RunOptions& opts) {
    if (std::find(subcommands().begin(), subcommands().end(), subcommand) == subcommands().end()) {
        throw Error(ErrorCode::ConfigError, "unknown subcommand '" + subcommand + "'");
    }
    cfg.validate();
    check_inputs(subcommand, cfg);
    set_log_level(opts.log);

    Context ctx{cfg, opts, fs::path(cfg.paths.output_dir), {}};
    fs::create_directories(ctx.out);
    if (subcommand == "ingest") do_ingest(ctx);
    else if (subcommand == "dedup") do_dedup(ctx);
    else if (subcommand == "featurize") do_featurize(ctx);
    else if (subcommand == "train") do_train(ctx);
    else if (subcommand == "sweep") do_sweep(ctx);
    else if (subcommand == "select") do_select(ctx);
    else if (subcommand == "classify") do_classify(ctx);
    else if (subcommand == "evaluate") do_evaluate(ctx);
    else if (subcommand == "ensemble") do_ensemble(ctx);
    else if (subcommand == "dump-topics") do_dump_topics(ctx);
    else do_synth(ctx);
    write_manifest(ctx, subcommand);
}

}  // namespace hazardtm::pipeline
