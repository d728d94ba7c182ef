#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>

#include "hazardtm/error.hpp"
#include "hazardtm/pipeline.hpp"
#include "hazardtm/synth.hpp"
#include "test_util.hpp"

using namespace hazardtm;
using namespace hazardtm::pipeline;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json minimal() {
    return json{{"hazard", "flood"},
                {"paths",
                 {{"corpus", "data/{hazard}.jsonl"},
                  {"hazard_config", "/abs/{hazard}.json"},
                  {"output_dir", "out/{hazard}"}}}};
}

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorCode::ConfigError;
}

}  // namespace

TEST(Config, ResolvesPathsAndPlaceholders) {
    const auto cfg = config_from_json(minimal(), "/base");
    EXPECT_EQ(cfg.paths.corpus, "/base/data/flood.jsonl");
    EXPECT_EQ(cfg.paths.hazard_config, "/abs/flood.json");
    EXPECT_EQ(cfg.paths.output_dir, "/base/out/flood");
    EXPECT_EQ(cfg.paths.gold, "");
    const auto drought = config_from_json(minimal(), "/base", "drought");
    EXPECT_EQ(drought.hazard, "drought");
    EXPECT_EQ(drought.paths.corpus, "/base/data/drought.jsonl");
    EXPECT_EQ(drought.source["hazard"], "drought");
    EXPECT_NE(drought.checksum(), cfg.checksum());
}

TEST(Config, ReadsSections) {
    auto j = minimal();
    j["seed"] = 9;
    j["lda"] = {{"iterations", 300}, {"alpha", 0.2}, {"eta", "auto"}};
    j["nmf"] = {{"max_iters", 50}};
    j["train"] = {{"kind", "nmf"}, {"num_topics", 7}};
    j["grid"] = {{"num_topics", {3, 4}}, {"kinds", {"lda"}}, {"methods", {"keyword_proximity"}}, {"ks", {2}}};
    j["selection"] = {{"recall_floor", 0.1}, {"balanced", "min_abs_diff"}};
    j["features"] = {{"min_doc_freq", 3}, {"pos", {"NOUN"}}, {"keyword_match", "substring"}};
    const auto cfg = config_from_json(j, "/b");
    EXPECT_EQ(cfg.seed, 9u);
    EXPECT_EQ(cfg.grid.lda.seed, 9u);
    EXPECT_EQ(cfg.grid.nmf.seed, 9u);
    EXPECT_EQ(cfg.grid.lda.iterations, 300u);
    EXPECT_EQ(cfg.grid.nmf.max_iters, 50u);
    EXPECT_EQ(cfg.train.kind, topicmodel::ModelKind::NMF);
    EXPECT_EQ(cfg.train.num_topics, 7u);
    EXPECT_EQ(cfg.grid.num_topics, (std::vector<std::size_t>{3, 4}));
    EXPECT_EQ(cfg.grid.methods, (std::vector<classifier::PartitionMethod>{classifier::PartitionMethod::KeywordProximity}));
    EXPECT_EQ(cfg.selection.balanced, classifier::BalancedCriterion::MinAbsDiff);
    EXPECT_EQ(cfg.features.allowed_pos, (std::set<std::string>{"NOUN"}));
    EXPECT_EQ(cfg.grid.keyword_match, features::KeywordMatch::Substring);
    EXPECT_NO_THROW(cfg.validate());
}

TEST(Config, RejectsBadValues) {
    auto j = minimal();
    j.erase("hazard");
    EXPECT_EQ(code_of([&] { config_from_json(j, "/b"); }), ErrorCode::ConfigError);
    j = minimal();
    j["seed"] = "nine";
    EXPECT_EQ(code_of([&] { config_from_json(j, "/b"); }), ErrorCode::ConfigError);
    j = minimal();
    j["selection"] = {{"balanced", "median"}};
    EXPECT_EQ(code_of([&] { config_from_json(j, "/b"); }), ErrorCode::ConfigError);

    const std::vector<std::pair<const char*, json>> invalid{
        {"dedup", {{"threshold", 1.5}}},  {"features", {{"min_doc_freq", 0}}}, {"grid", {{"num_topics", json::array()}}},
        {"grid", {{"gammas", {1.0}}}},    {"grid", {{"thetas", {-0.1}}}},     {"grid", {{"ks", {0}}}},
        {"selection", {{"recall_floor", 2}}}, {"threads", 0},
    };
    for (const auto& [key, value] : invalid) {
        auto bad = minimal();
        bad[key] = value;
        const auto cfg = config_from_json(bad, "/b");
        EXPECT_EQ(code_of([&] { cfg.validate(); }), ErrorCode::ConfigError) << key << " " << value;
    }
}

TEST(Config, LoadReportsSyntaxErrors) {
    testutil::TempDir tmp;
    testutil::write_file(tmp.file("p.json"), "{ \"hazard\": ");
    EXPECT_EQ(code_of([&] { load_config(tmp.file("p.json")); }), ErrorCode::ConfigError);
    EXPECT_EQ(code_of([&] { load_config(tmp.file("absent.json")); }), ErrorCode::IoError);
}

TEST(Config, EnvironmentOverrides) {
    auto cfg = config_from_json(minimal(), "/b");
    ::setenv("HAZARDTM_OUTPUT_DIR", "/elsewhere/{hazard}", 1);
    ::setenv("HAZARDTM_THREADS", "3", 1);
    apply_environment(cfg);
    EXPECT_EQ(cfg.paths.output_dir, "/elsewhere/flood");
    EXPECT_EQ(cfg.threads, 3u);
    ::setenv("HAZARDTM_THREADS", "many", 1);
    EXPECT_THROW(apply_environment(cfg), Error);
    ::unsetenv("HAZARDTM_OUTPUT_DIR");
    ::unsetenv("HAZARDTM_THREADS");
}

TEST(Run, ValidatesBeforeDoingWork) {
    testutil::TempDir tmp;
    auto j = minimal();
    j["paths"]["output_dir"] = "out";
    auto cfg = config_from_json(j, tmp.path());
    RunOptions opts;
    opts.log = LogLevel::Quiet;
    EXPECT_EQ(code_of([&] { run("ingest", cfg, opts); }), ErrorCode::IoError);
    EXPECT_FALSE(fs::exists(tmp.file("out")));
    EXPECT_EQ(code_of([&] { run("bogus", cfg, opts); }), ErrorCode::ConfigError);
    cfg.grid.ks.clear();
    EXPECT_EQ(code_of([&] { run("train", cfg, opts); }), ErrorCode::ConfigError);
    EXPECT_FALSE(fs::exists(tmp.file("out")));
}

TEST(Run, SmallEndToEnd) {
    testutil::TempDir tmp;
    synth::SynthConfig sc;
    sc.num_docs = 200;
    synth::write(tmp.path(), synth::generate(sc));
    auto cfg = load_config(tmp.file("pipeline.json"));
    cfg.grid.min_doc_freqs = {2};
    cfg.grid.num_topics = {5};
    cfg.grid.lda.iterations = 100;
    cfg.grid.lda.passes = 5;
    RunOptions opts;
    opts.log = LogLevel::Quiet;
    opts.args = {"hazardtm", "test"};
    for (const auto& sub : {"ingest", "dedup", "featurize", "train", "sweep", "select", "classify", "ensemble",
                            "evaluate", "dump-topics"}) {
        ASSERT_NO_THROW(run(sub, cfg, opts)) << sub;
        EXPECT_TRUE(fs::exists(fs::path(cfg.paths.output_dir) / (std::string("manifest_") + sub + ".json"))) << sub;
    }
    const fs::path out(cfg.paths.output_dir);
    for (const char* name : {artifact::kCleanCorpus, artifact::kRejections, artifact::kSignatures, artifact::kGroups,
                             artifact::kUniqueIds, artifact::kTokens, artifact::kFeatures, artifact::kCounts,
                             artifact::kTfIdf, artifact::kModel, artifact::kSweep, artifact::kTopics,
                             artifact::kReportText, artifact::kReportJson}) {
        EXPECT_TRUE(fs::exists(out / name)) << name;
    }
    for (const char* v : {"tm_f1", "tm_b", "tm_p", "majority"}) {
        EXPECT_TRUE(fs::exists(out / "predictions" / (std::string(v) + ".csv"))) << v;
    }
    EXPECT_TRUE(fs::exists(out / "models" / "fit_0.bin"));
    EXPECT_TRUE(fs::exists(out / "variants" / "tm_f1.json"));

    const auto manifest = json::parse(testutil::read_file((out / "manifest_train.json").string()));
    EXPECT_EQ(manifest["subcommand"], "train");
    EXPECT_EQ(manifest["hazard"], "flood");
    EXPECT_EQ(manifest["seed"], 123);
    EXPECT_EQ(manifest["args"], json({"hazardtm", "test"}));
    EXPECT_EQ(manifest["config_checksum"].get<std::string>().size(), 16u);
    EXPECT_TRUE(manifest["versions"].contains("hazardtm"));

    const auto report = json::parse(testutil::read_file((out / artifact::kReportJson).string()));
    ASSERT_GE(report.size(), 5u);
    EXPECT_EQ(report[0]["source"], "baseline");
    for (const auto& r : report) {
        if (r["source"] == "tm_f1") EXPECT_GE(r["f1"].get<double>(), 0.75);
    }

    // retraining with the same seed reproduces the model byte for byte
    const auto first = testutil::read_file((out / artifact::kModel).string());
    run("train", cfg, opts);
    EXPECT_EQ(testutil::read_file((out / artifact::kModel).string()), first);
}

TEST(ShippedData, ExampleConfigAndHazardsLoad) {
    const fs::path data = fs::path(HAZARDTM_TEST_DATA) / ".." / ".." / "data";
    for (const char* hazard : {"cold", "drought", "flood", "heat", "landslide", "storm", "wildfire"}) {
        const auto cfg = load_config((data / "pipeline.example.json").string(), hazard);
        EXPECT_NO_THROW(cfg.validate());
        EXPECT_EQ(cfg.grid.num_fits(), 6u * 4 * 2 * 4);
        const auto hz = corpus::load_hazard_config(cfg.paths.hazard_config, cfg.paths.gazetteer);
        EXPECT_EQ(hz.keywords.hazard, hazard);
        EXPECT_FALSE(hz.keywords.keywords.empty());
        EXPECT_FALSE(hz.rules.gazetteer.cities.empty());
    }
    EXPECT_GT(features::load_stopwords((data / "stopwords_de.txt").string()).size(), 200u);
}
