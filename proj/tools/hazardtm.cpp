#include <spdlog/spdlog.h>

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "hazardtm/error.hpp"
#include "hazardtm/pipeline.hpp"
#include "hazardtm/text.hpp"

namespace pl = hazardtm::pipeline;

int main(int argc, char** argv) {
    CLI::App app{"Refine keyword-retrieved news collections with topic-model classifiers"};
    app.require_subcommand(1, 1);
    app.fallthrough();

    std::string config_path;
    std::string hazards;
    std::string level = "normal";
    app.add_option("-c,--config", config_path, "pipeline config (JSON)");
    app.add_option("--hazards", hazards, "comma-separated hazard ids; runs the subcommand once per hazard");
    app.add_option("--log-level", level, "quiet, normal or debug (debug also enables Gibbs count checks)")
        ->check(CLI::IsMember({"quiet", "normal", "debug"}));

    pl::RunOptions opts;
    std::string split = "test";
    std::size_t theta_topic = 0;
    std::string synth_out;
    std::string synth_hazard = "flood";
    std::uint64_t synth_seed = 123;

    app.add_subcommand("ingest", "strip markup, split concatenated items, apply inclusion filters");
    app.add_subcommand("dedup", "MinHash near-duplicate grouping of the cleaned corpus");
    app.add_subcommand("featurize", "tokenize, build the feature space and document-term matrices");
    app.add_subcommand("train", "fit one topic model with the [train] settings");
    app.add_subcommand("sweep", "fit the model grid and score every rule/theta cell on the train split");
    app.add_subcommand("select", "pick the tm_f1, tm_b and tm_p variants from sweep results");
    auto* classify = app.add_subcommand("classify", "label every document with the selected variants");
    classify->add_option("--variant", opts.variants, "variant names (default: tm_f1 tm_b tm_p)");
    auto* evaluate = app.add_subcommand("evaluate", "score prediction files against gold labels");
    evaluate->add_option("--predictions", opts.predictions, "prediction CSVs (default: output predictions/*.csv)");
    evaluate->add_option("--split", split, "gold split")->check(CLI::IsMember({"train", "test"}));
    auto* ensemble = app.add_subcommand("ensemble", "majority vote over three prediction files");
    ensemble->add_option("--predictions", opts.predictions, "exactly three prediction CSVs");
    auto* dump = app.add_subcommand("dump-topics", "top terms per topic and theta-sensitivity data");
    dump->add_option("--model", opts.model, "model file (default: output model.bin)");
    dump->add_option("--features", opts.features, "feature space (default: output features.tsv)");
    dump->add_option("--top-n", opts.top_n, "terms per topic");
    auto* theta_opt = dump->add_option("--theta-topic", theta_topic, "also export per-document proportions of this topic");
    auto* synth = app.add_subcommand("synth", "generate the synthetic hazard corpus");
    synth->add_option("--out", synth_out, "output directory (default: config output_dir)");
    synth->add_option("--hazard", synth_hazard, "hazard id when no config is given");
    synth->add_option("--seed", synth_seed, "seed when no config is given");

    CLI11_PARSE(app, argc, argv);

    const std::string sub = app.get_subcommands().front()->get_name();
    opts.args.assign(argv + 1, argv + argc);
    opts.versions["cli11"] = CLI11_VERSION;
    opts.log = level == "quiet" ? pl::LogLevel::Quiet : level == "debug" ? pl::LogLevel::Debug : pl::LogLevel::Normal;
    opts.split = split == "train" ? hazardtm::eval::Split::Train : hazardtm::eval::Split::Test;
    if (theta_opt->count() > 0) opts.theta_topic = theta_topic;
    pl::set_log_level(opts.log);

    std::vector<std::optional<std::string>> targets;
    if (hazards.empty()) {
        targets.emplace_back(std::nullopt);
    } else {
        for (const auto& h : hazardtm::text::split(hazards, ',')) {
            if (!h.empty()) targets.emplace_back(h);
        }
    }

    try {
        for (const auto& hazard : targets) {
            pl::PipelineConfig cfg;
            if (!config_path.empty()) {
                cfg = pl::load_config(config_path, hazard);
            } else if (sub == "synth") {
                cfg = pl::config_from_json({{"hazard", hazard.value_or(synth_hazard)}, {"seed", synth_seed}}, ".");
            } else {
                throw hazardtm::Error(hazardtm::ErrorCode::ConfigError, "--config is required for " + sub);
            }
            pl::apply_environment(cfg);
            if (sub == "synth" && !synth_out.empty()) cfg.paths.output_dir = synth_out;
            if (targets.size() > 1) spdlog::info("hazard {}", cfg.hazard);
            pl::run(sub, cfg, opts);
        }
    } catch (const hazardtm::Error& e) {
        std::fprintf(stderr, "hazardtm %s: %s\n", sub.c_str(), e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "hazardtm %s: error: %s\n", sub.c_str(), e.what());
        return 1;
    }
    return 0;
}
