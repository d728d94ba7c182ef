#include <gtest/gtest.h>

#include <random>

#include "hazardtm/classifier.hpp"
#include "hazardtm/error.hpp"
#include "hazardtm/eval.hpp"
#include "hazardtm/synth.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace hazardtm;
using namespace hazardtm::classifier;
using topicmodel::TopicModel;

namespace {

features::FeatureSpace make_space(std::size_t terms, std::vector<std::size_t> keywords) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < terms; ++i) names.push_back("t" + std::to_string(i));
    return features::FeatureSpace(names, std::vector<std::size_t>(terms, 1), std::move(keywords), {});
}

TopicModel hand_model(const features::FeatureSpace& fs, std::size_t topics, std::size_t terms,
                      std::vector<double> p_feat) {
    TopicModel m;
    m.fs_checksum = fs.checksum();
    m.num_topics = topics;
    m.num_terms = terms;
    m.p_feat = std::move(p_feat);
    return m;
}

// Random topic-term distributions; some rows get deliberate ties.
TopicModel random_model(const features::FeatureSpace& fs, std::mt19937_64& rng, std::size_t topics, std::size_t terms) {
    std::vector<double> p(topics * terms);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t t = 0; t < topics; ++t) {
        double s = 0.0;
        for (std::size_t w = 0; w < terms; ++w) {
            double v = u(rng);
            v = v * v * v;
            if (rng() % 5 == 0) v = 0.125;  // exact ties across terms
            p[t * terms + w] = v;
            s += v;
        }
        for (std::size_t w = 0; w < terms; ++w) p[t * terms + w] /= s;
    }
    return hand_model(fs, topics, terms, std::move(p));
}

topicmodel::TopicDistribution dist(std::vector<double> probs) {
    topicmodel::TopicDistribution d;
    d.probs = std::move(probs);
    return d;
}

SweepRow row(double p, double r, double f1, std::size_t topics = 10, double theta = 0.05) {
    SweepRow out;
    out.fit.num_topics = topics;
    out.theta = theta;
    out.metrics.precision = p;
    out.metrics.recall = r;
    out.metrics.f1 = f1;
    return out;
}

}  // namespace

TEST(Partition, KeywordProximityIsStrict) {
    const auto fs = make_space(4, {0});
    const auto m = hand_model(fs, 2, 4, {0.10, 0.30, 0.30, 0.30, 0.09, 0.31, 0.30, 0.30});
    const auto part = partition_topics(m, fs, PartitionRule::keyword_proximity(0.09));
    EXPECT_EQ(part.relevant_topics, (std::set<std::size_t>{0}));
    EXPECT_EQ(part.evidence.at(0).keyword, 0u);
    EXPECT_DOUBLE_EQ(part.evidence.at(0).probability, 0.10);
}

TEST(Partition, TopTermsUsesRankWithinTopic) {
    const auto fs = make_space(6, {3});
    // keyword t3 ranks 4th
    const auto m = hand_model(fs, 1, 6, {0.3, 0.25, 0.2, 0.15, 0.06, 0.04});
    EXPECT_TRUE(partition_topics(m, fs, PartitionRule::top_terms(3)).relevant_topics.empty());
    const auto part = partition_topics(m, fs, PartitionRule::top_terms(5));
    EXPECT_EQ(part.relevant_topics, (std::set<std::size_t>{0}));
    EXPECT_EQ(part.evidence.at(0).rank, 4u);
}

TEST(Partition, ThreeTopicHandModel) {
    const auto fs = make_space(5, {1, 4});
    const auto m = hand_model(fs, 3, 5,
                              {0.50, 0.20, 0.10, 0.10, 0.10,    // t1 ranks 2nd
                               0.05, 0.05, 0.40, 0.40, 0.10,    // t4 ranks 3rd at 0.10
                               0.30, 0.01, 0.30, 0.30, 0.09});  // keywords rank 4th and 5th
    EXPECT_EQ(partition_topics(m, fs, PartitionRule::top_terms(1)).relevant_topics, (std::set<std::size_t>{}));
    EXPECT_EQ(partition_topics(m, fs, PartitionRule::top_terms(2)).relevant_topics, (std::set<std::size_t>{0}));
    EXPECT_EQ(partition_topics(m, fs, PartitionRule::top_terms(3)).relevant_topics, (std::set<std::size_t>{0, 1}));
    EXPECT_EQ(partition_topics(m, fs, PartitionRule::top_terms(4)).relevant_topics,
              (std::set<std::size_t>{0, 1, 2}));
    EXPECT_EQ(partition_topics(m, fs, PartitionRule::keyword_proximity(0.095)).relevant_topics,
              (std::set<std::size_t>{0, 1}));
    EXPECT_EQ(partition_topics(m, fs, PartitionRule::keyword_proximity(0.15)).relevant_topics,
              (std::set<std::size_t>{0}));
    EXPECT_EQ(partition_topics(m, fs, PartitionRule::keyword_proximity(0.2)).relevant_topics,
              (std::set<std::size_t>{}));
    EXPECT_EQ(partition_topics(m, fs, PartitionRule::top_terms(3)).evidence.at(1).keyword, 4u);
}

TEST(Partition, MatchesBruteForceOracle) {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t topics = 1 + rng() % 20;
        const std::size_t terms = 2 + rng() % 199;
        std::vector<std::size_t> kw;
        for (std::size_t w = 0; w < terms; ++w) {
            if (rng() % 10 == 0) kw.push_back(w);
        }
        if (kw.empty()) kw.push_back(rng() % terms);
        const auto fs = make_space(terms, kw);
        const auto m = random_model(fs, rng, topics, terms);
        for (double gamma : gamma_grid_default()) {
            EXPECT_EQ(partition_topics(m, fs, PartitionRule::keyword_proximity(gamma)).relevant_topics,
                      oracle::keyword_proximity(m.p_feat, topics, terms, kw, gamma));
        }
        for (std::size_t k = 1; k <= 5; ++k) {
            const auto part = partition_topics(m, fs, PartitionRule::top_terms(k));
            EXPECT_EQ(part.relevant_topics, oracle::top_terms(m.p_feat, topics, terms, kw, k));
            for (const auto& [t, ev] : part.evidence) {
                EXPECT_TRUE(fs.is_keyword(ev.keyword));
                EXPECT_LE(ev.rank, k);
            }
        }
    }
}

TEST(Partition, RulesAreMonotone) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const auto fs = make_space(50, {1, 7, 30});
        const auto m = random_model(fs, rng, 12, 50);
        const auto gammas = gamma_grid_default();
        for (std::size_t i = 1; i < gammas.size(); ++i) {
            const auto wide = partition_topics(m, fs, PartitionRule::keyword_proximity(gammas[i - 1]));
            const auto narrow = partition_topics(m, fs, PartitionRule::keyword_proximity(gammas[i]));
            EXPECT_TRUE(std::includes(wide.relevant_topics.begin(), wide.relevant_topics.end(),
                                      narrow.relevant_topics.begin(), narrow.relevant_topics.end()));
        }
        for (std::size_t k = 2; k <= 5; ++k) {
            const auto small = partition_topics(m, fs, PartitionRule::top_terms(k - 1));
            const auto large = partition_topics(m, fs, PartitionRule::top_terms(k));
            EXPECT_TRUE(std::includes(large.relevant_topics.begin(), large.relevant_topics.end(),
                                      small.relevant_topics.begin(), small.relevant_topics.end()));
        }
    }
}

TEST(Partition, RejectsInvalidRules) {
    EXPECT_THROW(PartitionRule::top_terms(0).validate(), Error);
    EXPECT_THROW(PartitionRule::keyword_proximity(1.0).validate(), Error);
    EXPECT_THROW(PartitionRule::keyword_proximity(-0.1).validate(), Error);
    ClassifierConfig cfg;
    cfg.theta = 1.5;
    EXPECT_THROW(cfg.validate(), Error);
    const auto fs = make_space(2, {});
    const auto m = hand_model(fs, 1, 2, {0.5, 0.5});
    try {
        partition_topics(m, fs, PartitionRule::top_terms(1));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NoKeywordsInFeatureSpace);
    }
}

TEST(Classify, ThetaIsInclusive) {
    TopicPartition part;
    part.relevant_topics = {1};
    const std::vector<DocumentTopics> docs{{"a", dist({0.96, 0.04})}, {"b", dist({0.95, 0.05})}};
    ClassifierConfig cfg;
    cfg.theta = 0.05;
    const auto pred = classify(docs, part, cfg);
    EXPECT_EQ(pred.predictions.at("a"), 0);
    EXPECT_EQ(pred.predictions.at("b"), 1);
    EXPECT_EQ(pred.explanations.at("b"), (std::vector<std::size_t>{1}));
    EXPECT_FALSE(pred.explanations.contains("a"));
}

TEST(Classify, EmptyPartitionPredictsNothing) {
    const std::vector<DocumentTopics> docs{{"a", dist({0.5, 0.5})}, {"b", dist({1.0, 0.0})}};
    ClassifierConfig cfg;
    cfg.theta = 0.0;
    const auto pred = classify(docs, TopicPartition{}, cfg);
    for (const auto& [id, label] : pred.predictions) EXPECT_EQ(label, 0) << id;
}

TEST(Classify, DegenerateRowsArePredictedIrrelevant) {
    TopicPartition part;
    part.relevant_topics = {0, 1};
    auto d = dist({0.5, 0.5});
    d.degenerate = true;
    const std::vector<DocumentTopics> docs{{"a", d}};
    ClassifierConfig cfg;
    cfg.theta = 0.0;
    EXPECT_EQ(classify(docs, part, cfg).predictions.at("a"), 0);
}

TEST(Classify, LowerThetaNeverLosesPositives) {
    std::mt19937_64 rng(3);
    std::vector<DocumentTopics> docs;
    for (int i = 0; i < 200; ++i) {
        std::vector<double> p(6);
        double s = 0.0;
        for (auto& v : p) s += v = std::exponential_distribution<double>(1.0)(rng);
        for (auto& v : p) v /= s;
        docs.push_back({"d" + std::to_string(i), dist(p)});
    }
    TopicPartition part;
    part.relevant_topics = {2, 4};
    const auto thetas = theta_grid_default();
    for (std::size_t i = 1; i < thetas.size(); ++i) {
        ClassifierConfig lo, hi;
        lo.theta = thetas[i - 1];
        hi.theta = thetas[i];
        const auto a = classify(docs, part, lo);
        const auto b = classify(docs, part, hi);
        for (const auto& [id, label] : b.predictions) EXPECT_GE(a.predictions.at(id), label);
    }
}

TEST(Selection, WorkedExample) {
    const std::vector<SweepRow> rows{row(0.8, 0.2, 0.32), row(0.6, 0.6, 0.6), row(0.7, 0.5, 0.5833)};
    const auto v = select_variants(rows);
    EXPECT_DOUBLE_EQ(v.tm_f1.metrics.f1, 0.6);
    EXPECT_DOUBLE_EQ(v.tm_b.metrics.precision, 0.6);
    EXPECT_DOUBLE_EQ(v.tm_p.metrics.precision, 0.8);
    EXPECT_FALSE(v.tm_p_fallback);
}

TEST(Selection, SingleCellGivesIdenticalVariants) {
    const std::vector<SweepRow> rows{row(0.4, 0.7, 0.509)};
    const auto v = select_variants(rows);
    EXPECT_DOUBLE_EQ(v.tm_f1.metrics.f1, 0.509);
    EXPECT_DOUBLE_EQ(v.tm_b.metrics.f1, 0.509);
    EXPECT_DOUBLE_EQ(v.tm_p.metrics.f1, 0.509);
}

TEST(Selection, RecallFloorAndFallback) {
    const std::vector<SweepRow> rows{row(1.0, 0.01, 0.0198), row(0.9, 0.2, 0.327), row(0.5, 0.9, 0.643)};
    EXPECT_DOUBLE_EQ(select_variants(rows).tm_p.metrics.precision, 0.9);
    SelectionSettings strict;
    strict.recall_floor = 0.95;
    const auto v = select_variants(rows, strict);
    EXPECT_TRUE(v.tm_p_fallback);
    EXPECT_DOUBLE_EQ(v.tm_p.metrics.precision, 1.0);
}

TEST(Selection, TiesPreferFewerTopicsThenEarlierRows) {
    const std::vector<SweepRow> rows{row(0.5, 0.5, 0.5, 50, 0.01), row(0.5, 0.5, 0.5, 20, 0.02),
                                     row(0.5, 0.5, 0.5, 20, 0.03)};
    const auto v = select_variants(rows);
    EXPECT_EQ(v.tm_f1.fit.num_topics, 20u);
    EXPECT_DOUBLE_EQ(v.tm_f1.theta, 0.02);
    EXPECT_DOUBLE_EQ(v.tm_b.theta, 0.02);
}

TEST(Selection, MinAbsDiffCriterion) {
    const std::vector<SweepRow> rows{row(0.3, 0.31, 0.305), row(0.6, 0.7, 0.646)};
    SelectionSettings s;
    EXPECT_DOUBLE_EQ(select_variants(rows, s).tm_b.metrics.precision, 0.6);
    s.balanced = BalancedCriterion::MinAbsDiff;
    EXPECT_DOUBLE_EQ(select_variants(rows, s).tm_b.metrics.precision, 0.3);
}

TEST(Selection, EmptyGrid) {
    try {
        select_variants(std::vector<SweepRow>{});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyGrid);
    }
}

TEST(SweepCsv, RoundTrip) {
    testutil::TempDir tmp;
    SweepRow a;
    a.fit = {3, 5, {"NOUN", "VERB"}, topicmodel::ModelKind::NMF, 20};
    a.rule = PartitionRule::keyword_proximity(0.054);
    a.theta = 0.1 + 0.2;  // not exactly representable in short decimal
    a.relevant_topics = 2;
    a.counts = {4, 1, 3, 12};
    a.metrics = compute_metrics(a.counts);
    SweepRow b = a;
    b.fit.pos.clear();
    b.rule = PartitionRule::top_terms(4);
    b.counts = {0, 0, 7, 13};
    b.metrics = compute_metrics(b.counts);
    write_sweep_csv(tmp.file("s.csv"), std::vector<SweepRow>{a, b});
    const auto back = read_sweep_csv(tmp.file("s.csv"));
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].fit.pos, a.fit.pos);
    EXPECT_EQ(back[0].fit.kind, a.fit.kind);
    EXPECT_EQ(back[0].theta, a.theta);
    EXPECT_EQ(back[0].rule.gamma, a.rule.gamma);
    EXPECT_EQ(back[0].counts, a.counts);
    EXPECT_EQ(back[0].metrics.f1, a.metrics.f1);
    EXPECT_TRUE(back[1].fit.pos.empty());
    EXPECT_EQ(back[1].rule.k, 4u);
    EXPECT_TRUE(back[1].metrics.precision_undefined);
}

namespace {

struct SynthSetup {
    std::vector<features::TokenizedDocument> docs;
    std::vector<eval::GoldLabel> gold;
    SweepInput input;
};

SynthSetup synth_setup(std::size_t n, std::uint64_t seed) {
    synth::SynthConfig cfg;
    cfg.num_docs = n;
    cfg.seed = seed;
    const auto sc = synth::generate(cfg);
    SynthSetup s;
    const std::set<std::string> stop(sc.stopwords.begin(), sc.stopwords.end());
    for (const auto& d : sc.docs) s.docs.push_back(features::normalize_tokens(d, stop));
    s.gold = sc.gold;
    std::set<std::string> copies;
    for (const auto& [orig, copy] : sc.near_duplicates) copies.insert(copy);
    for (const auto& d : s.docs) {
        if (!copies.contains(d.doc_id)) s.input.training_ids.insert(d.doc_id);
    }
    s.input.keywords = corpus::KeywordList::make(cfg.hazard, sc.keywords, sc.intruders);
    s.input.train_gold = eval::labels_for(s.gold, eval::Split::Train);
    return s;
}

}  // namespace

TEST(Sweep, CellAgreesWithDirectClassification) {
    auto s = synth_setup(200, 11);
    s.input.corpus = s.docs;
    SweepGrid grid;
    grid.min_doc_freqs = {2};
    grid.pos_sets = {{}};
    grid.num_topics = {6};
    grid.kinds = {topicmodel::ModelKind::LDA};
    grid.thetas = {0.02, 0.1};
    grid.gammas = {0.018};
    grid.ks = {2};
    grid.lda.iterations = 100;
    grid.lda.passes = 5;
    TopicModel kept;
    features::FeatureSpace kept_fs;
    SweepOptions opts;
    opts.on_fit = [&](const FitSpec&, const features::FeatureSpace& fs, const TopicModel& m) {
        kept = m;
        kept_fs = fs;
    };
    const auto rows = sweep(s.input, grid, opts);
    ASSERT_EQ(rows.size(), 4u);

    std::vector<features::TokenizedDocument> train_docs;
    for (const auto& d : s.docs) {
        if (s.input.train_gold.contains(d.doc_id)) train_docs.push_back(d);
    }
    const auto topics = document_topics(kept, kept_fs, train_docs);
    for (const auto& r : rows) {
        ClassifierConfig cfg{r.theta, r.rule};
        const auto part = partition_topics(kept, kept_fs, r.rule);
        EXPECT_EQ(part.relevant_topics.size(), r.relevant_topics);
        const auto pred = classify(topics, part, cfg);
        const auto rep = eval::evaluate(pred, s.gold, eval::Split::Train);
        EXPECT_EQ(rep.overall.counts, r.counts);
    }
}

TEST(Sweep, ThetaZeroOnAnyRelevantTopicRecallsEverything) {
    auto s = synth_setup(200, 12);
    s.input.corpus = s.docs;
    SweepGrid grid;
    grid.min_doc_freqs = {2};
    grid.pos_sets = {{}};
    grid.num_topics = {4};
    grid.kinds = {topicmodel::ModelKind::LDA};
    grid.methods = {PartitionMethod::TopTerms};
    grid.thetas = {0.0};
    grid.ks = {5};
    grid.lda.iterations = 50;
    grid.lda.passes = 5;
    const auto rows = sweep(s.input, grid);
    ASSERT_EQ(rows.size(), 1u);
    ASSERT_GT(rows[0].relevant_topics, 0u);
    EXPECT_EQ(rows[0].counts.fn, 0u);
}

TEST(Sweep, RecoversPlantedHazardTopic) {
    auto s = synth_setup(200, 13);
    s.input.corpus = s.docs;
    SweepGrid grid;
    grid.min_doc_freqs = {2};
    grid.pos_sets = {{}};
    grid.num_topics = {5, 10};
    grid.kinds = {topicmodel::ModelKind::LDA, topicmodel::ModelKind::NMF};
    grid.lda.iterations = 200;
    grid.lda.passes = 5;
    const auto rows = sweep(s.input, grid);
    EXPECT_EQ(rows.size(), grid.num_fits() * grid.cells_per_fit());
    const auto v = select_variants(rows);
    EXPECT_GE(v.tm_f1.metrics.f1, 0.9);
    EXPECT_GE(v.tm_p.metrics.precision, v.tm_f1.metrics.precision);
}

TEST(Sweep, EmptyGridRejected) {
    auto s = synth_setup(50, 14);
    s.input.corpus = s.docs;
    SweepGrid grid;
    grid.num_topics.clear();
    EXPECT_THROW(sweep(s.input, grid), Error);
}

TEST(Sweep, AllFitsFailing) {
    auto s = synth_setup(50, 15);
    s.input.corpus = s.docs;
    SweepGrid grid;
    grid.min_doc_freqs = {2};
    grid.pos_sets = {{}};
    grid.num_topics = {5000};  // more topics than training documents
    grid.kinds = {topicmodel::ModelKind::NMF};
    try {
        sweep(s.input, grid);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NoFeasibleConfig);
    }
}
