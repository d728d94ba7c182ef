#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <regex>

#include "json.hpp"

#include "hazardtm/corpus.hpp"
#include "hazardtm/error.hpp"
#include "hazardtm/text.hpp"
#include "test_util.hpp"

using namespace hazardtm;
using namespace hazardtm::corpus;

namespace {

KeywordList drought() { return KeywordList::make("drought", {"dürre", "trockenheit"}, {"dürrenmatt"}); }

FilterRules rules_with_gazetteer() {
    FilterRules r;
    r.gazetteer.countries = {"deutschland", "vereinigte staaten"};
    r.gazetteer.nationalities = {"deutsche"};
    r.gazetteer.cities = {"leipzig", "berlin"};
    return r;
}

RawDocument doc(std::string id, std::string text, std::optional<std::string> ressort = "Politik") {
    RawDocument d;
    d.id = std::move(id);
    d.text = std::move(text);
    d.outlet = "test";
    d.date = parse_date("2022-08-01");
    d.ressort = std::move(ressort);
    d.hazard = "drought";
    return d;
}

std::string repeat_words(std::size_t n) {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s += (i ? " " : "") + std::string(i % 2 ? "Felder" : "Regen");
    return s;
}

}  // namespace

TEST(StripMarkup, Examples) {
    EXPECT_EQ(strip_markup("<b>Flut</b> in Ahrtal"), "Flut in Ahrtal");
    EXPECT_EQ(strip_markup("no markup here"), "no markup here");
    EXPECT_EQ(strip_markup("a<x>b<y>c"), "abc");
    EXPECT_EQ(strip_markup("a < b and c > d"), "a  d");
    EXPECT_EQ(strip_markup("open <tag\nnext> line"), "open <tag\nnext> line");
    EXPECT_EQ(strip_markup("<<x>>"), ">");
}

TEST(StripMarkup, MatchesReferenceRegexOnRandomStrings) {
    const std::regex pattern("<.*?>");  // '.' excludes line breaks, as in common engines
    const std::string alphabet = "ab <>\n";
    std::mt19937 rng(7);
    for (int trial = 0; trial < 2000; ++trial) {
        std::string s;
        const int len = static_cast<int>(rng() % 24);
        for (int i = 0; i < len; ++i) s += alphabet[rng() % alphabet.size()];
        EXPECT_EQ(strip_markup(s), std::regex_replace(s, pattern, "")) << "input: " << s;
        EXPECT_EQ(strip_markup(strip_markup(s)), strip_markup(s));
    }
}

TEST(SplitConcatenated, Examples) {
    const auto& markers = default_agency_markers();
    EXPECT_EQ(split_concatenated("Storm hits coast. (dpa) Markets rose. (afp)", markers),
              (std::vector<std::string>{"Storm hits coast. (dpa)", " Markets rose. (afp)"}));
    EXPECT_EQ(split_concatenated("No agency anywhere.", markers), (std::vector<std::string>{"No agency anywhere."}));
    EXPECT_EQ(split_concatenated("(dpa)", markers), (std::vector<std::string>{"(dpa)"}));
    EXPECT_EQ(split_concatenated("Bericht (DPA) weiter", markers).size(), 2u);
    EXPECT_EQ(split_concatenated("Zahl (dpa-AFX) bleibt (see above)", markers).size(), 1u);
}

TEST(SplitConcatenated, SegmentsReconcatenateToInput) {
    const auto& markers = default_agency_markers();
    const std::vector<std::string> pieces{"Text ", "(dpa)", " mehr ", "(afp)", "(ap)", " x (", "y)", "(kna) "};
    std::mt19937 rng(3);
    for (int trial = 0; trial < 300; ++trial) {
        std::string s;
        for (int i = 0; i < 6; ++i) s += pieces[rng() % pieces.size()];
        std::string joined;
        for (const auto& seg : split_concatenated(s, markers)) joined += seg;
        EXPECT_EQ(joined, s);
    }
}

TEST(Keywords, IntruderOnlyExamples) {
    const auto kw = KeywordList::make("flood", {"flut"}, {"flutlicht"});
    const std::vector<std::string> a{"flutlicht", "spiel"};
    const std::vector<std::string> b{"flut", "flutlicht"};
    const std::vector<std::string> c{"spiel"};
    EXPECT_TRUE(intruder_only(a, kw));
    EXPECT_FALSE(intruder_only(b, kw));
    EXPECT_FALSE(intruder_only(c, kw));
}

TEST(Keywords, SubstringMatchingHandlesCompoundsAndCase) {
    const auto kw = drought();
    const std::vector<std::string> compound{"Dürregebieten"};
    const std::vector<std::string> none{"Regen"};
    EXPECT_TRUE(contains_keyword(compound, kw));
    EXPECT_FALSE(contains_keyword(none, kw));
    const auto multi = KeywordList::make("heat", {"hohe temperaturen"}, {});
    const std::vector<std::string> phrase{"sehr", "Hohe", "Temperaturen"};
    EXPECT_TRUE(contains_keyword(phrase, multi));
}

TEST(Keywords, MakeRejectsEmptyAndOverlap) {
    EXPECT_THROW(KeywordList::make("x", {" "}, {}), Error);
    EXPECT_THROW(KeywordList::make("x", {"flut"}, {"FLUT"}), Error);
}

TEST(Keywords, NonIntruderKeywordNeverYieldsIntruderOnly) {
    const auto kw = drought();
    const std::vector<std::string> vocab{"dürrenmatt", "dürre", "regen", "trockenheitsjahr", "feld"};
    std::mt19937 rng(11);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<std::string> toks;
        for (int i = 0; i < 5; ++i) toks.push_back(vocab[rng() % vocab.size()]);
        const bool has_real = std::any_of(toks.begin(), toks.end(), [](const std::string& t) {
            return t != "dürrenmatt" && (t.find("dürre") != std::string::npos || t.find("trockenheit") != std::string::npos);
        });
        if (has_real) EXPECT_FALSE(intruder_only(toks, kw));
    }
}

TEST(NonAlpha, RatioIgnoresWhitespace) {
    EXPECT_DOUBLE_EQ(nonalpha_ratio("ab cd"), 0.0);
    EXPECT_DOUBLE_EQ(nonalpha_ratio("ab 12"), 0.5);
    EXPECT_DOUBLE_EQ(nonalpha_ratio("Grüße!"), 1.0 / 6.0);
    EXPECT_DOUBLE_EQ(nonalpha_ratio("   "), 1.0);
}

TEST(Location, GazetteerHitsAndDatelines) {
    const auto r = rules_with_gazetteer();
    const std::vector<std::string> toks{"in", "den", "Vereinigte", "Staaten"};
    EXPECT_TRUE(mentions_location(toks, r.gazetteer));
    const std::vector<std::string> none{"nirgendwo"};
    EXPECT_FALSE(mentions_location(none, r.gazetteer));
    EXPECT_TRUE(starts_with_city_dateline("Leipzig. Heute", r.gazetteer));
    EXPECT_TRUE(starts_with_city_dateline("  LEIPZIG \t. Heute", r.gazetteer));
    EXPECT_FALSE(starts_with_city_dateline("Leipzig (dpa) Heute", r.gazetteer));
    EXPECT_FALSE(starts_with_city_dateline("Heute. Leipzig.", r.gazetteer));
}

TEST(ApplyFilters, ShortDocumentIsTooShort) {
    const auto text = "Dürre in Deutschland " + repeat_words(17);
    const auto d = doc("a", text);
    const auto v = apply_filters(d, text::tokenize(d.text), drought(), rules_with_gazetteer());
    EXPECT_FALSE(v.keep);
    EXPECT_EQ(v.reasons, std::vector<RejectReason>{RejectReason::TooShort});
}

TEST(ApplyFilters, RegularArticleIsKept) {
    // 500 tokens, 2% non-alphabetic characters, country named, keyword present.
    std::string text = "Die Dürre erreicht Deutschland.";
    const auto toks_before = text::tokenize(text).size();
    text += " " + repeat_words(500 - toks_before);
    const auto d = doc("b", text);
    const auto tokens = text::tokenize(d.text);
    ASSERT_EQ(tokens.size(), 500u);
    ASSERT_LT(nonalpha_ratio(d.text), 0.03);
    const auto v = apply_filters(d, tokens, drought(), rules_with_gazetteer());
    EXPECT_TRUE(v.keep);
    EXPECT_TRUE(v.reasons.empty());
}

TEST(ApplyFilters, IntruderOnlyDocument) {
    const auto d = doc("c", "Ein Abend mit Dürrenmatt in Deutschland " + repeat_words(40));
    const auto v = apply_filters(d, text::tokenize(d.text), drought(), rules_with_gazetteer());
    EXPECT_EQ(v.reasons, std::vector<RejectReason>{RejectReason::IntruderOnly});
}

TEST(ApplyFilters, MissingGazetteerIsAnError) {
    FilterRules r;
    const auto d = doc("d", "Dürre " + repeat_words(40));
    try {
        apply_filters(d, text::tokenize(d.text), drought(), r);
        FAIL() << "expected MissingGazetteer";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MissingGazetteer);
    }
    r.require_location = false;
    EXPECT_TRUE(apply_filters(d, text::tokenize(d.text), drought(), r).keep);
}

TEST(ApplyFilters, FixtureCases) {
    const auto cfg = load_hazard_config(testutil::data("filter_hazard.json"), testutil::data("filter_gazetteer.json"));
    std::ifstream in(testutil::data("filter_cases.jsonl"));
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        const auto j = nlohmann::json::parse(line);
        const auto d = document_from_json_line(j.at("doc").dump(), ++n);
        const auto v = apply_filters(d, text::tokenize(d.text), cfg.keywords, cfg.rules);
        std::vector<std::string> got;
        for (auto r : v.reasons) got.emplace_back(to_string(r));
        auto want = j.at("reasons").get<std::vector<std::string>>();
        std::sort(got.begin(), got.end());
        std::sort(want.begin(), want.end());
        EXPECT_EQ(v.keep, j.at("keep").get<bool>()) << j.at("case");
        EXPECT_EQ(got, want) << j.at("case");
        EXPECT_EQ(v.keep, v.reasons.empty());
    }
    EXPECT_EQ(n, 30u);
}

TEST(Config, RulesValidation) {
    FilterRules r = rules_with_gazetteer();
    r.min_tokens = 50;
    r.max_tokens = 40;
    EXPECT_THROW(r.validate(), Error);
    r = rules_with_gazetteer();
    r.max_nonalpha_ratio = 1.0;
    EXPECT_THROW(r.validate(), Error);
}

TEST(Config, HazardConfigFromFile) {
    const auto cfg = load_hazard_config(testutil::data("filter_hazard.json"), testutil::data("filter_gazetteer.json"));
    EXPECT_EQ(cfg.keywords.hazard, "drought");
    EXPECT_TRUE(cfg.keywords.keywords.contains("dürre"));
    EXPECT_TRUE(cfg.keywords.intruders.contains("dürrenmatt"));
    EXPECT_EQ(cfg.agency_markers, default_agency_markers());
    EXPECT_TRUE(cfg.rules.gazetteer.countries.contains("vereinigte staaten"));
    EXPECT_THROW(load_hazard_config(testutil::data("missing.json"), ""), Error);
}

TEST(Dates, ParseAndFormat) {
    EXPECT_EQ(format_date(parse_date("2021-07-14")), "2021-07-14");
    EXPECT_THROW(parse_date("2021-02-30"), Error);
    EXPECT_THROW(parse_date("14.07.2021"), Error);
}

TEST(Jsonl, RoundTripWithAnnotations) {
    testutil::TempDir tmp;
    auto a = doc("x1", "Text \"quoted\"\nzweite Zeile");
    a.annotations = {{"Text", std::string("Text"), std::string("NOUN")}, {"zweite", std::nullopt, std::nullopt}};
    auto b = doc("x2", "Noch ein Text", std::nullopt);
    const std::vector<RawDocument> docs{a, b};
    write_jsonl(tmp.file("c.jsonl"), docs);
    EXPECT_EQ(read_jsonl(tmp.file("c.jsonl")), docs);
}

TEST(Jsonl, ParseErrorsCarryLineNumbers) {
    testutil::TempDir tmp;
    testutil::write_file(tmp.file("bad.jsonl"),
                         "{\"id\":\"a\",\"text\":\"t\",\"date\":\"2020-01-01\"}\n{\"id\":\"b\",\"text\":\"\",\"date\":\"2020-01-01\"}\n");
    try {
        read_jsonl(tmp.file("bad.jsonl"));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ParseError);
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    }
}

TEST(Ingest, DropsExactDuplicatesSplitsAndSorts) {
    HazardConfig cfg;
    cfg.keywords = drought();
    cfg.rules = rules_with_gazetteer();
    const auto body = " Dürre in Deutschland " + repeat_words(40);
    std::vector<RawDocument> docs{
        doc("b", "<p>" + body + "</p>"),
        doc("a", body + " (dpa)" + body + " (afp)"),
        doc("b", "<p>" + body + "</p>"),
        doc("c", "Regen " + repeat_words(40) + " Deutschland"),
    };
    const auto result = ingest(docs, cfg);
    EXPECT_EQ(result.exact_duplicates, 1u);
    EXPECT_EQ(result.segments_created, 2u);
    std::vector<std::string> kept;
    for (const auto& d : result.kept) kept.push_back(d.id);
    EXPECT_EQ(kept, (std::vector<std::string>{"a#1", "a#2", "b"}));
    EXPECT_EQ(result.kept[2].text.find('<'), std::string::npos);
    ASSERT_EQ(result.rejected.size(), 1u);
    EXPECT_EQ(result.rejected[0].id, "c");
    EXPECT_EQ(result.rejected[0].reasons, std::vector<RejectReason>{RejectReason::NoKeyword});
}

TEST(Ingest, ConflictingRecordsWithSameIdAreRejected) {
    HazardConfig cfg;
    cfg.keywords = drought();
    cfg.rules = rules_with_gazetteer();
    std::vector<RawDocument> docs{doc("a", "Dürre eins"), doc("a", "Dürre zwei")};
    try {
        ingest(docs, cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DuplicateId);
    }
}

TEST(Ingest, OutputIndependentOfInputOrder) {
    HazardConfig cfg;
    cfg.keywords = drought();
    cfg.rules = rules_with_gazetteer();
    std::vector<RawDocument> docs;
    for (int i = 0; i < 12; ++i) {
        docs.push_back(doc("d" + std::to_string(i), (i % 3 ? "Dürre " : "Regen ") + repeat_words(20 + 4 * i) +
                                                        (i % 4 ? " Deutschland" : "")));
    }
    auto shuffled = docs;
    std::mt19937 rng(5);
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto r1 = ingest(docs, cfg);
    const auto r2 = ingest(shuffled, cfg);
    EXPECT_EQ(r1.kept, r2.kept);
    ASSERT_EQ(r1.rejected.size(), r2.rejected.size());
    for (std::size_t i = 0; i < r1.rejected.size(); ++i) {
        EXPECT_EQ(r1.rejected[i].id, r2.rejected[i].id);
        EXPECT_EQ(r1.rejected[i].reasons, r2.rejected[i].reasons);
    }
}

TEST(Ingest, RejectionLogCsv) {
    testutil::TempDir tmp;
    write_rejections_csv(tmp.file("r.csv"), std::vector<Rejection>{
                                                {"x", {RejectReason::TooShort, RejectReason::NoLocation}}});
    EXPECT_EQ(testutil::read_file(tmp.file("r.csv")), "id,reasons\nx,TooShort;NoLocation\n");
    EXPECT_EQ(reject_reason_from_string("CityDateline"), RejectReason::CityDateline);
}
