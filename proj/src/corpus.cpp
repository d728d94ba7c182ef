#include "hazardtm/corpus.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <fstream>
#include <map>
#include <unordered_set>

#include "hazardtm/csv.hpp"
#include "hazardtm/error.hpp"
#include "hazardtm/text.hpp"
#include "json.hpp"

namespace hazardtm::corpus {

using nlohmann::json;

std::chrono::year_month_day parse_date(std::string_view iso) {
    auto bad = [&] { return Error(ErrorCode::ParseError, "invalid date '" + std::string(iso) + "', expected YYYY-MM-DD"); };
    if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') throw bad();
    int y = 0;
    unsigned m = 0;
    unsigned d = 0;
    auto num = [&](std::size_t pos, std::size_t len, auto& out) {
        auto [p, ec] = std::from_chars(iso.data() + pos, iso.data() + pos + len, out);
        if (ec != std::errc{} || p != iso.data() + pos + len) throw bad();
    };
    num(0, 4, y);
    num(5, 2, m);
    num(8, 2, d);
    std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!ymd.ok()) throw bad();
    return ymd;
}

std::string format_date(const std::chrono::year_month_day& date) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(date.year()),
                  static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
    return buf;
}

KeywordList KeywordList::make(std::string hazard, const std::vector<std::string>& keywords,
                              const std::vector<std::string>& intruders) {
    KeywordList kw;
    kw.hazard = std::move(hazard);
    for (const auto& k : keywords) {
        auto norm = text::to_lower(text::trim(k));
        if (!norm.empty()) kw.keywords.insert(std::move(norm));
    }
    for (const auto& k : intruders) {
        auto norm = text::to_lower(text::trim(k));
        if (!norm.empty()) kw.intruders.insert(std::move(norm));
    }
    if (kw.keywords.empty()) {
        throw Error(ErrorCode::ConfigError, "keyword list for hazard '" + kw.hazard + "' is empty");
    }
    for (const auto& i : kw.intruders) {
        if (kw.keywords.contains(i)) {
            throw Error(ErrorCode::ConfigError, "'" + i + "' is listed both as keyword and intruder");
        }
    }
    return kw;
}

void FilterRules::validate() const {
    if (min_tokens == 0 || min_tokens >= max_tokens) {
        throw Error(ErrorCode::ConfigError, "filter rules need 0 < min_tokens < max_tokens");
    }
    if (!(max_nonalpha_ratio > 0.0 && max_nonalpha_ratio < 1.0)) {
        throw Error(ErrorCode::ConfigError, "max_nonalpha_ratio must lie in (0, 1)");
    }
}

namespace {

constexpr std::pair<RejectReason, std::string_view> kReasonNames[] = {
    {RejectReason::NoKeyword, "NoKeyword"},
    {RejectReason::IntruderOnly, "IntruderOnly"},
    {RejectReason::ForbiddenRessort, "ForbiddenRessort"},
    {RejectReason::TooShort, "TooShort"},
    {RejectReason::TooLong, "TooLong"},
    {RejectReason::NonAlphaRatio, "NonAlphaRatio"},
    {RejectReason::NoLocation, "NoLocation"},
    {RejectReason::CityDateline, "CityDateline"},
};

std::string joined_lower(std::span<const std::string> tokens) {
    std::string out = " ";
    for (const auto& t : tokens) {
        out += text::to_lower(t);
        out += ' ';
    }
    return out;
}

bool in_any(const std::string& needle, const Gazetteer& g) {
    return g.countries.contains(needle) || g.nationalities.contains(needle) || g.cities.contains(needle);
}

}  // namespace

std::string_view to_string(RejectReason reason) {
    for (const auto& [r, name] : kReasonNames) {
        if (r == reason) return name;
    }
    return "Unknown";
}

RejectReason reject_reason_from_string(std::string_view name) {
    for (const auto& [r, n] : kReasonNames) {
        if (n == name) return r;
    }
    throw Error(ErrorCode::ParseError, "unknown reject reason '" + std::string(name) + "'");
}

std::string strip_markup(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] == '<') {
            const auto j = text.find_first_of(">\n", i + 1);
            if (j != std::string_view::npos && text[j] == '>') {
                i = j + 1;
                continue;
            }
        }
        out.push_back(text[i]);
        ++i;
    }
    return out;
}

std::vector<std::string> split_concatenated(std::string_view text,
                                            const std::set<std::string>& agency_markers) {
    std::vector<std::string> segments;
    std::size_t seg_start = 0;
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] == '(') {
            const auto close = text.find(')', i + 1);
            if (close != std::string_view::npos &&
                agency_markers.contains(text::to_lower(text.substr(i + 1, close - i - 1)))) {
                segments.emplace_back(text.substr(seg_start, close + 1 - seg_start));
                seg_start = close + 1;
                i = close + 1;
                continue;
            }
        }
        ++i;
    }
    if (seg_start < text.size() || segments.empty()) {
        segments.emplace_back(text.substr(seg_start));
    }
    return segments;
}

bool contains_keyword(std::span<const std::string> tokens, const KeywordList& kw) {
    const auto joined = joined_lower(tokens);
    return std::any_of(kw.keywords.begin(), kw.keywords.end(),
                       [&](const std::string& k) { return joined.find(k) != std::string::npos; });
}

bool intruder_only(std::span<const std::string> tokens, const KeywordList& kw) {
    bool any_intruder = false;
    for (const auto& raw : tokens) {
        const auto tok = text::to_lower(raw);
        if (kw.intruders.contains(tok)) {
            any_intruder = true;
            continue;
        }
        for (const auto& k : kw.keywords) {
            if (tok.find(k) != std::string::npos) return false;
        }
    }
    if (!any_intruder) return false;
    // Multi-word keywords can only be found across token boundaries.
    const auto joined = joined_lower(tokens);
    for (const auto& k : kw.keywords) {
        if (k.find(' ') != std::string::npos && joined.find(" " + k + " ") != std::string::npos) return false;
    }
    return true;
}

double nonalpha_ratio(std::string_view text) {
    std::size_t visible = 0;
    std::size_t nonalpha = 0;
    for (char32_t c : text::decode_utf8(text)) {
        if (text::is_space(c)) continue;
        ++visible;
        if (!text::is_letter(c)) ++nonalpha;
    }
    if (visible == 0) return 1.0;
    return static_cast<double>(nonalpha) / static_cast<double>(visible);
}

bool mentions_location(std::span<const std::string> tokens, const Gazetteer& gazetteer) {
    for (const auto& t : tokens) {
        if (in_any(text::to_lower(t), gazetteer)) return true;
    }
    const auto joined = joined_lower(tokens);
    for (const auto* set : {&gazetteer.countries, &gazetteer.nationalities, &gazetteer.cities}) {
        for (const auto& entry : *set) {
            if (entry.find(' ') != std::string::npos && joined.find(" " + entry + " ") != std::string::npos) {
                return true;
            }
        }
    }
    return false;
}

bool starts_with_city_dateline(std::string_view text, const Gazetteer& gazetteer) {
    const auto spans = text::tokenize_spans(text);
    if (spans.empty()) return false;
    if (!gazetteer.cities.contains(text::to_lower(spans.front().surface))) return false;
    std::size_t i = spans.front().end;
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) ++i;
    return i < text.size() && text[i] == '.';
}

FilterVerdict apply_filters(const RawDocument& doc, std::span<const std::string> tokens,
                            const KeywordList& kw, const FilterRules& rules) {
    if (rules.require_location && rules.gazetteer.empty()) {
        throw Error(ErrorCode::MissingGazetteer, "location rule is enabled but the gazetteer is empty");
    }
    FilterVerdict v;
    auto reject = [&](RejectReason r) { v.reasons.push_back(r); };

    if (!contains_keyword(tokens, kw)) {
        reject(RejectReason::NoKeyword);
    } else if (intruder_only(tokens, kw)) {
        reject(RejectReason::IntruderOnly);
    }
    if (doc.ressort) {
        const auto ressort = text::to_lower(*doc.ressort);
        for (const auto& forbidden : rules.forbidden_ressort_substrings) {
            if (ressort.find(text::to_lower(forbidden)) != std::string::npos) {
                reject(RejectReason::ForbiddenRessort);
                break;
            }
        }
    }
    if (tokens.size() < rules.min_tokens) reject(RejectReason::TooShort);
    if (tokens.size() > rules.max_tokens) reject(RejectReason::TooLong);
    if (!(nonalpha_ratio(doc.text) < rules.max_nonalpha_ratio)) reject(RejectReason::NonAlphaRatio);
    if (rules.require_location && !mentions_location(tokens, rules.gazetteer)) {
        reject(RejectReason::NoLocation);
    }
    if (rules.gazetteer.cities.empty()) {
        static std::atomic<bool> warned{false};
        if (!warned.exchange(true)) spdlog::warn("gazetteer has no city list; skipping the dateline rule");
    } else if (starts_with_city_dateline(doc.text, rules.gazetteer)) {
        reject(RejectReason::CityDateline);
    }
    v.keep = v.reasons.empty();
    return v;
}

namespace {

std::vector<std::string> string_list(const json& j, const char* key) {
    std::vector<std::string> out;
    if (!j.contains(key)) return out;
    for (const auto& v : j.at(key)) out.push_back(v.get<std::string>());
    return out;
}

std::set<std::string> lowered_set(const json& j, const char* key) {
    std::set<std::string> out;
    for (const auto& s : string_list(j, key)) out.insert(text::to_lower(text::trim(s)));
    return out;
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, path + ": " + e.what());
    }
}

}  // namespace

Gazetteer load_gazetteer(const std::string& path) {
    const auto j = read_json_file(path);
    Gazetteer g;
    g.countries = lowered_set(j, "countries");
    g.nationalities = lowered_set(j, "nationalities");
    g.cities = lowered_set(j, "cities");
    return g;
}

HazardConfig load_hazard_config(const std::string& path, const std::string& gazetteer_path) {
    const auto j = read_json_file(path);
    HazardConfig cfg;
    try {
        cfg.keywords = KeywordList::make(j.at("hazard").get<std::string>(), string_list(j, "keywords"),
                                         string_list(j, "intruders"));
        if (j.contains("agency_markers")) cfg.agency_markers = lowered_set(j, "agency_markers");
        if (j.contains("filter")) {
            const auto& f = j.at("filter");
            cfg.rules.min_tokens = f.value("min_tokens", cfg.rules.min_tokens);
            cfg.rules.max_tokens = f.value("max_tokens", cfg.rules.max_tokens);
            cfg.rules.max_nonalpha_ratio = f.value("max_nonalpha_ratio", cfg.rules.max_nonalpha_ratio);
            cfg.rules.require_location = f.value("require_location", cfg.rules.require_location);
            if (f.contains("forbidden_ressort_substrings")) {
                cfg.rules.forbidden_ressort_substrings = string_list(f, "forbidden_ressort_substrings");
            }
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ConfigError, path + ": " + e.what());
    }
    if (!gazetteer_path.empty()) cfg.rules.gazetteer = load_gazetteer(gazetteer_path);
    cfg.rules.validate();
    return cfg;
}

IngestResult ingest(std::vector<RawDocument> docs, const HazardConfig& cfg) {
    cfg.rules.validate();
    if (cfg.rules.require_location && cfg.rules.gazetteer.empty()) {
        throw Error(ErrorCode::MissingGazetteer, "location rule is enabled but the gazetteer is empty");
    }
    IngestResult result;

    std::unordered_set<std::string> seen_records;
    std::map<std::string, std::size_t> id_count;
    std::vector<RawDocument> unique;
    for (auto& d : docs) {
        if (!seen_records.insert(document_to_json_line(d)).second) {
            ++result.exact_duplicates;
            continue;
        }
        if (++id_count[d.id] > 1) {
            throw Error(ErrorCode::DuplicateId, "document id '" + d.id + "' used by two different records");
        }
        unique.push_back(std::move(d));
    }

    for (auto& d : unique) {
        const auto cleaned = strip_markup(d.text);
        auto segments = split_concatenated(cleaned, cfg.agency_markers);
        const bool was_split = segments.size() > 1;
        if (was_split) result.segments_created += segments.size();
        for (std::size_t s = 0; s < segments.size(); ++s) {
            RawDocument seg = d;
            seg.text = std::move(segments[s]);
            if (was_split) {
                seg.id = d.id + "#" + std::to_string(s + 1);
                seg.annotations.clear();  // tagger output no longer aligns
            }
            const auto tokens = text::tokenize(seg.text);
            auto verdict = apply_filters(seg, tokens, cfg.keywords, cfg.rules);
            if (verdict.keep) {
                result.kept.push_back(std::move(seg));
            } else {
                result.rejected.push_back({seg.id, std::move(verdict.reasons)});
            }
        }
    }
    std::sort(result.kept.begin(), result.kept.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    std::sort(result.rejected.begin(), result.rejected.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    return result;
}

RawDocument document_from_json_line(std::string_view line, std::size_t line_no) {
    auto where = [&] { return "line " + std::to_string(line_no) + ": "; };
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, where() + e.what());
    }
    RawDocument d;
    try {
        d.id = j.at("id").get<std::string>();
        d.text = j.at("text").get<std::string>();
        d.outlet = j.value("outlet", std::string{});
        d.date = parse_date(j.at("date").get<std::string>());
        if (j.contains("ressort") && !j.at("ressort").is_null()) d.ressort = j.at("ressort").get<std::string>();
        d.hazard = j.value("hazard", std::string{});
        if (j.contains("annotations")) {
            for (const auto& row : j.at("annotations")) {
                TokenAnnotation a;
                a.surface = row.at(0).get<std::string>();
                if (row.size() > 1 && !row.at(1).is_null()) a.lemma = row.at(1).get<std::string>();
                if (row.size() > 2 && !row.at(2).is_null()) a.pos = row.at(2).get<std::string>();
                d.annotations.push_back(std::move(a));
            }
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, where() + e.what());
    } catch (const Error& e) {
        throw Error(ErrorCode::ParseError, where() + e.what());
    }
    if (d.id.empty()) throw Error(ErrorCode::ParseError, where() + "empty document id");
    if (d.text.empty()) throw Error(ErrorCode::ParseError, where() + "empty text for '" + d.id + "'");
    return d;
}

std::string document_to_json_line(const RawDocument& d) {
    json j;
    j["id"] = d.id;
    j["text"] = d.text;
    j["outlet"] = d.outlet;
    j["date"] = format_date(d.date);
    j["ressort"] = d.ressort ? json(*d.ressort) : json(nullptr);
    j["hazard"] = d.hazard;
    if (!d.annotations.empty()) {
        json rows = json::array();
        for (const auto& a : d.annotations) {
            rows.push_back(json::array({a.surface, a.lemma ? json(*a.lemma) : json(nullptr),
                                        a.pos ? json(*a.pos) : json(nullptr)}));
        }
        j["annotations"] = std::move(rows);
    }
    return j.dump();
}

std::vector<RawDocument> read_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
    std::vector<RawDocument> docs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        docs.push_back(document_from_json_line(line, line_no));
    }
    return docs;
}

void write_jsonl(const std::string& path, std::span<const RawDocument> docs) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    for (const auto& d : docs) out << document_to_json_line(d) << '\n';
}

void write_rejections_csv(const std::string& path, std::span<const Rejection> rejected) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    csv::write_row(out, {"id", "reasons"});
    for (const auto& r : rejected) {
        std::vector<std::string> names;
        for (auto reason : r.reasons) names.emplace_back(to_string(reason));
        csv::write_row(out, {r.id, text::join(names, ";")});
    }
}

}  // namespace hazardtm::corpus
