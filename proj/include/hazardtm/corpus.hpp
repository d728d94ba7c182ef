#pragma once

#include <chrono>
#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hazardtm::corpus {

/// One row of an external tagger's output (lemma and POS may be missing).
struct TokenAnnotation {
    std::string surface;
    std::optional<std::string> lemma;
    std::optional<std::string> pos;

    bool operator==(const TokenAnnotation&) const = default;
};

struct RawDocument {
    std::string id;
    std::string text;
    std::string outlet;
    std::chrono::year_month_day date{};
    std::optional<std::string> ressort;
    std::string hazard;
    std::vector<TokenAnnotation> annotations;  // empty when no tagger layer

    bool operator==(const RawDocument&) const = default;
};

std::chrono::year_month_day parse_date(std::string_view iso);
std::string format_date(const std::chrono::year_month_day& date);

/// Hazard keywords (matched as substrings of tokens, so compounds hit) and
/// intruders (whole tokens only). Construct through make() to normalize.
struct KeywordList {
    std::string hazard;
    std::set<std::string> keywords;
    std::set<std::string> intruders;

    static KeywordList make(std::string hazard, const std::vector<std::string>& keywords,
                            const std::vector<std::string>& intruders);
};

struct Gazetteer {
    std::set<std::string> countries;
    std::set<std::string> nationalities;
    std::set<std::string> cities;

    bool empty() const { return countries.empty() && nationalities.empty() && cities.empty(); }
};

struct FilterRules {
    std::size_t min_tokens = 30;
    std::size_t max_tokens = 1700;
    double max_nonalpha_ratio = 0.11;
    std::vector<std::string> forbidden_ressort_substrings{"lokal"};
    bool require_location = true;
    Gazetteer gazetteer;

    void validate() const;
};

enum class RejectReason {
    NoKeyword,
    IntruderOnly,
    ForbiddenRessort,
    TooShort,
    TooLong,
    NonAlphaRatio,
    NoLocation,
    CityDateline,
};

std::string_view to_string(RejectReason reason);
RejectReason reject_reason_from_string(std::string_view name);

struct FilterVerdict {
    bool keep = true;
    std::vector<RejectReason> reasons;
};

inline const std::set<std::string>& default_agency_markers() {
    static const std::set<std::string> markers{"dpa", "afp", "ap", "rtr", "epd", "kna"};
    return markers;
}

/// Removes every shortest `<...>` span that does not cross a line break.
std::string strip_markup(std::string_view text);

/// Splits after each parenthesized agency marker, e.g. "(dpa)". Segments
/// concatenate back to the input.
std::vector<std::string> split_concatenated(std::string_view text,
                                            const std::set<std::string>& agency_markers);

bool contains_keyword(std::span<const std::string> tokens, const KeywordList& kw);
bool intruder_only(std::span<const std::string> tokens, const KeywordList& kw);

/// Share of non-whitespace code points that are not letters.
double nonalpha_ratio(std::string_view text);

bool mentions_location(std::span<const std::string> tokens, const Gazetteer& gazetteer);

/// True when the text opens with a gazetteer city directly followed by a
/// full stop (a local-news dateline such as "Leipzig. Am Montag ...").
bool starts_with_city_dateline(std::string_view text, const Gazetteer& gazetteer);

FilterVerdict apply_filters(const RawDocument& doc, std::span<const std::string> tokens,
                            const KeywordList& kw, const FilterRules& rules);

/// Per-hazard settings loaded from one JSON file.
struct HazardConfig {
    KeywordList keywords;
    FilterRules rules;
    std::set<std::string> agency_markers = default_agency_markers();
};

HazardConfig load_hazard_config(const std::string& path, const std::string& gazetteer_path);
Gazetteer load_gazetteer(const std::string& path);

struct Rejection {
    std::string id;
    std::vector<RejectReason> reasons;
};

struct IngestResult {
    std::vector<RawDocument> kept;     // sorted by id
    std::vector<Rejection> rejected;   // sorted by id
    std::size_t exact_duplicates = 0;
    std::size_t segments_created = 0;
};

/// Drops exact duplicate records, strips markup, splits concatenated items
/// and runs the inclusion filters on every resulting segment.
IngestResult ingest(std::vector<RawDocument> docs, const HazardConfig& cfg);

std::vector<RawDocument> read_jsonl(const std::string& path);
void write_jsonl(const std::string& path, std::span<const RawDocument> docs);
RawDocument document_from_json_line(std::string_view line, std::size_t line_no);
std::string document_to_json_line(const RawDocument& doc);
void write_rejections_csv(const std::string& path, std::span<const Rejection> rejected);

}  // namespace hazardtm::corpus
