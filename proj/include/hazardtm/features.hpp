#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "hazardtm/corpus.hpp"

namespace hazardtm::features {

struct TokenizedDocument {
    std::string doc_id;
    std::vector<corpus::TokenAnnotation> tokens;
    std::vector<std::string> kept_terms;
    std::vector<std::string> kept_pos;  // parallel to kept_terms; "" where untagged

    bool operator==(const TokenizedDocument&) const = default;
};

/// Lowercased lemma (or surface) of every token that is alphabetic, at least
/// three characters long and not a stopword. Uses the document's tagger layer
/// when present, the built-in tokenizer otherwise.
TokenizedDocument normalize_tokens(const corpus::RawDocument& doc, const std::set<std::string>& stopwords);

std::set<std::string> load_stopwords(const std::string& path);

enum class KeywordMatch { Exact, Substring };

struct FeatureConfig {
    std::size_t min_doc_freq = 1;
    std::set<std::string> allowed_pos;  // empty: no POS criterion
    KeywordMatch keyword_match = KeywordMatch::Exact;
};

class FeatureSpace {
public:
    FeatureSpace() = default;
    FeatureSpace(std::vector<std::string> terms, std::vector<std::size_t> doc_freq,
                 std::vector<std::size_t> keyword_indices, FeatureConfig config);

    const std::vector<std::string>& terms() const { return terms_; }
    const std::vector<std::size_t>& doc_freq() const { return doc_freq_; }
    const std::vector<std::size_t>& keyword_indices() const { return keyword_indices_; }
    const FeatureConfig& config() const { return config_; }
    std::size_t size() const { return terms_.size(); }

    /// Index of `term`, or size() when absent.
    std::size_t index_of(const std::string& term) const;
    bool is_keyword(std::size_t index) const;
    std::uint64_t checksum() const;

    void save(const std::string& path) const;
    static FeatureSpace load(const std::string& path);

private:
    std::vector<std::string> terms_;
    std::vector<std::size_t> doc_freq_;
    std::vector<std::size_t> keyword_indices_;
    std::vector<bool> keyword_flag_;
    FeatureConfig config_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Terms ordered by descending document frequency, ties lexicographic.
/// Keywords observed in the corpus are always kept.
FeatureSpace build_feature_space(std::span<const TokenizedDocument> corpus, const corpus::KeywordList& keywords,
                                 const FeatureConfig& config);

enum class Weighting { Counts, TfIdf };

/// Compressed sparse rows.
struct DocTermMatrix {
    std::size_t num_docs = 0;
    std::size_t num_terms = 0;
    Weighting weighting = Weighting::Counts;
    std::vector<std::string> doc_ids;
    std::vector<std::size_t> row_ptr{0};
    std::vector<std::uint32_t> cols;
    std::vector<double> values;
    std::vector<double> idf;  // per term, TfIdf mode only

    std::size_t nnz() const { return values.size(); }
    bool row_empty(std::size_t d) const { return row_ptr[d] == row_ptr[d + 1]; }
    double row_sum(std::size_t d) const;
    std::vector<std::size_t> empty_rows() const;
    std::uint64_t fs_checksum = 0;

    void save(const std::string& path) const;
    static DocTermMatrix load(const std::string& path);
};

/// Counts, or counts x ln(N / df) with df taken over the vectorized corpus.
DocTermMatrix vectorize(std::span<const TokenizedDocument> corpus, const FeatureSpace& fs, Weighting weighting);

/// Sparse term-count row for a single document (sorted by term index).
struct TermRow {
    std::vector<std::uint32_t> cols;
    std::vector<double> counts;
};
TermRow term_row(const TokenizedDocument& doc, const FeatureSpace& fs);

void write_tokenized_jsonl(const std::string& path, std::span<const TokenizedDocument> docs);
std::vector<TokenizedDocument> read_tokenized_jsonl(const std::string& path);

}  // namespace hazardtm::features
