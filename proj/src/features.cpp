#include "hazardtm/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "hazardtm/binio.hpp"
#include "hazardtm/error.hpp"
#include "hazardtm/hash.hpp"
#include "hazardtm/text.hpp"
#include "json.hpp"

namespace hazardtm::features {

namespace {

constexpr char kMatrixMagic[9] = "HTMSPMAT";
constexpr std::uint32_t kMatrixVersion = 1;
constexpr std::string_view kFeatureHeader = "hazardtm-features";
constexpr int kFeatureVersion = 1;

}  // namespace

TokenizedDocument normalize_tokens(const corpus::RawDocument& doc, const std::set<std::string>& stopwords) {
    TokenizedDocument out;
    out.doc_id = doc.id;
    if (!doc.annotations.empty()) {
        out.tokens = doc.annotations;
    } else {
        for (auto& surface : text::tokenize(doc.text)) out.tokens.push_back({std::move(surface), {}, {}});
    }
    for (const auto& tok : out.tokens) {
        auto term = text::to_lower(tok.lemma ? *tok.lemma : tok.surface);
        if (text::length(term) < 3 || !text::is_alphabetic(term) || stopwords.contains(term)) continue;
        out.kept_terms.push_back(std::move(term));
        out.kept_pos.push_back(tok.pos.value_or(""));
    }
    return out;
}

std::set<std::string> load_stopwords(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open stopword list " + path);
    std::set<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        auto w = text::trim(line);
        if (w.empty() || w.front() == '#') continue;
        out.insert(text::to_lower(w));
    }
    return out;
}

FeatureSpace::FeatureSpace(std::vector<std::string> terms, std::vector<std::size_t> doc_freq,
                           std::vector<std::size_t> keyword_indices, FeatureConfig config)
    : terms_(std::move(terms)),
      doc_freq_(std::move(doc_freq)),
      keyword_indices_(std::move(keyword_indices)),
      keyword_flag_(terms_.size(), false),
      config_(std::move(config)) {
    if (doc_freq_.size() != terms_.size()) {
        throw Error(ErrorCode::ConfigError, "feature space: doc_freq length differs from term count");
    }
    std::sort(keyword_indices_.begin(), keyword_indices_.end());
    for (auto k : keyword_indices_) {
        if (k >= terms_.size()) throw Error(ErrorCode::ConfigError, "feature space: keyword index out of range");
        keyword_flag_[k] = true;
    }
    for (std::size_t i = 0; i < terms_.size(); ++i) {
        if (!index_.emplace(terms_[i], i).second) {
            throw Error(ErrorCode::ConfigError, "feature space: duplicate term '" + terms_[i] + "'");
        }
    }
}

std::size_t FeatureSpace::index_of(const std::string& term) const {
    auto it = index_.find(term);
    return it == index_.end() ? terms_.size() : it->second;
}

bool FeatureSpace::is_keyword(std::size_t index) const { return index < keyword_flag_.size() && keyword_flag_[index]; }

std::uint64_t FeatureSpace::checksum() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < terms_.size(); ++i) {
        h = fnv1a64(terms_[i], h);
        h = fnv1a64(keyword_flag_[i] ? "\x01" : "\x02", h);
    }
    return h;
}

void FeatureSpace::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    out << kFeatureHeader << '\t' << kFeatureVersion << '\n';
    out << "min_doc_freq\t" << config_.min_doc_freq << '\n';
    out << "allowed_pos\t" << text::join({config_.allowed_pos.begin(), config_.allowed_pos.end()}, ",") << '\n';
    out << "keyword_match\t" << (config_.keyword_match == KeywordMatch::Exact ? "exact" : "substring") << '\n';
    for (std::size_t i = 0; i < terms_.size(); ++i) {
        out << terms_[i] << '\t' << doc_freq_[i] << '\t' << (keyword_flag_[i] ? 1 : 0) << '\n';
    }
}

FeatureSpace FeatureSpace::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
    std::string line;
    auto header_value = [&](std::string_view key) {
        if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, path + ": truncated header");
        auto parts = text::split(line, '\t');
        if (parts.size() != 2 || parts[0] != key) {
            throw Error(ErrorCode::ParseError, path + ": expected header field '" + std::string(key) + "'");
        }
        return parts[1];
    };
    const auto version = header_value(kFeatureHeader);
    if (version != std::to_string(kFeatureVersion)) {
        throw Error(ErrorCode::ParseError, path + ": unsupported feature file version " + version);
    }
    FeatureConfig cfg;
    cfg.min_doc_freq = std::stoul(header_value("min_doc_freq"));
    for (auto& tag : text::split(header_value("allowed_pos"), ',')) {
        if (!tag.empty()) cfg.allowed_pos.insert(tag);
    }
    cfg.keyword_match = header_value("keyword_match") == "substring" ? KeywordMatch::Substring : KeywordMatch::Exact;
    std::vector<std::string> terms;
    std::vector<std::size_t> df;
    std::vector<std::size_t> kws;
    std::size_t line_no = 4;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto parts = text::split(line, '\t');
        if (parts.size() != 3) {
            throw Error(ErrorCode::ParseError, path + ": malformed line " + std::to_string(line_no));
        }
        if (parts[2] == "1") kws.push_back(terms.size());
        terms.push_back(parts[0]);
        df.push_back(std::stoul(parts[1]));
    }
    return FeatureSpace(std::move(terms), std::move(df), std::move(kws), std::move(cfg));
}

FeatureSpace build_feature_space(std::span<const TokenizedDocument> corpus, const corpus::KeywordList& keywords,
                                 const FeatureConfig& config) {
    if (corpus.empty()) throw Error(ErrorCode::EmptyFeatureSpace, "corpus is empty");

    std::map<std::string, std::size_t> df;
    std::map<std::string, std::map<std::string, std::size_t>> pos_counts;
    for (const auto& doc : corpus) {
        std::set<std::string> seen;
        for (std::size_t i = 0; i < doc.kept_terms.size(); ++i) {
            const auto& term = doc.kept_terms[i];
            if (seen.insert(term).second) ++df[term];
            if (i < doc.kept_pos.size() && !doc.kept_pos[i].empty()) ++pos_counts[term][doc.kept_pos[i]];
        }
    }

    auto is_keyword_term = [&](const std::string& term) {
        if (keywords.keywords.contains(term)) return true;
        if (config.keyword_match == KeywordMatch::Substring) {
            return std::any_of(keywords.keywords.begin(), keywords.keywords.end(),
                               [&](const std::string& k) { return term.find(k) != std::string::npos; });
        }
        return false;
    };
    // Majority tag decides; ties go to the lexicographically smaller tag.
    auto pos_allowed = [&](const std::string& term) {
        if (config.allowed_pos.empty()) return true;
        auto it = pos_counts.find(term);
        if (it == pos_counts.end()) return true;
        const auto best = std::max_element(it->second.begin(), it->second.end(),
                                           [](const auto& a, const auto& b) { return a.second < b.second; });
        return config.allowed_pos.contains(best->first);
    };

    struct Entry {
        std::string term;
        std::size_t df;
        bool keyword;
    };
    std::vector<Entry> entries;
    for (const auto& [term, count] : df) {
        const bool kw = is_keyword_term(term);
        if (kw || (count >= config.min_doc_freq && pos_allowed(term))) entries.push_back({term, count, kw});
    }
    if (entries.empty()) {
        throw Error(ErrorCode::EmptyFeatureSpace, "no term reaches min_doc_freq=" + std::to_string(config.min_doc_freq));
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        return a.df != b.df ? a.df > b.df : a.term < b.term;
    });
    std::vector<std::string> terms;
    std::vector<std::size_t> freqs;
    std::vector<std::size_t> kw_idx;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        terms.push_back(entries[i].term);
        freqs.push_back(entries[i].df);
        if (entries[i].keyword) kw_idx.push_back(i);
    }
    return FeatureSpace(std::move(terms), std::move(freqs), std::move(kw_idx), config);
}

double DocTermMatrix::row_sum(std::size_t d) const {
    double s = 0.0;
    for (auto i = row_ptr[d]; i < row_ptr[d + 1]; ++i) s += values[i];
    return s;
}

std::vector<std::size_t> DocTermMatrix::empty_rows() const {
    std::vector<std::size_t> out;
    for (std::size_t d = 0; d < num_docs; ++d) {
        if (row_empty(d)) out.push_back(d);
    }
    return out;
}

TermRow term_row(const TokenizedDocument& doc, const FeatureSpace& fs) {
    std::map<std::uint32_t, double> counts;
    for (const auto& t : doc.kept_terms) {
        const auto idx = fs.index_of(t);
        if (idx < fs.size()) counts[static_cast<std::uint32_t>(idx)] += 1.0;
    }
    TermRow row;
    for (const auto& [c, v] : counts) {
        row.cols.push_back(c);
        row.counts.push_back(v);
    }
    return row;
}

DocTermMatrix vectorize(std::span<const TokenizedDocument> corpus, const FeatureSpace& fs, Weighting weighting) {
    DocTermMatrix m;
    m.num_docs = corpus.size();
    m.num_terms = fs.size();
    m.weighting = weighting;
    m.fs_checksum = fs.checksum();
    m.doc_ids.reserve(corpus.size());
    for (const auto& doc : corpus) {
        auto row = term_row(doc, fs);
        m.doc_ids.push_back(doc.doc_id);
        m.cols.insert(m.cols.end(), row.cols.begin(), row.cols.end());
        m.values.insert(m.values.end(), row.counts.begin(), row.counts.end());
        m.row_ptr.push_back(m.values.size());
    }
    if (weighting == Weighting::TfIdf) {
        std::vector<std::size_t> df(m.num_terms, 0);
        for (auto c : m.cols) ++df[c];
        const double n = static_cast<double>(m.num_docs);
        m.idf.assign(m.num_terms, 0.0);
        for (std::size_t t = 0; t < m.num_terms; ++t) {
            if (df[t] > 0) m.idf[t] = std::log(n / static_cast<double>(df[t]));
        }
        for (std::size_t i = 0; i < m.values.size(); ++i) m.values[i] *= m.idf[m.cols[i]];
    }
    return m;
}

void DocTermMatrix::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    binio::put_magic(out, kMatrixMagic);
    binio::put<std::uint32_t>(out, kMatrixVersion);
    binio::put<std::uint8_t>(out, weighting == Weighting::Counts ? 0 : 1);
    binio::put<std::uint64_t>(out, num_docs);
    binio::put<std::uint64_t>(out, num_terms);
    binio::put<std::uint64_t>(out, nnz());
    binio::put<std::uint64_t>(out, fs_checksum);
    for (const auto& id : doc_ids) binio::put_string(out, id);
    if (weighting == Weighting::TfIdf) {
        for (auto v : idf) binio::put<double>(out, v);
    }
    for (std::size_t d = 0; d < num_docs; ++d) {
        for (auto i = row_ptr[d]; i < row_ptr[d + 1]; ++i) {
            binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
            binio::put<std::uint32_t>(out, cols[i]);
            binio::put<double>(out, values[i]);
        }
    }
}

DocTermMatrix DocTermMatrix::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
    binio::expect_magic(in, kMatrixMagic, "sparse matrix");
    const auto version = binio::get<std::uint32_t>(in);
    if (version != kMatrixVersion) {
        throw Error(ErrorCode::ParseError, "unsupported matrix version " + std::to_string(version));
    }
    DocTermMatrix m;
    m.weighting = binio::get<std::uint8_t>(in) == 0 ? Weighting::Counts : Weighting::TfIdf;
    m.num_docs = binio::get<std::uint64_t>(in);
    m.num_terms = binio::get<std::uint64_t>(in);
    const auto nnz = binio::get<std::uint64_t>(in);
    m.fs_checksum = binio::get<std::uint64_t>(in);
    for (std::size_t d = 0; d < m.num_docs; ++d) m.doc_ids.push_back(binio::get_string(in));
    if (m.weighting == Weighting::TfIdf) {
        m.idf.resize(m.num_terms);
        for (auto& v : m.idf) v = binio::get<double>(in);
    }
    m.row_ptr.assign(m.num_docs + 1, 0);
    std::size_t prev_doc = 0;
    for (std::uint64_t i = 0; i < nnz; ++i) {
        const auto d = binio::get<std::uint32_t>(in);
        const auto c = binio::get<std::uint32_t>(in);
        const auto v = binio::get<double>(in);
        if (d >= m.num_docs || c >= m.num_terms || d < prev_doc) {
            throw Error(ErrorCode::ParseError, path + ": triplet out of range or out of order");
        }
        prev_doc = d;
        ++m.row_ptr[d + 1];
        m.cols.push_back(c);
        m.values.push_back(v);
    }
    for (std::size_t d = 0; d < m.num_docs; ++d) m.row_ptr[d + 1] += m.row_ptr[d];
    return m;
}

void write_tokenized_jsonl(const std::string& path, std::span<const TokenizedDocument> docs) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    for (const auto& d : docs) {
        nlohmann::json j;
        j["id"] = d.doc_id;
        j["terms"] = d.kept_terms;
        if (std::any_of(d.kept_pos.begin(), d.kept_pos.end(), [](const auto& p) { return !p.empty(); })) {
            j["pos"] = d.kept_pos;
        }
        out << j.dump() << '\n';
    }
}

std::vector<TokenizedDocument> read_tokenized_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
    std::vector<TokenizedDocument> docs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            TokenizedDocument d;
            d.doc_id = j.at("id").get<std::string>();
            d.kept_terms = j.at("terms").get<std::vector<std::string>>();
            if (j.contains("pos")) {
                d.kept_pos = j.at("pos").get<std::vector<std::string>>();
            } else {
                d.kept_pos.assign(d.kept_terms.size(), "");
            }
            if (d.kept_pos.size() != d.kept_terms.size()) {
                throw Error(ErrorCode::ParseError, "pos and terms differ in length");
            }
            docs.push_back(std::move(d));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::ParseError, path + " line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return docs;
}

}  // namespace hazardtm::features
