#include "hazardtm/dedup.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include "hazardtm/binio.hpp"
#include "hazardtm/csv.hpp"
#include "hazardtm/error.hpp"
#include "hazardtm/hash.hpp"

namespace hazardtm::dedup {

namespace {

constexpr char kSignatureMagic[9] = "HTMMHSIG";
constexpr std::uint32_t kSignatureVersion = 1;

std::uint64_t slot_seed(std::uint64_t seed, std::size_t slot) {
    return splitmix64(splitmix64(seed) ^ (0x5851f42d4c957f2dULL * (slot + 1)));
}

struct UnionFind {
    std::vector<std::size_t> parent;
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

}  // namespace

std::vector<std::string> DuplicateGroups::representative_ids() const {
    std::vector<std::string> out;
    out.reserve(representatives.size());
    for (const auto& [idx, id] : representatives) out.push_back(id);
    std::sort(out.begin(), out.end());
    return out;
}

std::set<std::string> shingles(std::span<const std::string> tokens, std::size_t n) {
    if (n == 0) throw Error(ErrorCode::ConfigError, "shingle size must be >= 1");
    std::set<std::string> out;
    if (tokens.size() < n) return out;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        std::string s = tokens[i];
        for (std::size_t k = 1; k < n; ++k) {
            s += ' ';
            s += tokens[i + k];
        }
        out.insert(std::move(s));
    }
    return out;
}

MinHashSignature signature(const std::set<std::string>& shingle_set, std::size_t num_hashes, std::uint64_t seed,
                           std::string doc_id) {
    if (shingle_set.empty()) {
        throw Error(ErrorCode::EmptyShingleSet, "cannot sign an empty shingle set" +
                                                    (doc_id.empty() ? std::string{} : " (" + doc_id + ")"));
    }
    std::vector<std::uint64_t> seeds(num_hashes);
    for (std::size_t i = 0; i < num_hashes; ++i) seeds[i] = slot_seed(seed, i);

    MinHashSignature sig;
    sig.doc_id = std::move(doc_id);
    sig.seed = seed;
    sig.values.assign(num_hashes, ~std::uint64_t{0});
    for (const auto& sh : shingle_set) {
        const auto base = fnv1a64(sh);
        for (std::size_t i = 0; i < num_hashes; ++i) {
            const auto h = splitmix64(base ^ seeds[i]);
            if (h < sig.values[i]) sig.values[i] = h;
        }
    }
    return sig;
}

double estimate_jaccard(const MinHashSignature& a, const MinHashSignature& b) {
    if (a.values.size() != b.values.size() || a.seed != b.seed) {
        throw Error(ErrorCode::SignatureMismatch, "signatures of '" + a.doc_id + "' and '" + b.doc_id +
                                                      "' use different hash families");
    }
    if (a.values.empty()) return 0.0;
    std::size_t agree = 0;
    for (std::size_t i = 0; i < a.values.size(); ++i) agree += a.values[i] == b.values[i] ? 1 : 0;
    return static_cast<double>(agree) / static_cast<double>(a.values.size());
}

double lsh_detection_probability(double jaccard, LshParams lsh) {
    return 1.0 - std::pow(1.0 - std::pow(jaccard, static_cast<double>(lsh.rows)), static_cast<double>(lsh.bands));
}

DuplicateGroups group_duplicates(std::span<const MinHashSignature> corpus, double threshold, LshParams lsh) {
    if (!(threshold > 0.0 && threshold <= 1.0)) {
        throw Error(ErrorCode::ConfigError, "dedup threshold must lie in (0, 1]");
    }
    const std::size_t n = corpus.size();
    DuplicateGroups result;
    if (n == 0) return result;
    const auto width = corpus.front().values.size();
    for (const auto& s : corpus) {
        if (s.values.size() != width || s.seed != corpus.front().seed) {
            throw Error(ErrorCode::SignatureMismatch, "corpus mixes signature families");
        }
    }
    if (lsh.bands * lsh.rows > width || lsh.rows == 0) {
        throw Error(ErrorCode::ConfigError, "LSH bands x rows exceeds signature length");
    }

    UnionFind uf(n);
    std::set<std::pair<std::size_t, std::size_t>> checked;
    for (std::size_t band = 0; band < lsh.bands; ++band) {
        std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets;
        for (std::size_t d = 0; d < n; ++d) {
            std::uint64_t key = splitmix64(band);
            for (std::size_t r = 0; r < lsh.rows; ++r) key = splitmix64(key ^ corpus[d].values[band * lsh.rows + r]);
            buckets[key].push_back(d);
        }
        for (const auto& [key, members] : buckets) {
            for (std::size_t i = 0; i < members.size(); ++i) {
                for (std::size_t j = i + 1; j < members.size(); ++j) {
                    const auto a = members[i];
                    const auto b = members[j];
                    if (!checked.insert({a, b}).second) continue;
                    if (estimate_jaccard(corpus[a], corpus[b]) >= threshold) uf.unite(a, b);
                }
            }
        }
    }

    std::map<std::size_t, std::vector<std::string>> components;
    for (std::size_t d = 0; d < n; ++d) components[uf.find(d)].push_back(corpus[d].doc_id);
    for (auto& [root, members] : components) std::sort(members.begin(), members.end());
    std::vector<std::vector<std::string>> groups;
    for (auto& [root, members] : components) groups.push_back(std::move(members));
    std::sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
    for (std::size_t g = 0; g < groups.size(); ++g) result.representatives[g] = groups[g].front();
    result.groups = std::move(groups);
    return result;
}

void write_signatures(const std::string& path, std::span<const MinHashSignature> sigs) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    const std::uint32_t num_hashes = sigs.empty() ? 0 : static_cast<std::uint32_t>(sigs.front().values.size());
    const std::uint64_t seed = sigs.empty() ? 0 : sigs.front().seed;
    std::uint32_t id_width = 0;
    for (const auto& s : sigs) {
        if (s.values.size() != num_hashes || s.seed != seed) {
            throw Error(ErrorCode::SignatureMismatch, "cannot persist signatures of different families together");
        }
        id_width = std::max<std::uint32_t>(id_width, static_cast<std::uint32_t>(s.doc_id.size()));
    }
    binio::put_magic(out, kSignatureMagic);
    binio::put<std::uint32_t>(out, kSignatureVersion);
    binio::put<std::uint32_t>(out, num_hashes);
    binio::put<std::uint64_t>(out, seed);
    binio::put<std::uint64_t>(out, sigs.size());
    binio::put<std::uint32_t>(out, id_width);
    for (const auto& s : sigs) {
        std::string padded = s.doc_id;
        padded.resize(id_width, '\0');
        out.write(padded.data(), id_width);
        for (auto v : s.values) binio::put<std::uint64_t>(out, v);
    }
}

std::vector<MinHashSignature> read_signatures(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
    binio::expect_magic(in, kSignatureMagic, "signature");
    const auto version = binio::get<std::uint32_t>(in);
    if (version != kSignatureVersion) {
        throw Error(ErrorCode::ParseError, "unsupported signature file version " + std::to_string(version));
    }
    const auto num_hashes = binio::get<std::uint32_t>(in);
    const auto seed = binio::get<std::uint64_t>(in);
    const auto count = binio::get<std::uint64_t>(in);
    const auto id_width = binio::get<std::uint32_t>(in);
    std::vector<MinHashSignature> sigs;
    sigs.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        MinHashSignature s;
        std::string id(id_width, '\0');
        if (id_width > 0 && !in.read(id.data(), id_width)) throw Error(ErrorCode::ParseError, "truncated signature file");
        id.resize(std::strlen(id.c_str()));
        s.doc_id = std::move(id);
        s.seed = seed;
        s.values.resize(num_hashes);
        for (auto& v : s.values) v = binio::get<std::uint64_t>(in);
        sigs.push_back(std::move(s));
    }
    return sigs;
}

void write_groups_csv(const std::string& path, const DuplicateGroups& groups) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    csv::write_row(out, {"representative_id", "member_id"});
    for (std::size_t g = 0; g < groups.groups.size(); ++g) {
        for (const auto& member : groups.groups[g]) csv::write_row(out, {groups.representatives.at(g), member});
    }
}

}  // namespace hazardtm::dedup
