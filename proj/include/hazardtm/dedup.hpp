#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace hazardtm::dedup {

struct MinHashSignature {
    std::string doc_id;
    std::vector<std::uint64_t> values;
    std::uint64_t seed = 0;

    bool operator==(const MinHashSignature&) const = default;
};

struct DuplicateGroups {
    std::vector<std::vector<std::string>> groups;          // each sorted; groups ordered by representative
    std::map<std::size_t, std::string> representatives;    // group index -> chosen id

    std::vector<std::string> representative_ids() const;
};

struct LshParams {
    std::size_t bands = 32;
    std::size_t rows = 4;
};

inline constexpr std::size_t kDefaultNumHashes = 128;
inline constexpr std::size_t kDefaultShingleSize = 3;
inline constexpr double kDefaultThreshold = 0.8;

/// Contiguous n-token joins (single space separator).
std::set<std::string> shingles(std::span<const std::string> tokens, std::size_t n);

MinHashSignature signature(const std::set<std::string>& shingle_set, std::size_t num_hashes,
                           std::uint64_t seed, std::string doc_id = {});

double estimate_jaccard(const MinHashSignature& a, const MinHashSignature& b);

/// Connected components over pairs with estimated Jaccard >= threshold.
/// Candidates come from banded LSH; every candidate is verified.
DuplicateGroups group_duplicates(std::span<const MinHashSignature> corpus, double threshold = kDefaultThreshold,
                                 LshParams lsh = {});

/// Probability that a pair with true similarity `jaccard` shares a bucket.
double lsh_detection_probability(double jaccard, LshParams lsh);

void write_signatures(const std::string& path, std::span<const MinHashSignature> sigs);
std::vector<MinHashSignature> read_signatures(const std::string& path);
void write_groups_csv(const std::string& path, const DuplicateGroups& groups);

}  // namespace hazardtm::dedup
