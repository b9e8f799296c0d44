#pragma once

// Brute-force reference implementations. They share no code with the
// library beyond the standard library.

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

struct Ranked {
  std::string id;
  double score = 0.0;
};

/// Okapi BM25 over pre-tokenized documents, computed term by term from
/// scratch: idf = ln(1 + (N - df + 0.5) / (df + 0.5)). Repeated query terms
/// count once per occurrence. Zero scores dropped; ties by ascending id.
std::vector<Ranked> bm25(const std::vector<std::pair<std::string, std::vector<std::string>>>& docs,
                         const std::vector<std::string>& query, double k1, double b);

/// Exhaustive cosine ranking; ties by ascending id.
std::vector<Ranked> cosine(const std::vector<std::pair<std::string, std::vector<double>>>& rows,
                           const std::vector<double>& query);

/// Mean reciprocal rank at k over 1-based ranks (nullopt = not retrieved).
double mrr(const std::vector<std::optional<std::size_t>>& ranks, std::size_t k);

/// Percentage of ranks present and <= k.
double accuracy(const std::vector<std::optional<std::size_t>>& ranks, std::size_t k);

/// Classic O(nm) dynamic-programming longest common subsequence.
std::size_t lcs(const std::string& a, const std::string& b);

/// Reward truth table fixed before the implementation existed:
/// completion -> {reward for positive label, reward for negative label}.
const std::map<std::string, std::pair<double, double>>& reward_table();

}  // namespace oracle
