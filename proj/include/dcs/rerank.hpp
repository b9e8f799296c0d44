#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dcs/retrieval.hpp"

namespace dcs {

/// The yes/no reranker scaffold. `body` is rendered with {instruction},
/// {query} and {document}; the default layout labels each field on its own line.
struct RerankTemplate {
  std::string prefix;
  std::string instruction;
  std::string body;
  std::string suffix;

  static RerankTemplate defaults();
};

struct RerankPrompt {
  std::string prefix;
  std::string instruction;
  std::string query;
  std::string document;
  std::string suffix;
  std::string assembled;  // prefix + rendered body + suffix
};

/// Throws DataError on an empty query or document.
RerankPrompt build_rerank_prompt(std::string_view query, std::string_view document,
                                 const RerankTemplate& tmpl = RerankTemplate::defaults());

/// What a scorer backend returned: generated text, token log-probabilities, or both.
struct DecisionOutput {
  std::optional<std::string> text;
  std::map<std::string, double> logprobs;
};

struct FirstTokenScore {
  double score = 0.0;
  bool parse_failure = false;
};

/// With "yes"/"no" log-probabilities (case-folded, whitespace-trimmed tokens):
/// P(yes) / (P(yes) + P(no)). Otherwise the first whitespace-delimited token of
/// the text: 1.0 if it starts with "yes", 0.0 if "no", else 0.0 flagged.
FirstTokenScore first_token_score(const DecisionOutput& output);

/// Pointwise relevance scorer: probability in [0, 1] that the answer is "yes".
/// Must be thread-safe.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual double score(const std::string& query, const std::string& document) const = 0;
  virtual std::string tag() const = 0;
};

/// 1.0 for the ground-truth document text, 0.0 for everything else.
class OracleScorer final : public Scorer {
 public:
  explicit OracleScorer(std::string target_document) : target_(std::move(target_document)) {}
  double score(const std::string&, const std::string& document) const override {
    return document == target_ ? 1.0 : 0.0;
  }
  std::string tag() const override { return "oracle"; }

 private:
  std::string target_;
};

class ConstantScorer final : public Scorer {
 public:
  explicit ConstantScorer(double value) : value_(value) {}
  double score(const std::string&, const std::string&) const override { return value_; }
  std::string tag() const override { return "constant"; }

 private:
  double value_;
};

/// Local stand-in for a cross-encoder: the fraction of distinct query tokens
/// that occur in the document, computed over the full token sets.
class OverlapScorer final : public Scorer {
 public:
  double score(const std::string& query, const std::string& document) const override;
  std::string tag() const override { return "mock-overlap"; }
};

/// Listwise backend: returns a permutation of document indices, best first.
class ListwiseReranker {
 public:
  virtual ~ListwiseReranker() = default;
  virtual std::vector<std::size_t> order(const std::string& query,
                                         const std::vector<std::string>& documents) const = 0;
  virtual std::string tag() const = 0;
};

struct RerankOptions {
  std::size_t depth = 40;
  std::size_t parallelism = 1;
};

/// Rescores the top `depth` candidates (clamped to the list length) and sorts
/// them by score descending, ties by original rank. Candidates beyond depth
/// follow in their original order. A scorer failure gives -inf (last among the
/// rescored block) and is logged. Records a "rerank" stage latency.
RankedList rerank(const RankedList& list, const DocumentTexts& documents, const Scorer& scorer,
                  const RerankOptions& options, std::string_view ground_truth = {});

/// Applies a listwise permutation to the top `depth` candidates. Throws
/// DataError if the backend's answer is not a permutation.
RankedList rerank_listwise(const RankedList& list, const DocumentTexts& documents,
                           const ListwiseReranker& reranker, std::size_t depth,
                           std::string_view ground_truth = {});

}  // namespace dcs
