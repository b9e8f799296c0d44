#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dcs/corpus.hpp"
#include "dcs/llm.hpp"
#include "dcs/query_enhance.hpp"
#include "dcs/retrieval.hpp"

namespace dcs {

struct RetrievalOutcome {
  std::string task_id;
  std::optional<std::size_t> ground_truth_rank;  // none = not retrieved
  StageLatencies stage_latencies;
  QueryStrategy strategy = QueryStrategy::prefix;
  bool reranked = false;
};

RetrievalOutcome outcome_of(const RankedList& list);

/// Percentage of outcomes whose rank is present and <= K, per K. Throws
/// DataError on an empty outcome set or an empty/zero K list.
std::map<std::size_t, double> topk_accuracy(std::span<const RetrievalOutcome> outcomes,
                                            const std::vector<std::size_t>& ks);

/// Mean of 1/rank for ranks <= k, else 0.
double mrr_at_k(std::span<const RetrievalOutcome> outcomes, std::size_t k);

struct Percentiles {
  double p50 = 0.0;
  double p95 = 0.0;
  double max = 0.0;
  std::size_t count = 0;

  friend bool operator==(const Percentiles&, const Percentiles&) = default;
};

/// Nearest-rank percentile: the ceil(p/100 * n)-th smallest value.
double nearest_rank(std::vector<double> values, double p);
Percentiles percentiles(std::vector<double> values);

struct LatencySummary {
  Percentiles end_to_end;  // "total" stage when recorded, else the stage sum
  std::map<std::string, Percentiles> stages;

  friend bool operator==(const LatencySummary&, const LatencySummary&) = default;
};

LatencySummary latency_stats(std::span<const RetrievalOutcome> outcomes);
Json to_json(const LatencySummary& summary);

// Intent judge.

inline constexpr std::string_view kJudgeSystemPrompt =
    "Role  : ServiceNow code-completion judge\n"
    "Input : (a) partial ServiceNow JavaScript Glide code, (b) proposed Script Include namespace, "
    "(c) all the possible method descriptions for the given namespace\n"
    "Task  : Decide whether the namespace is the natural, intended fit for completing the partial "
    "code snippet.\n"
    "Reply : Output only \"Yes.\" if it fits, otherwise \"No.\" (no extra text).";

enum class Verdict { yes, no };

struct IntentJudgeResult {
  std::string task_id;
  std::optional<Verdict> verdict;  // none on parse failure
  std::string raw;
};

std::string judge_user_prompt(std::string_view code, std::string_view ns,
                              std::string_view api_description);

/// One line per method ("name(signature): jsdoc"), else the namespace summary.
std::string api_description(const ScriptIncludeRecord& record);

/// "Yes." / "No." on the first non-blank line, nothing else.
std::optional<Verdict> parse_verdict(std::string_view raw);

/// Throws DataError when the ground truth is missing from the corpus and
/// TransportError when the LLM fails.
IntentJudgeResult judge_intent(const CompletionTask& task, const Corpus& corpus, const LlmClient& llm);

Intent intent_from(const IntentJudgeResult& result);

// Reports.

struct EvalReport {
  std::string label;
  std::size_t n = 0;
  std::size_t failed = 0;
  std::map<std::size_t, double> topk;
  std::map<std::size_t, double> mrr;
  std::optional<LatencySummary> latency;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

using LabeledOutcomes = std::pair<std::string, std::vector<RetrievalOutcome>>;

EvalReport evaluate_outcomes(std::string label, std::span<const RetrievalOutcome> outcomes,
                             const std::vector<std::size_t>& ks, bool include_latency,
                             std::size_t failed = 0);

/// Rows keep insertion order in markdown/CSV; JSON is keyed by label.
struct ReportSet {
  std::vector<std::size_t> ks;
  std::vector<EvalReport> reports;

  Json to_json() const;
  std::string markdown() const;
  std::string csv() const;
  static ReportSet from_json(const Json& j);
};

ReportSet build_report(const std::vector<LabeledOutcomes>& sets, const std::vector<std::size_t>& ks,
                       bool include_latency);

// Pretraining knowledge check: complete code with no retrieval context and
// look for the ground-truth namespace in the output.

struct KnowledgeCheckResult {
  std::size_t n = 0;
  std::size_t hits = 0;
  double fraction = 0.0;
  std::vector<std::string> failed_ids;
};

KnowledgeCheckResult knowledge_check(const std::vector<CompletionTask>& tasks, const LlmClient& llm,
                                     const PromptTemplates& prompts, std::size_t parallelism);

}  // namespace dcs
