#pragma once

#include <chrono>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dcs/corpus.hpp"
#include "dcs/error.hpp"
#include "dcs/index.hpp"
#include "dcs/knowledge_graph.hpp"
#include "dcs/llm.hpp"
#include "dcs/query_enhance.hpp"

namespace dcs {

enum class FirstStage { bm25, dense };
enum class CandidateStage { bm25, dense, rerank };

std::string_view to_string(FirstStage stage);
std::optional<FirstStage> parse_first_stage(std::string_view text);
std::string_view to_string(CandidateStage stage);

struct Candidate {
  std::string ns;
  double score = 0.0;  // -inf marks a reranker failure
  CandidateStage stage = CandidateStage::dense;
  std::size_t rank = 0;  // 1-based, gap-free
  std::optional<std::size_t> original_rank;  // set once reranked

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

using StageLatencies = std::map<std::string, double>;  // stage -> milliseconds

struct RankedList {
  std::string task_id;
  QueryStrategy strategy = QueryStrategy::prefix;
  bool downgraded = false;
  bool reranked = false;
  std::vector<Candidate> candidates;
  std::optional<std::size_t> ground_truth_rank;
  StageLatencies stage_latencies;
  std::string query_text;  // not serialized; the reranker's query

  /// Recomputes ground_truth_rank from the candidate order.
  void locate(std::string_view ground_truth);
};

Json to_json(const RankedList& list, bool include_latencies = true);

struct PipelineConfig {
  FirstStage first_stage = FirstStage::dense;
  QueryStrategy strategy = QueryStrategy::prefix;
  bool fim = false;
  std::size_t k_retrieve = 40;
  bool use_kg_filter = false;
  std::optional<ScopeContext> scope_context;  // else taken from task metadata
  TrimConfig trim;
  int max_tokens = 256;
  double temperature = 0.0;

  void validate() const;
};

/// Borrowed, immutable services. Clients must be thread-safe.
struct PipelineServices {
  const IndexBundle* index = nullptr;
  const KnowledgeGraph* graph = nullptr;
  const Embedder* embedder = nullptr;
  const LlmClient* llm = nullptr;
  PromptTemplates prompts = PromptTemplates::defaults();
};

using DocumentTexts = std::map<std::string, std::string, std::less<>>;

/// Scope hints carried by a task's metadata ("package" / "scope" keys).
std::optional<ScopeContext> task_scope_context(const CompletionTask& task);

class Pipeline {
 public:
  explicit Pipeline(PipelineServices services);

  /// KG filter -> query build -> first-stage scoring over the filtered
  /// universe -> top-k cut. Errors carry the task id.
  RankedList retrieve(const CompletionTask& task, const PipelineConfig& cfg) const;

  const PipelineServices& services() const noexcept { return services_; }
  const DocumentTexts& documents() const noexcept { return documents_; }
  const NamespaceSet& universe() const noexcept { return universe_; }

 private:
  DocMask mask_for(const NamespaceSet& allowed) const;

  PipelineServices services_;
  DocumentTexts documents_;
  NamespaceSet universe_;
  std::vector<std::string> ordinals_;
};

struct BatchFailure {
  std::string task_id;
  ErrorKind kind = ErrorKind::data;
  std::string message;
};

struct BatchResult {
  std::vector<RankedList> results;  // input order, failures omitted
  std::vector<BatchFailure> failures;
};

BatchResult retrieve_batch(const Pipeline& pipeline, const std::vector<CompletionTask>& tasks,
                           const PipelineConfig& cfg, std::size_t parallelism);

/// Milliseconds since `start`.
double elapsed_ms(std::chrono::steady_clock::time_point start);

}  // namespace dcs
