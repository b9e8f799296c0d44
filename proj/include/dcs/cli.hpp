#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dcs/corpus.hpp"
#include "dcs/embedder.hpp"
#include "dcs/index.hpp"
#include "dcs/knowledge_graph.hpp"
#include "dcs/llm.hpp"
#include "dcs/query_enhance.hpp"
#include "dcs/rerank.hpp"
#include "dcs/retrieval.hpp"

namespace dcs {

/// A remote dependency. `endpoint` is empty (not configured), a URL, or a
/// local stand-in: "mock" / "mock:<arg>" for embedder and LLM, "oracle" or
/// "mock" for the scorer.
struct ServiceConfig {
  std::string endpoint;
  std::string auth_env;
  int timeout_ms = 30000;
  int max_retries = 2;
};

struct AppConfig {
  std::filesystem::path corpus;
  std::filesystem::path index;
  std::filesystem::path tasks;
  std::filesystem::path prompts;  // optional prompts.toml
  ServiceConfig embedder{"", "DEEPCODESEEK_EMBEDDER_TOKEN"};
  std::size_t embed_dim = 0;  // 0: 512 for the mock, probed from a remote embedder
  std::size_t embed_batch = 32;
  ServiceConfig llm{"", "DEEPCODESEEK_LLM_TOKEN"};
  ServiceConfig scorer{"", "DEEPCODESEEK_SCORER_TOKEN"};
  std::string scorer_mode = "pair";  // pair | raw
  PipelineConfig pipeline;
  std::size_t rerank_depth = 40;
  std::size_t parallelism = 1;
  std::string global_scope = "global";

  /// Throws ConfigError: parallelism >= 1, well-formed URLs, valid pipeline.
  void validate() const;
};

/// Overlays a parsed deepcodeseek.toml on `base`. Unknown keys are errors.
AppConfig apply_config_file(AppConfig base, const Json& toml);

using EnvLookup = std::function<const char*(const char*)>;

/// Overlays DEEPCODESEEK_* variables: CORPUS, INDEX, TASKS, PROMPTS,
/// EMBEDDER, LLM, SCORER, PARALLELISM.
AppConfig apply_environment(AppConfig base, const EnvLookup& getenv);

/// Null when the endpoint is empty.
std::unique_ptr<Embedder> make_embedder(const AppConfig& cfg);
std::unique_ptr<LlmClient> make_llm(const AppConfig& cfg);

/// Hands out the scorer for one task. The oracle needs the task's ground
/// truth and is built per task; every other scorer is shared.
class ScorerProvider {
 public:
  ScorerProvider() = default;
  ScorerProvider(const AppConfig& cfg, const DocumentTexts* documents);
  bool configured() const { return oracle_ || shared_ != nullptr; }
  bool oracle() const { return oracle_; }
  /// Throws ConfigError for the oracle without a ground truth.
  std::shared_ptr<const Scorer> for_task(std::string_view ground_truth) const;
  std::string tag() const;

 private:
  bool oracle_ = false;
  const DocumentTexts* documents_ = nullptr;
  std::shared_ptr<const Scorer> shared_;
};

/// Parses `bench --configs`: "none" or "rerank@<depth>".
struct BenchConfig {
  std::string label;
  std::optional<std::size_t> rerank_depth;
};
std::vector<BenchConfig> parse_bench_configs(std::string_view text);

/// Entry point behind the deepcodeseek executable. `args` excludes argv[0].
/// Returns the process exit status: 0 ok, 2 config, 3 transport, 4 data.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const EnvLookup& getenv = nullptr);

}  // namespace dcs
