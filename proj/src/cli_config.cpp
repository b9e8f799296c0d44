#include <charconv>

#include <fmt/format.h>

#include "dcs/cli.hpp"
#include "dcs/error.hpp"
#include "dcs/http_services.hpp"

namespace dcs {
namespace {

template <typename T>
T typed(const Json& v, std::string_view key) {
  try {
    return v.get<T>();
  } catch (const Json::exception&) {
    throw ConfigError(fmt::format("config: '{}' has the wrong type", key));
  }
}

std::size_t positive(const Json& v, std::string_view key) {
  const auto n = typed<long long>(v, key);
  if (n < 0) throw ConfigError(fmt::format("config: '{}' must be >= 0", key));
  return static_cast<std::size_t>(n);
}

std::size_t parse_count(std::string_view text, std::string_view what) {
  std::size_t n = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), n);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError(fmt::format("{}: expected a non-negative integer, got '{}'", what, text));
  }
  return n;
}

void apply_service(ServiceConfig& svc, const Json& table, std::string_view name,
                   std::string* mode = nullptr, std::size_t* dim = nullptr, std::size_t* batch = nullptr) {
  for (const auto& [key, v] : table.items()) {
    const auto full = fmt::format("{}.{}", name, key);
    if (key == "endpoint") {
      svc.endpoint = typed<std::string>(v, full);
    } else if (key == "auth_env") {
      svc.auth_env = typed<std::string>(v, full);
    } else if (key == "timeout_ms") {
      svc.timeout_ms = static_cast<int>(positive(v, full));
    } else if (key == "max_retries") {
      svc.max_retries = static_cast<int>(positive(v, full));
    } else if (key == "mode" && mode != nullptr) {
      *mode = typed<std::string>(v, full);
    } else if (key == "dim" && dim != nullptr) {
      *dim = positive(v, full);
    } else if (key == "batch_size" && batch != nullptr) {
      *batch = positive(v, full);
    } else {
      throw ConfigError(fmt::format("config: unknown key '{}'", full));
    }
  }
}

void apply_pipeline(AppConfig& cfg, const Json& table) {
  auto& p = cfg.pipeline;
  std::optional<std::string> scope;
  std::optional<std::string> package;
  std::optional<bool> include_global;
  for (const auto& [key, v] : table.items()) {
    const auto full = "pipeline." + key;
    if (key == "strategy") {
      const auto s = typed<std::string>(v, full);
      auto parsed = parse_strategy(s);
      if (!parsed) throw ConfigError(fmt::format("config: unknown strategy '{}'", s));
      p.strategy = *parsed;
    } else if (key == "first_stage") {
      const auto s = typed<std::string>(v, full);
      auto parsed = parse_first_stage(s);
      if (!parsed) throw ConfigError(fmt::format("config: unknown first_stage '{}'", s));
      p.first_stage = *parsed;
    } else if (key == "k") {
      p.k_retrieve = positive(v, full);
    } else if (key == "rerank_depth") {
      cfg.rerank_depth = positive(v, full);
    } else if (key == "fim") {
      p.fim = typed<bool>(v, full);
    } else if (key == "kg_filter") {
      p.use_kg_filter = typed<bool>(v, full);
    } else if (key == "trim_max_lines") {
      p.trim.max_lines = positive(v, full);
    } else if (key == "protect_tail_lines") {
      p.trim.protect_tail_lines = positive(v, full);
    } else if (key == "max_tokens") {
      p.max_tokens = static_cast<int>(positive(v, full));
    } else if (key == "temperature") {
      p.temperature = typed<double>(v, full);
    } else if (key == "scope") {
      scope = typed<std::string>(v, full);
    } else if (key == "package") {
      package = typed<std::string>(v, full);
    } else if (key == "include_global") {
      include_global = typed<bool>(v, full);
    } else {
      throw ConfigError(fmt::format("config: unknown key '{}'", full));
    }
  }
  if (scope || package || include_global) {
    ScopeContext ctx = p.scope_context.value_or(ScopeContext{});
    if (scope) ctx.scope_hint = scope;
    if (package) ctx.package_hint = package;
    if (include_global) ctx.include_global = *include_global;
    p.scope_context = ctx;
  }
}

bool is_mock(std::string_view endpoint) { return endpoint == "mock" || endpoint.starts_with("mock:"); }

HttpEndpoint endpoint_of(const ServiceConfig& svc) {
  HttpEndpoint e;
  e.url = svc.endpoint;
  e.auth_env = svc.auth_env;
  e.timeout = std::chrono::milliseconds(svc.timeout_ms);
  e.max_retries = svc.max_retries;
  return e;
}

}  // namespace

void AppConfig::validate() const {
  if (parallelism < 1) throw ConfigError("parallelism must be >= 1");
  if (rerank_depth < 1) throw ConfigError("rerank depth must be >= 1");
  if (embed_batch < 1) throw ConfigError("embedder batch size must be >= 1");
  if (!embedder.endpoint.empty() && !is_mock(embedder.endpoint)) validate_url(embedder.endpoint);
  if (!llm.endpoint.empty() && !is_mock(llm.endpoint)) validate_url(llm.endpoint);
  if (!scorer.endpoint.empty() && scorer.endpoint != "oracle" && scorer.endpoint != "mock") {
    validate_url(scorer.endpoint);
  }
  if (scorer_mode != "pair" && scorer_mode != "raw") {
    throw ConfigError(fmt::format("scorer mode must be pair or raw, got '{}'", scorer_mode));
  }
  pipeline.validate();
}

AppConfig apply_config_file(AppConfig cfg, const Json& toml) {
  for (const auto& [key, v] : toml.items()) {
    if (key == "corpus") {
      cfg.corpus = typed<std::string>(v, key);
    } else if (key == "index") {
      cfg.index = typed<std::string>(v, key);
    } else if (key == "tasks") {
      cfg.tasks = typed<std::string>(v, key);
    } else if (key == "prompts") {
      cfg.prompts = typed<std::string>(v, key);
    } else if (key == "parallelism") {
      cfg.parallelism = positive(v, key);
    } else if (key == "global_scope") {
      cfg.global_scope = typed<std::string>(v, key);
    } else if (key == "embedder" && v.is_object()) {
      apply_service(cfg.embedder, v, key, nullptr, &cfg.embed_dim, &cfg.embed_batch);
    } else if (key == "llm" && v.is_object()) {
      apply_service(cfg.llm, v, key);
    } else if (key == "scorer" && v.is_object()) {
      apply_service(cfg.scorer, v, key, &cfg.scorer_mode);
    } else if (key == "pipeline" && v.is_object()) {
      apply_pipeline(cfg, v);
    } else {
      throw ConfigError(fmt::format("config: unknown key '{}'", key));
    }
  }
  return cfg;
}

AppConfig apply_environment(AppConfig cfg, const EnvLookup& getenv) {
  if (!getenv) return cfg;
  auto get = [&](const char* name) -> std::optional<std::string> {
    const char* v = getenv(name);
    if (v == nullptr || *v == '\0') return std::nullopt;
    return std::string(v);
  };
  if (auto v = get("DEEPCODESEEK_CORPUS")) cfg.corpus = *v;
  if (auto v = get("DEEPCODESEEK_INDEX")) cfg.index = *v;
  if (auto v = get("DEEPCODESEEK_TASKS")) cfg.tasks = *v;
  if (auto v = get("DEEPCODESEEK_PROMPTS")) cfg.prompts = *v;
  if (auto v = get("DEEPCODESEEK_EMBEDDER")) cfg.embedder.endpoint = *v;
  if (auto v = get("DEEPCODESEEK_LLM")) cfg.llm.endpoint = *v;
  if (auto v = get("DEEPCODESEEK_SCORER")) cfg.scorer.endpoint = *v;
  if (auto v = get("DEEPCODESEEK_PARALLELISM")) cfg.parallelism = parse_count(*v, "DEEPCODESEEK_PARALLELISM");
  return cfg;
}

std::unique_ptr<Embedder> make_embedder(const AppConfig& cfg) {
  const auto& ep = cfg.embedder.endpoint;
  if (ep.empty()) return nullptr;
  if (ep == "mock") return std::make_unique<MockEmbedder>(cfg.embed_dim == 0 ? 512 : cfg.embed_dim);
  if (ep.starts_with("mock:")) return std::make_unique<MockEmbedder>(parse_count(ep.substr(5), "embedder mock dim"));
  return std::make_unique<HttpEmbedder>(endpoint_of(cfg.embedder), cfg.embed_dim);
}

std::unique_ptr<LlmClient> make_llm(const AppConfig& cfg) {
  const auto& ep = cfg.llm.endpoint;
  if (ep.empty()) return nullptr;
  if (is_mock(ep)) {
    auto mock = std::make_unique<MockLlmClient>();
    if (ep.size() > 5) mock->load_jsonl(ep.substr(5));
    return mock;
  }
  validate_url(ep);
  return std::make_unique<HttpLlmClient>(endpoint_of(cfg.llm));
}

ScorerProvider::ScorerProvider(const AppConfig& cfg, const DocumentTexts* documents) : documents_(documents) {
  const auto& ep = cfg.scorer.endpoint;
  if (ep.empty()) return;
  if (ep == "oracle") {
    oracle_ = true;
  } else if (ep == "mock") {
    shared_ = std::make_shared<OverlapScorer>();
  } else {
    shared_ = std::make_shared<HttpScorer>(endpoint_of(cfg.scorer),
                                           cfg.scorer_mode == "raw" ? HttpScorer::Mode::raw : HttpScorer::Mode::pair);
  }
}

std::shared_ptr<const Scorer> ScorerProvider::for_task(std::string_view ground_truth) const {
  if (!oracle_) {
    if (!shared_) throw ConfigError("scorer endpoint required for reranking");
    return shared_;
  }
  if (ground_truth.empty()) throw ConfigError("oracle scorer needs a ground truth");
  const auto it = documents_ != nullptr ? documents_->find(ground_truth) : DocumentTexts::const_iterator{};
  if (documents_ == nullptr || it == documents_->end()) {
    throw DataError(fmt::format("oracle scorer: ground truth '{}' is not indexed", ground_truth));
  }
  return std::make_shared<OracleScorer>(it->second);
}

std::string ScorerProvider::tag() const {
  if (oracle_) return "oracle";
  return shared_ ? shared_->tag() : "none";
}

std::vector<BenchConfig> parse_bench_configs(std::string_view text) {
  std::vector<BenchConfig> out;
  std::size_t from = 0;
  while (from <= text.size()) {
    const auto comma = text.find(',', from);
    const auto item = text.substr(from, comma == std::string_view::npos ? std::string_view::npos : comma - from);
    if (item == "none") {
      out.push_back({"none", std::nullopt});
    } else if (item.starts_with("rerank@")) {
      const auto depth = parse_count(item.substr(7), "bench config");
      if (depth == 0) throw ConfigError("bench config: rerank depth must be >= 1");
      out.push_back({std::string(item), depth});
    } else {
      throw ConfigError(fmt::format("bench config: expected none or rerank@N, got '{}'", item));
    }
    if (comma == std::string_view::npos) break;
    from = comma + 1;
  }
  return out;
}

}  // namespace dcs
