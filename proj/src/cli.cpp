#include "dcs/cli.hpp"

#include <atomic>
#include <charconv>
#include <csignal>
#include <iostream>
#include <numeric>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "httplib.h"

#include "dcs/datagen.hpp"
#include "dcs/error.hpp"
#include "dcs/eval.hpp"
#include "dcs/parallel.hpp"
#include "dcs/serve.hpp"
#include "dcs/tokenizer.hpp"
#include "dcs/toml.hpp"

namespace dcs {
namespace {

namespace fs = std::filesystem;

constexpr const char* kDefaultConfigFile = "deepcodeseek.toml";
constexpr const char* kGraphFile = "graph.json";

// ---------------------------------------------------------------------------
// Flag plumbing. Options only override the configuration when given.

struct GlobalFlags {
  std::string config;
  std::string log_level = "warn";
  std::string corpus, index, tasks, prompts;
  std::string embedder, llm, scorer, scorer_mode;
  std::size_t parallelism = 1;
  std::string global_scope;
  std::map<std::string, CLI::Option*> opts;

  bool given(const std::string& name) const {
    const auto it = opts.find(name);
    return it != opts.end() && it->second->count() > 0;
  }
};

struct PipelineFlags {
  std::string strategy, first_stage, scope, package;
  std::size_t k = 40, trim_lines = 10, protect_tail = 2, rerank_depth = 40;
  bool fim = false, kg_filter = false, no_global = false;
  std::map<std::string, CLI::Option*> opts;

  bool given(const std::string& name) const {
    const auto it = opts.find(name);
    return it != opts.end() && it->second->count() > 0;
  }
};

void add_global_flags(CLI::App& app, GlobalFlags& g) {
  g.opts["config"] = app.add_option("--config", g.config, "Config file (default ./deepcodeseek.toml when present)");
  g.opts["log-level"] = app.add_option("--log-level", g.log_level, "trace|debug|info|warn|error|off");
  g.opts["corpus"] = app.add_option("--corpus", g.corpus, "Corpus JSONL");
  g.opts["index"] = app.add_option("--index", g.index, "Index directory");
  g.opts["tasks"] = app.add_option("--tasks", g.tasks, "Task JSONL");
  g.opts["prompts"] = app.add_option("--prompts", g.prompts, "prompts.toml overriding the built-in prompts");
  g.opts["embedder"] = app.add_option("--embedder", g.embedder, "Embedder: URL, mock or mock:<dim>");
  g.opts["llm"] = app.add_option("--llm", g.llm, "LLM: URL, mock or mock:<responses.jsonl>");
  g.opts["scorer"] = app.add_option("--scorer", g.scorer, "Rerank scorer: URL, oracle or mock");
  g.opts["scorer-mode"] = app.add_option("--scorer-mode", g.scorer_mode, "pair | raw");
  g.opts["parallelism"] = app.add_option("--parallelism", g.parallelism, "Concurrent tasks / requests");
  g.opts["global-scope"] = app.add_option("--global-scope", g.global_scope, "Name of the global scope");
}

void add_pipeline_flags(CLI::App* app, PipelineFlags& p, bool strategy = true) {
  if (strategy) p.opts["strategy"] = app->add_option("--strategy", p.strategy, "prefix | description | hypothetical");
  p.opts["first-stage"] = app->add_option("--first-stage", p.first_stage, "dense | bm25");
  p.opts["k"] = app->add_option("--k", p.k, "Candidates kept after the first stage");
  p.opts["fim"] = app->add_flag("--fim", p.fim, "Use code_after when the task has one");
  p.opts["kg-filter"] = app->add_flag("--kg-filter", p.kg_filter, "Prune candidates with the knowledge graph");
  p.opts["scope"] = app->add_option("--scope", p.scope, "Scope hint for the knowledge-graph filter");
  p.opts["package"] = app->add_option("--package", p.package, "Package hint for the knowledge-graph filter");
  p.opts["no-global"] = app->add_flag("--no-global", p.no_global, "Drop global namespaces when filtering");
  p.opts["trim-lines"] = app->add_option("--trim-lines", p.trim_lines, "Prefix lines kept in the query");
  p.opts["protect-tail"] = app->add_option("--protect-tail", p.protect_tail, "Final prefix lines always kept");
  p.opts["rerank-depth"] = app->add_option("--rerank-depth", p.rerank_depth, "Candidates rescored by the reranker");
}

void apply_global_flags(const GlobalFlags& g, AppConfig& cfg) {
  if (g.given("corpus")) cfg.corpus = g.corpus;
  if (g.given("index")) cfg.index = g.index;
  if (g.given("tasks")) cfg.tasks = g.tasks;
  if (g.given("prompts")) cfg.prompts = g.prompts;
  if (g.given("embedder")) cfg.embedder.endpoint = g.embedder;
  if (g.given("llm")) cfg.llm.endpoint = g.llm;
  if (g.given("scorer")) cfg.scorer.endpoint = g.scorer;
  if (g.given("scorer-mode")) cfg.scorer_mode = g.scorer_mode;
  if (g.given("parallelism")) cfg.parallelism = g.parallelism;
  if (g.given("global-scope")) cfg.global_scope = g.global_scope;
}

void apply_pipeline_flags(const PipelineFlags& p, AppConfig& cfg) {
  auto& pc = cfg.pipeline;
  if (p.given("strategy")) {
    auto s = parse_strategy(p.strategy);
    if (!s) throw ConfigError(fmt::format("unknown strategy '{}'", p.strategy));
    pc.strategy = *s;
  }
  if (p.given("first-stage")) {
    auto s = parse_first_stage(p.first_stage);
    if (!s) throw ConfigError(fmt::format("unknown first stage '{}'", p.first_stage));
    pc.first_stage = *s;
  }
  if (p.given("k")) pc.k_retrieve = p.k;
  if (p.given("fim")) pc.fim = p.fim;
  if (p.given("kg-filter")) pc.use_kg_filter = p.kg_filter;
  if (p.given("trim-lines")) pc.trim.max_lines = p.trim_lines;
  if (p.given("protect-tail")) pc.trim.protect_tail_lines = p.protect_tail;
  if (p.given("rerank-depth")) cfg.rerank_depth = p.rerank_depth;
  if (p.given("scope") || p.given("package") || p.given("no-global")) {
    ScopeContext ctx = pc.scope_context.value_or(ScopeContext{});
    if (p.given("scope")) ctx.scope_hint = p.scope;
    if (p.given("package")) ctx.package_hint = p.package;
    if (p.given("no-global")) ctx.include_global = !p.no_global;
    pc.scope_context = ctx;
    pc.use_kg_filter = true;
  }
}

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::size_t from = 0;
  while (from <= text.size()) {
    const auto comma = text.find(',', from);
    auto item = trim_whitespace(text.substr(from, comma == std::string_view::npos ? std::string_view::npos
                                                                                   : comma - from));
    if (!item.empty()) out.push_back(std::move(item));
    if (comma == std::string_view::npos) break;
    from = comma + 1;
  }
  return out;
}

std::size_t parse_size(std::string_view text, std::string_view what) {
  std::size_t n = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), n);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError(fmt::format("{}: expected a non-negative integer, got '{}'", what, text));
  }
  return n;
}

std::vector<std::size_t> parse_ks(std::string_view text) {
  std::vector<std::size_t> ks;
  for (const auto& item : split_list(text)) {
    const auto k = parse_size(item, "--ks");
    if (k == 0) throw ConfigError("--ks: K must be >= 1");
    ks.push_back(k);
  }
  if (ks.empty()) throw ConfigError("--ks: empty list");
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  return ks;
}

// ---------------------------------------------------------------------------
// Loading.

fs::path require_path(const fs::path& p, std::string_view what) {
  if (p.empty()) throw ConfigError(fmt::format("{} path required", what));
  if (!fs::exists(p)) throw ConfigError(fmt::format("{} not found: {}", what, p.string()));
  return p;
}

PromptTemplates prompts_for(const AppConfig& cfg) {
  if (cfg.prompts.empty()) return PromptTemplates::defaults();
  return load_prompts(require_path(cfg.prompts, "prompts file"));
}

Corpus corpus_for(const AppConfig& cfg) {
  return load_corpus(require_path(cfg.corpus, "corpus"), CorpusOptions{cfg.global_scope});
}

std::vector<CompletionTask> tasks_for(const AppConfig& cfg, const Corpus* corpus = nullptr) {
  return load_tasks(require_path(cfg.tasks, "tasks file"), corpus);
}

IndexBundle index_for(const AppConfig& cfg) { return load_index(require_path(cfg.index, "index directory")); }

std::optional<KnowledgeGraph> graph_for(const AppConfig& cfg) {
  const auto path = cfg.index / kGraphFile;
  if (!cfg.index.empty() && fs::exists(path)) return load_graph_snapshot(path, cfg.global_scope);
  if (!cfg.corpus.empty() && fs::exists(cfg.corpus)) return build_graph(corpus_for(cfg), cfg.global_scope);
  return std::nullopt;
}

void check_embedder(const IndexBundle& index, const Embedder* embedder) {
  if (index.dense && embedder != nullptr && embedder->tag() != index.dense->embedder_tag) {
    throw ConfigError(fmt::format("index was embedded with '{}' but the configured embedder is '{}'",
                                  index.dense->embedder_tag, embedder->tag()));
  }
}

/// Everything a retrieval command needs, owned in one place.
struct Runtime {
  IndexBundle index;
  std::optional<KnowledgeGraph> graph;
  std::unique_ptr<Embedder> embedder;
  std::unique_ptr<LlmClient> llm;
  std::unique_ptr<Pipeline> pipeline;
  ScorerProvider scorers;

  explicit Runtime(const AppConfig& cfg)
      : index(index_for(cfg)), embedder(make_embedder(cfg)), llm(make_llm(cfg)) {
    check_embedder(index, embedder.get());
    if (cfg.pipeline.use_kg_filter) {
      graph = graph_for(cfg);
      if (!graph) throw ConfigError("knowledge-graph filter needs graph.json in the index or a corpus");
    }
    PipelineServices services;
    services.index = &index;
    services.graph = graph ? &*graph : nullptr;
    services.embedder = embedder.get();
    services.llm = llm.get();
    services.prompts = prompts_for(cfg);
    pipeline = std::make_unique<Pipeline>(std::move(services));
    scorers = ScorerProvider(cfg, &pipeline->documents());
  }
};

void require_llm_for(const AppConfig& cfg, QueryStrategy strategy, const LlmClient* llm) {
  if (strategy != QueryStrategy::prefix && llm == nullptr) {
    throw ConfigError(fmt::format("llm endpoint required for the {} strategy", to_string(strategy)));
  }
  (void)cfg;
}

RankedList rerank_with(const RankedList& list, const Pipeline& pipeline, const ScorerProvider& scorers,
                       std::string_view ground_truth, std::size_t depth) {
  const auto scorer = scorers.for_task(ground_truth);
  return rerank(list, pipeline.documents(), *scorer, RerankOptions{depth, 1}, ground_truth);
}

CompletionTask adhoc_task(const Json& j, std::size_t ordinal) {
  if (!j.is_object()) throw DataError(fmt::format("task {}: expected a JSON object", ordinal));
  if (j.contains("ground_truth") && j.contains("code_middle") && j.contains("id")) return task_from_json(j);
  CompletionTask t;
  t.id = j.contains("id") && j["id"].is_string() ? j["id"].get<std::string>() : fmt::format("task-{}", ordinal);
  if (!j.contains("code_before") || !j["code_before"].is_string()) {
    throw DataError(fmt::format("task '{}': missing required field 'code_before'", t.id));
  }
  t.code_before = j["code_before"].get<std::string>();
  if (j.contains("code_middle") && j["code_middle"].is_string()) t.code_middle = j["code_middle"].get<std::string>();
  if (j.contains("code_after") && j["code_after"].is_string()) t.code_after = j["code_after"].get<std::string>();
  if (j.contains("ground_truth") && j["ground_truth"].is_string()) t.ground_truth = j["ground_truth"].get<std::string>();
  for (const char* key : {"package", "scope"}) {
    if (j.contains(key)) t.extra[key] = j[key];
  }
  return t;
}

std::vector<CompletionTask> read_adhoc_tasks(std::string_view text) {
  std::vector<CompletionTask> out;
  const auto trimmed = trim_whitespace(text);
  try {
    if (trimmed.starts_with('[')) {
      for (const auto& j : Json::parse(trimmed)) out.push_back(adhoc_task(j, out.size() + 1));
      return out;
    }
    if (trimmed.starts_with('{') && trimmed.find('\n') != std::string::npos) {
      // One pretty-printed object, or JSONL.
      try {
        out.push_back(adhoc_task(Json::parse(trimmed), 1));
        return out;
      } catch (const Json::exception&) {
      }
    }
    for (auto line : split_lines(trimmed)) {
      if (is_blank(line)) continue;
      out.push_back(adhoc_task(Json::parse(line), out.size() + 1));
    }
  } catch (const Json::exception& e) {
    throw DataError(fmt::format("task input: {}", e.what()));
  }
  if (out.empty()) throw DataError("task input: no tasks");
  return out;
}

// ---------------------------------------------------------------------------
// Commands.

std::string kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config:
      return "config";
    case ErrorKind::transport:
      return "transport";
    case ErrorKind::data:
      return "data";
  }
  return "data";
}

struct Io {
  std::ostream& out;
  std::ostream& err;
};

int cmd_build_index(const AppConfig& cfg, Io io, const fs::path& out_dir, const std::string& source_name,
                    bool no_dense, double k1, double b) {
  const auto source = parse_document_source(source_name);
  if (!source) throw ConfigError(fmt::format("unknown --source '{}' (jsdoc | raw)", source_name));
  if (out_dir.empty()) throw ConfigError("--out required");
  const auto corpus = corpus_for(cfg);
  IndexBundle bundle;
  bundle.source = *source;
  bundle.documents = build_documents(corpus, *source);
  bundle.bm25 = build_bm25(bundle.documents, Bm25Params{k1, b});
  const auto embedder = no_dense ? nullptr : make_embedder(cfg);
  if (embedder) {
    DenseBuildOptions opts;
    opts.batch_size = cfg.embed_batch;
    opts.parallelism = cfg.parallelism;
    bundle.dense = build_dense(bundle.documents, *embedder, opts);
  } else if (!no_dense) {
    spdlog::warn("no embedder configured; building the BM25 index only");
  }
  save_index(bundle, out_dir);
  const auto graph = build_graph(corpus, cfg.global_scope);
  write_file(out_dir / kGraphFile, graph_to_json(graph).dump() + "\n");

  std::vector<std::size_t> lengths;
  for (const auto& d : bundle.documents) lengths.push_back(d.token_count);
  const auto total = std::accumulate(lengths.begin(), lengths.end(), std::size_t{0});
  Json summary{{"index", out_dir.string()},
               {"source", std::string(to_string(*source))},
               {"documents", bundle.documents.size()},
               {"document_tokens",
                {{"min", *std::min_element(lengths.begin(), lengths.end())},
                 {"mean", static_cast<double>(total) / static_cast<double>(lengths.size())},
                 {"max", *std::max_element(lengths.begin(), lengths.end())}}},
               {"bm25_terms", bundle.bm25->postings.size()},
               {"graph", to_json(graph_stats(graph))}};
  summary["dense"] = bundle.dense ? Json{{"dim", bundle.dense->dim}, {"embedder", bundle.dense->embedder_tag}}
                                  : Json(nullptr);
  io.out << summary.dump() << "\n";
  return 0;
}

int cmd_retrieve(const AppConfig& cfg, Io io, const std::string& task_path, bool do_rerank, bool no_latency) {
  Runtime rt(cfg);
  require_llm_for(cfg, cfg.pipeline.strategy, rt.llm.get());
  std::string input;
  if (task_path.empty() || task_path == "-") {
    std::ostringstream buf;
    buf << std::cin.rdbuf();
    input = buf.str();
  } else {
    input = read_file(task_path);
  }
  const auto tasks = read_adhoc_tasks(input);
  for (const auto& task : tasks) {
    auto list = rt.pipeline->retrieve(task, cfg.pipeline);
    if (do_rerank) list = rerank_with(list, *rt.pipeline, rt.scorers, task.ground_truth, cfg.rerank_depth);
    auto j = to_json(list, !no_latency);
    if (task.ground_truth.empty()) j.erase("ground_truth_rank");
    io.out << j.dump() << "\n";
  }
  return 0;
}

struct EvaluateFlags {
  std::string strategies = "prefix";
  std::string ks = "5,10,20,40";
  std::string filter_intent = "all";
  std::string out_dir;
  bool judge = false;
  bool rerank = false;
  bool with_latency = false;
  bool knowledge = false;
};

int cmd_evaluate(const AppConfig& cfg, Io io, const EvaluateFlags& f) {
  const auto ks = parse_ks(f.ks);
  std::vector<QueryStrategy> strategies;
  for (const auto& s : split_list(f.strategies)) {
    auto parsed = parse_strategy(s);
    if (!parsed) throw ConfigError(fmt::format("unknown strategy '{}'", s));
    strategies.push_back(*parsed);
  }
  if (strategies.empty()) throw ConfigError("--strategies: empty list");
  std::optional<Intent> keep;
  if (f.filter_intent != "all") {
    keep = parse_intent(f.filter_intent);
    if (!keep) throw ConfigError(fmt::format("--filter-intent: expected clear|ambiguous|unjudged|all, got '{}'",
                                             f.filter_intent));
  }
  if (f.out_dir.empty()) throw ConfigError("--out required");

  Runtime rt(cfg);
  std::optional<Corpus> corpus;
  if (!cfg.corpus.empty()) corpus = corpus_for(cfg);
  auto tasks = tasks_for(cfg, corpus ? &*corpus : nullptr);
  if (f.rerank && !rt.scorers.configured()) throw ConfigError("--rerank needs a scorer (--scorer)");
  if (cfg.pipeline.k_retrieve < ks.back()) {
    spdlog::warn("--k {} is below the largest K {}; accuracy at larger K equals accuracy at {}",
                 cfg.pipeline.k_retrieve, ks.back(), cfg.pipeline.k_retrieve);
  }

  Json report_extra = Json::object();
  if (f.judge) {
    if (!corpus) throw ConfigError("--judge needs --corpus");
    if (!rt.llm) throw ConfigError("llm endpoint required for --judge");
    std::vector<Intent> intents(tasks.size(), Intent::unjudged);
    parallel_for(tasks.size(), cfg.parallelism, [&](std::size_t i) {
      try {
        intents[i] = intent_from(judge_intent(tasks[i], *corpus, *rt.llm));
      } catch (const TransportError& e) {
        spdlog::warn("judge: {}", e.what());
      }
    });
    std::map<std::string, std::size_t> counts{{"clear", 0}, {"ambiguous", 0}, {"unjudged", 0}};
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      tasks[i].intent = intents[i];
      ++counts[std::string(to_string(intents[i]))];
    }
    report_extra["judge"] = counts;
  }
  if (keep) {
    std::erase_if(tasks, [&](const CompletionTask& t) { return t.intent != *keep; });
    if (tasks.empty()) throw DataError(fmt::format("no tasks with intent '{}'", f.filter_intent));
  }

  ReportSet set;
  set.ks = ks;
  Json failures = Json::array();
  std::optional<ErrorKind> first_failure;
  std::size_t completed = 0;
  for (const auto strategy : strategies) {
    PipelineConfig pc = cfg.pipeline;
    pc.strategy = strategy;
    auto label = fmt::format("{}/{}{}", to_string(pc.first_stage), to_string(strategy), pc.fim ? "+fim" : "");
    if (strategy != QueryStrategy::prefix && !rt.llm) {
      io.err << fmt::format("{}: skipped: llm endpoint required\n", label);
      failures.push_back(Json{{"label", label}, {"task_id", nullptr}, {"kind", "config"},
                              {"message", "llm endpoint required"}});
      if (!first_failure) first_failure = ErrorKind::config;
      continue;
    }
    auto batch = retrieve_batch(*rt.pipeline, tasks, pc, cfg.parallelism);
    for (const auto& fl : batch.failures) {
      io.err << fmt::format("{}: {}\n", label, fl.message);
      failures.push_back(Json{{"label", label}, {"task_id", fl.task_id}, {"kind", kind_name(fl.kind)},
                              {"message", fl.message}});
    }
    if (batch.results.empty()) {
      if (!first_failure && !batch.failures.empty()) first_failure = batch.failures.front().kind;
      continue;
    }
    std::vector<RetrievalOutcome> outcomes;
    for (const auto& r : batch.results) outcomes.push_back(outcome_of(r));
    set.reports.push_back(evaluate_outcomes(label, outcomes, ks, f.with_latency, batch.failures.size()));
    ++completed;

    if (f.rerank) {
      std::map<std::string, std::string, std::less<>> truth;
      for (const auto& t : tasks) truth.emplace(t.id, t.ground_truth);
      std::vector<std::optional<RankedList>> reranked(batch.results.size());
      std::vector<std::optional<std::pair<ErrorKind, std::string>>> errors(batch.results.size());
      parallel_for(batch.results.size(), cfg.parallelism, [&](std::size_t i) {
        const auto& r = batch.results[i];
        try {
          reranked[i] = rerank_with(r, *rt.pipeline, rt.scorers, truth.at(r.task_id), cfg.rerank_depth);
        } catch (const Error& e) {
          errors[i] = std::make_pair(e.kind(), std::string(e.what()));
        }
      });
      const auto rlabel = fmt::format("{}+rerank@{}", label, cfg.rerank_depth);
      std::vector<RetrievalOutcome> routcomes;
      std::size_t rfailed = batch.failures.size();
      for (std::size_t i = 0; i < reranked.size(); ++i) {
        if (reranked[i]) {
          routcomes.push_back(outcome_of(*reranked[i]));
        } else {
          ++rfailed;
          failures.push_back(Json{{"label", rlabel}, {"task_id", batch.results[i].task_id},
                                  {"kind", kind_name(errors[i]->first)}, {"message", errors[i]->second}});
        }
      }
      if (!routcomes.empty()) set.reports.push_back(evaluate_outcomes(rlabel, routcomes, ks, f.with_latency, rfailed));
    }
  }

  if (f.knowledge) {
    if (!rt.llm) throw ConfigError("llm endpoint required for --knowledge-check");
    const auto kc = knowledge_check(tasks, *rt.llm, rt.pipeline->services().prompts, cfg.parallelism);
    report_extra["knowledge_check"] = Json{{"n", kc.n}, {"hits", kc.hits}, {"fraction", kc.fraction},
                                           {"failed_ids", kc.failed_ids}};
  }

  if (completed == 0) {
    io.err << "evaluate: no strategy completed\n";
    return exit_code(first_failure.value_or(ErrorKind::data));
  }

  Json report{{"ks", ks},
              {"tasks", tasks.size()},
              {"filter_intent", f.filter_intent},
              {"first_stage", std::string(to_string(cfg.pipeline.first_stage))},
              {"k_retrieve", cfg.pipeline.k_retrieve},
              {"reports", set.to_json()},
              {"failures", std::move(failures)}};
  for (auto& [k, v] : report_extra.items()) report[k] = v;

  std::string md = set.markdown();
  if (report_extra.contains("knowledge_check")) {
    const auto& kc = report_extra["knowledge_check"];
    md += fmt::format("\nKnowledge check: {} of {} completions named the ground truth ({:.2f}%).\n",
                      kc["hits"].get<std::size_t>(), kc["n"].get<std::size_t>(),
                      100.0 * kc["fraction"].get<double>());
  }
  const fs::path dir(f.out_dir);
  fs::create_directories(dir);
  write_file(dir / "report.json", report.dump(2) + "\n");
  write_file(dir / "report.md", md);
  write_file(dir / "report.csv", set.csv());
  if (f.judge) write_file(dir / "tasks_judged.jsonl", serialize_tasks(tasks));
  io.out << report.dump() << "\n";
  return 0;
}

int cmd_clean(Io io, const std::string& in, const std::string& out, const std::string& report_path,
              std::size_t radius, double threshold) {
  const auto triplets = parse_triplets(read_file(require_path(in, "triplet file")), in);
  const auto report = clean_dataset(triplets, CleanConfig{radius, threshold});
  const auto j = report.to_json();
  if (!out.empty()) write_file(out, serialize_triplets(report.kept));
  if (!report_path.empty()) write_file(report_path, j.dump(2) + "\n");
  io.out << j.dump() << "\n";
  return 0;
}

int cmd_mine(const AppConfig& cfg, Io io, const std::string& in, const std::string& out,
             const std::string& discards_path, const std::string& range, double margin, std::size_t negatives) {
  MiningConfig mc;
  const auto colon = range.find(':');
  if (colon == std::string::npos) throw ConfigError("--range: expected MIN:MAX");
  mc.range_min = parse_size(std::string_view(range).substr(0, colon), "--range");
  mc.range_max = parse_size(std::string_view(range).substr(colon + 1), "--range");
  mc.margin = margin;
  mc.num_negatives = negatives;
  mc.trim = cfg.pipeline.trim;
  mc.validate();

  const auto index = index_for(cfg);
  if (!index.dense) throw ConfigError("mining needs a dense index");
  const auto embedder = make_embedder(cfg);
  if (!embedder) throw ConfigError("embedder endpoint required for mining");
  check_embedder(index, embedder.get());
  const auto triplets = parse_triplets(read_file(require_path(in, "triplet file")), in);
  const auto result =
      mine_hard_negatives(triplets, *index.dense, *embedder, prompts_for(cfg).embed_instruction, mc);

  std::string sets;
  for (const auto& s : result.sets) sets += to_json(s, mc).dump() + "\n";
  if (!out.empty()) write_file(out, sets);
  std::map<std::string, std::size_t> reasons;
  std::string discards;
  for (const auto& d : result.discarded) {
    ++reasons[d.reason];
    discards += Json{{"id", d.id}, {"reason", d.reason}}.dump() + "\n";
  }
  if (!discards_path.empty()) write_file(discards_path, discards);
  io.out << Json{{"kept", result.sets.size()},
                 {"discarded", result.discarded.size()},
                 {"reasons", reasons},
                 {"config", mc.to_json()}}
                .dump()
         << "\n";
  return 0;
}

int cmd_generate(const AppConfig& cfg, Io io, const std::string& namespaces, const std::string& exclude_tasks,
                 const std::string& exclude_ns, std::size_t n, double temperature, const std::string& out) {
  const auto corpus = corpus_for(cfg);
  std::set<std::string> excluded;
  if (!exclude_tasks.empty()) {
    for (const auto& t : load_tasks(require_path(exclude_tasks, "exclusion task file"))) excluded.insert(t.ground_truth);
  }
  for (const auto& ns : split_list(exclude_ns)) excluded.insert(ns);
  std::vector<ScriptIncludeRecord> records;
  if (namespaces.empty() || namespaces == "all") {
    records = corpus.records();
  } else {
    for (const auto& ns : split_list(namespaces)) {
      const auto* r = corpus.find(ns);
      if (r == nullptr) throw DataError(fmt::format("namespace '{}' is not in the corpus", ns));
      records.push_back(*r);
    }
  }
  const auto llm = make_llm(cfg);
  if (!llm) throw ConfigError("llm endpoint required");
  const auto result = generate_triplets(records, *llm, n, excluded, prompts_for(cfg), temperature);
  if (!out.empty()) write_file(out, serialize_triplets(result.triplets));
  Json discarded = Json::array();
  for (const auto& d : result.discarded) discarded.push_back(Json{{"id", d.id}, {"reason", d.reason}});
  io.out << Json{{"generated", result.triplets.size()}, {"discarded", std::move(discarded)}}.dump() << "\n";
  return 0;
}

int cmd_judge(const AppConfig& cfg, Io io, const std::string& out) {
  const auto corpus = corpus_for(cfg);
  auto tasks = tasks_for(cfg, &corpus);
  const auto llm = make_llm(cfg);
  if (!llm) throw ConfigError("llm endpoint required");
  std::vector<IntentJudgeResult> results(tasks.size());
  parallel_for(tasks.size(), cfg.parallelism, [&](std::size_t i) {
    try {
      results[i] = judge_intent(tasks[i], corpus, *llm);
    } catch (const TransportError& e) {
      spdlog::warn("judge: {}", e.what());
      results[i].task_id = tasks[i].id;
    }
  });
  std::map<std::string, std::size_t> counts{{"clear", 0}, {"ambiguous", 0}, {"unjudged", 0}};
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    tasks[i].intent = intent_from(results[i]);
    ++counts[std::string(to_string(tasks[i].intent))];
  }
  if (!out.empty()) write_file(out, serialize_tasks(tasks));
  io.out << Json{{"tasks", tasks.size()}, {"intents", counts}}.dump() << "\n";
  return 0;
}

int cmd_stats(const AppConfig& cfg, Io io, const std::string& graph_path) {
  Json j = Json::object();
  if (!cfg.corpus.empty()) {
    const auto corpus = corpus_for(cfg);
    j["corpus"] = to_json(corpus_stats(corpus));
    if (graph_path.empty()) j["graph"] = to_json(graph_stats(build_graph(corpus, cfg.global_scope)));
  }
  if (!graph_path.empty()) {
    j["graph"] = to_json(graph_stats(load_graph_snapshot(require_path(graph_path, "graph snapshot"),
                                                         cfg.global_scope)));
  }
  if (j.empty()) throw ConfigError("stats needs --corpus or --graph");
  io.out << j.dump() << "\n";
  return 0;
}

std::atomic<bool> g_stop_requested{false};

extern "C" void on_stop_signal(int) { g_stop_requested.store(true); }

int cmd_serve(const AppConfig& cfg, Io io, const std::string& host, int port, int timeout_ms) {
  Runtime rt(cfg);
  RetrievalService service(*rt.pipeline, cfg.pipeline, rt.scorers, cfg.rerank_depth);
  httplib::Server server;
  const auto threads = cfg.parallelism;
  server.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
  const auto secs = timeout_ms / 1000;
  const auto usecs = (timeout_ms % 1000) * 1000;
  server.set_read_timeout(secs, usecs);
  server.set_write_timeout(secs, usecs);
  mount(server, service);

  const int bound = port == 0 ? server.bind_to_any_port(host) : (server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw ConfigError(fmt::format("cannot bind {}:{}", host, port));
  g_stop_requested.store(false);
  auto prev_int = std::signal(SIGINT, on_stop_signal);
  auto prev_term = std::signal(SIGTERM, on_stop_signal);
  std::jthread watcher([&server](std::stop_token st) {
    while (!st.stop_requested() && !g_stop_requested.load()) {
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
    server.stop();
  });
  io.err << fmt::format("listening on http://{}:{}\n", host, bound) << std::flush;
  server.listen_after_bind();
  watcher.request_stop();
  watcher.join();
  std::signal(SIGINT, prev_int);
  std::signal(SIGTERM, prev_term);
  io.err << "shut down\n";
  return 0;
}

int cmd_bench(const AppConfig& cfg, Io io, const std::string& configs, std::size_t iters, std::size_t warmup,
              const std::string& json_path) {
  const auto benches = parse_bench_configs(configs);
  if (iters == 0) throw ConfigError("--iters must be >= 1");
  Runtime rt(cfg);
  require_llm_for(cfg, cfg.pipeline.strategy, rt.llm.get());
  const auto tasks = tasks_for(cfg);
  if (tasks.empty()) throw DataError("bench: no tasks");

  Json rows = Json::array();
  std::vector<std::pair<std::string, LatencySummary>> summaries;
  for (const auto& b : benches) {
    if (b.rerank_depth && !rt.scorers.configured()) throw ConfigError("rerank configs need a scorer (--scorer)");
    std::vector<RetrievalOutcome> outcomes;
    for (std::size_t i = 0; i < warmup + iters; ++i) {
      const auto& task = tasks[i % tasks.size()];
      auto list = rt.pipeline->retrieve(task, cfg.pipeline);
      if (b.rerank_depth) list = rerank_with(list, *rt.pipeline, rt.scorers, task.ground_truth, *b.rerank_depth);
      if (i >= warmup) outcomes.push_back(outcome_of(list));
    }
    auto summary = latency_stats(outcomes);
    Json row{{"config", b.label}, {"iterations", iters}, {"latency_ms", to_json(summary)}};
    row["rerank_depth"] = b.rerank_depth ? Json(*b.rerank_depth) : Json(nullptr);
    rows.push_back(std::move(row));
    summaries.emplace_back(b.label, std::move(summary));
  }

  io.out << fmt::format("latency (ms), client-observed wall time in-process, {} iterations per config, "
                        "{} warmup\n\n",
                        iters, warmup);
  io.out << fmt::format("{:<14} {:>10} {:>10} {:>10} {:>12}\n", "config", "p50", "p95", "max", "rerank p50");
  for (const auto& [label, s] : summaries) {
    const auto it = s.stages.find("rerank");
    io.out << fmt::format("{:<14} {:>10.3f} {:>10.3f} {:>10.3f} {:>12}\n", label, s.end_to_end.p50,
                          s.end_to_end.p95, s.end_to_end.max,
                          it == s.stages.end() ? std::string("-") : fmt::format("{:.3f}", it->second.p50));
  }
  io.out << fmt::format("\n{:<14} {:<12} {:>10} {:>10} {:>10}\n", "config", "stage", "p50", "p95", "max");
  for (const auto& [label, s] : summaries) {
    for (const auto& [stage, p] : s.stages) {
      io.out << fmt::format("{:<14} {:<12} {:>10.3f} {:>10.3f} {:>10.3f}\n", label, stage, p.p50, p.p95, p.max);
    }
  }
  if (!json_path.empty()) {
    write_file(json_path, Json{{"unit", "ms"},
                               {"measurement", "client-observed wall time, in-process"},
                               {"warmup", warmup},
                               {"configs", rows}}
                                  .dump(2) +
                              "\n");
  }
  return 0;
}

// Routes spdlog to `err` for the duration of one run.
class LogScope {
 public:
  LogScope(std::ostream& err, const std::string& level) : previous_(spdlog::default_logger()) {
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err, true);
    auto logger = std::make_shared<spdlog::logger>("deepcodeseek", sink);
    logger->set_pattern("%l: %v");
    logger->set_level(spdlog::level::from_str(level));
    spdlog::set_default_logger(logger);
  }
  ~LogScope() { spdlog::set_default_logger(previous_); }

 private:
  std::shared_ptr<spdlog::logger> previous_;
};

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const EnvLookup& getenv) {
  CLI::App app{"Predict the API namespace a partial code snippet needs.", "deepcodeseek"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalFlags g;
  add_global_flags(app, g);

  auto* build = app.add_subcommand("build-index", "Build BM25 and dense indexes from a corpus");
  std::string build_out, source = "jsdoc";
  bool no_dense = false;
  double k1 = 1.2, b = 0.75;
  build->add_option("--out", build_out, "Index directory to write")->required();
  build->add_option("--source", source, "jsdoc | raw");
  build->add_flag("--no-dense", no_dense, "Skip the dense index");
  build->add_option("--k1", k1, "BM25 k1");
  build->add_option("--b", b, "BM25 b");

  auto* retrieve = app.add_subcommand("retrieve", "Rank namespaces for tasks read from a file or stdin");
  PipelineFlags rp;
  add_pipeline_flags(retrieve, rp);
  std::string task_path = "-";
  bool do_rerank = false, no_latency = false;
  retrieve->add_option("--task", task_path, "Task JSON/JSONL file, - for stdin");
  retrieve->add_flag("--rerank", do_rerank, "Rerank with the configured scorer");
  retrieve->add_flag("--no-latency", no_latency, "Omit stage latencies");

  auto* evaluate = app.add_subcommand("evaluate", "Top-K accuracy and MRR over a task set");
  PipelineFlags ep;
  add_pipeline_flags(evaluate, ep, false);
  EvaluateFlags ef;
  evaluate->add_option("--strategies", ef.strategies, "Comma-separated query strategies");
  evaluate->add_option("--ks", ef.ks, "Comma-separated K values");
  evaluate->add_option("--filter-intent", ef.filter_intent, "clear | ambiguous | unjudged | all");
  evaluate->add_option("--out", ef.out_dir, "Report directory")->required();
  evaluate->add_flag("--judge", ef.judge, "Judge task intent with the LLM first");
  evaluate->add_flag("--rerank", ef.rerank, "Add a reranked row per strategy");
  evaluate->add_flag("--with-latency", ef.with_latency, "Include latency percentiles (not byte-stable)");
  evaluate->add_flag("--knowledge-check", ef.knowledge, "Ask the LLM to complete without retrieval");

  auto* clean = app.add_subcommand("clean", "Remove leaks, near-mentions and near-duplicates from triplets");
  std::string clean_in, clean_out, clean_report;
  std::size_t radius = 3;
  double threshold = 0.90;
  clean->add_option("--in", clean_in, "Triplet JSONL")->required();
  clean->add_option("--out", clean_out, "Kept triplets JSONL");
  clean->add_option("--report", clean_report, "Cleaning report JSON");
  clean->add_option("--near-radius", radius, "Lines checked around the span");
  clean->add_option("--threshold", threshold, "Token-set similarity for duplicates");

  auto* mine = app.add_subcommand("mine", "Mine hard negatives from the dense index");
  std::string mine_in, mine_out, mine_discards, range = "2:30";
  double margin = 0.05;
  std::size_t negatives = 5;
  mine->add_option("--in", mine_in, "Triplet JSONL")->required();
  mine->add_option("--out", mine_out, "Hard-negative JSONL");
  mine->add_option("--discards", mine_discards, "Discarded triplets JSONL");
  mine->add_option("--range", range, "Candidate ranks MIN:MAX");
  mine->add_option("--margin", margin, "Required score gap below the positive");
  mine->add_option("--negatives", negatives, "Negatives per triplet");

  auto* generate = app.add_subcommand("generate", "Generate synthetic triplets with the LLM");
  std::string gen_ns, gen_exclude, gen_exclude_ns, gen_out;
  std::size_t gen_n = 1;
  double gen_temp = 0.7;
  generate->add_option("--namespaces", gen_ns, "Comma-separated namespaces, or all");
  generate->add_option("--exclude-tasks", gen_exclude, "Evaluation tasks whose namespaces are off limits");
  generate->add_option("--exclude", gen_exclude_ns, "Comma-separated namespaces that are off limits");
  generate->add_option("--n", gen_n, "Triplets per namespace");
  generate->add_option("--temperature", gen_temp, "Sampling temperature");
  generate->add_option("--out", gen_out, "Triplet JSONL");

  auto* judge = app.add_subcommand("judge", "Label task intent with the LLM judge");
  std::string judge_out;
  judge->add_option("--out", judge_out, "Judged task JSONL");

  auto* serve = app.add_subcommand("serve", "Serve POST /v1/retrieve over HTTP");
  PipelineFlags sp;
  add_pipeline_flags(serve, sp);
  std::string host = "127.0.0.1";
  int port = 8080, timeout_ms = 30000;
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port, 0 for any");
  serve->add_option("--request-timeout-ms", timeout_ms, "Socket read/write timeout");

  auto* bench = app.add_subcommand("bench", "Latency percentiles per pipeline stage");
  PipelineFlags bp;
  add_pipeline_flags(bench, bp);
  std::string bench_configs = "none,rerank@40", bench_json;
  std::size_t iters = 50, warmup = 5;
  bench->add_option("--configs", bench_configs, "Comma-separated: none, rerank@N");
  bench->add_option("--iters", iters, "Measured iterations per config");
  bench->add_option("--warmup", warmup, "Unmeasured iterations per config");
  bench->add_option("--json", bench_json, "Also write results as JSON");

  auto* stats = app.add_subcommand("stats", "Corpus and knowledge-graph statistics");
  std::string graph_path;
  stats->add_option("--graph", graph_path, "Graph snapshot JSON");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return 0;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return exit_code(ErrorKind::config);
  }

  LogScope logs(err, g.log_level);
  try {
    AppConfig cfg;
    fs::path config_path = g.config;
    if (config_path.empty() && getenv) {
      if (const char* v = getenv("DEEPCODESEEK_CONFIG"); v != nullptr && *v != '\0') config_path = v;
    }
    if (config_path.empty() && fs::exists(kDefaultConfigFile)) config_path = kDefaultConfigFile;
    if (!config_path.empty()) cfg = apply_config_file(cfg, load_toml(require_path(config_path, "config file")));
    cfg = apply_environment(cfg, getenv);
    apply_global_flags(g, cfg);
    for (auto* p : {&rp, &ep, &sp, &bp}) apply_pipeline_flags(*p, cfg);
    cfg.validate();

    const Io io{out, err};
    if (*build) return cmd_build_index(cfg, io, build_out, source, no_dense, k1, b);
    if (*retrieve) return cmd_retrieve(cfg, io, task_path, do_rerank, no_latency);
    if (*evaluate) return cmd_evaluate(cfg, io, ef);
    if (*clean) return cmd_clean(io, clean_in, clean_out, clean_report, radius, threshold);
    if (*mine) return cmd_mine(cfg, io, mine_in, mine_out, mine_discards, range, margin, negatives);
    if (*generate) return cmd_generate(cfg, io, gen_ns, gen_exclude, gen_exclude_ns, gen_n, gen_temp, gen_out);
    if (*judge) return cmd_judge(cfg, io, judge_out);
    if (*serve) return cmd_serve(cfg, io, host, port, timeout_ms);
    if (*bench) return cmd_bench(cfg, io, bench_configs, iters, warmup, bench_json);
    if (*stats) return cmd_stats(cfg, io, graph_path);
  } catch (const TransportError& e) {
    err << "error: " << e.what() << " [dependency: " << e.dependency() << "]\n";
    return exit_code(e.kind());
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace dcs
