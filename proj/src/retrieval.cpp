#include "dcs/retrieval.hpp"

#include <cmath>
#include <exception>

#include <fmt/format.h>

#include "dcs/parallel.hpp"
#include "dcs/tokenizer.hpp"

namespace dcs {
namespace {

using Clock = std::chrono::steady_clock;

[[noreturn]] void rethrow_for_task(const std::string& task_id) {
  auto annotate = [&](const char* what) {
    const std::string msg(what);
    return msg.find(fmt::format("task '{}'", task_id)) != std::string::npos
               ? msg
               : fmt::format("task '{}': {}", task_id, msg);
  };
  try {
    throw;
  } catch (const TransportError& e) {
    throw TransportError(e.dependency(), annotate(e.what()));
  } catch (const ConfigError& e) {
    throw ConfigError(annotate(e.what()));
  } catch (const DataError& e) {
    throw DataError(annotate(e.what()));
  }
}

}  // namespace

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::string_view to_string(FirstStage stage) { return stage == FirstStage::bm25 ? "bm25" : "dense"; }

std::optional<FirstStage> parse_first_stage(std::string_view text) {
  if (text == "bm25") return FirstStage::bm25;
  if (text == "dense") return FirstStage::dense;
  return std::nullopt;
}

std::string_view to_string(CandidateStage stage) {
  switch (stage) {
    case CandidateStage::bm25:
      return "bm25";
    case CandidateStage::dense:
      return "dense";
    case CandidateStage::rerank:
      return "rerank";
  }
  return "dense";
}

void RankedList::locate(std::string_view ground_truth) {
  ground_truth_rank.reset();
  if (ground_truth.empty()) return;
  for (const auto& c : candidates) {
    if (c.ns == ground_truth) {
      ground_truth_rank = c.rank;
      return;
    }
  }
}

Json to_json(const RankedList& list, bool include_latencies) {
  Json candidates = Json::array();
  for (const auto& c : list.candidates) {
    Json cj{{"namespace", c.ns}, {"rank", c.rank}, {"stage", std::string(to_string(c.stage))}};
    cj["score"] = std::isfinite(c.score) ? Json(c.score) : Json(nullptr);
    if (c.original_rank) cj["original_rank"] = *c.original_rank;
    candidates.push_back(std::move(cj));
  }
  Json j{{"task_id", list.task_id},
         {"strategy", std::string(to_string(list.strategy))},
         {"candidates", std::move(candidates)},
         {"reranked", list.reranked}};
  j["ground_truth_rank"] = list.ground_truth_rank ? Json(*list.ground_truth_rank) : Json(nullptr);
  if (list.downgraded) j["downgraded"] = true;
  if (include_latencies) j["stage_latencies_ms"] = list.stage_latencies;
  return j;
}

void PipelineConfig::validate() const {
  if (k_retrieve < 1) throw ConfigError("k_retrieve must be >= 1");
  trim.validate();
}

std::optional<ScopeContext> task_scope_context(const CompletionTask& task) {
  ScopeContext ctx;
  if (auto it = task.extra.find("package"); it != task.extra.end() && it->is_string()) {
    ctx.package_hint = it->get<std::string>();
  }
  if (auto it = task.extra.find("scope"); it != task.extra.end() && it->is_string()) {
    ctx.scope_hint = it->get<std::string>();
  }
  if (!ctx.has_hints()) return std::nullopt;
  return ctx;
}

Pipeline::Pipeline(PipelineServices services) : services_(std::move(services)) {
  if (services_.index == nullptr) throw ConfigError("pipeline: no index loaded");
  for (const auto& d : services_.index->documents) {
    documents_.emplace(d.ns, d.text);
    universe_.insert(d.ns);
    ordinals_.push_back(d.ns);
  }
}

DocMask Pipeline::mask_for(const NamespaceSet& allowed) const {
  DocMask mask(ordinals_.size(), false);
  for (std::size_t i = 0; i < ordinals_.size(); ++i) mask[i] = allowed.contains(ordinals_[i]);
  return mask;
}

RankedList Pipeline::retrieve(const CompletionTask& task, const PipelineConfig& cfg) const {
  cfg.validate();
  const auto start = Clock::now();
  RankedList out;
  out.task_id = task.id;
  try {
    auto t = Clock::now();
    QueryOptions qopts{cfg.trim, cfg.fim, cfg.max_tokens, cfg.temperature};
    const auto query = make_query(task, cfg.strategy, services_.llm, qopts, services_.prompts);
    out.stage_latencies["query_build"] = elapsed_ms(t);
    out.strategy = query.strategy;
    out.downgraded = query.downgraded;
    out.query_text = query.text;

    t = Clock::now();
    DocMask mask;
    if (cfg.use_kg_filter && services_.graph != nullptr) {
      const auto ctx = cfg.scope_context ? cfg.scope_context : task_scope_context(task);
      if (ctx) mask = mask_for(filter_candidates(*services_.graph, *ctx, universe_));
    }
    out.stage_latencies["filter"] = elapsed_ms(t);

    t = Clock::now();
    std::vector<ScoredNamespace> scored;
    CandidateStage stage = CandidateStage::dense;
    if (cfg.first_stage == FirstStage::bm25) {
      if (!services_.index->bm25) throw ConfigError("bm25 index not built");
      stage = CandidateStage::bm25;
      const auto tokens = tokenize(query.text);
      scored = score_bm25(*services_.index->bm25, tokens, mask);
    } else {
      if (!services_.index->dense) throw ConfigError("dense index not built");
      if (services_.embedder == nullptr) throw ConfigError("embedder endpoint required");
      auto vectors = services_.embedder->embed({query.text}, services_.prompts.embed_instruction);
      if (vectors.size() != 1) throw DataError("embedder returned no query vector");
      scored = score_dense(*services_.index->dense, vectors.front(), mask);
    }
    out.stage_latencies["first_stage"] = elapsed_ms(t);

    const auto k = std::min(cfg.k_retrieve, scored.size());
    out.candidates.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
      out.candidates.push_back({std::move(scored[i].ns), scored[i].score, stage, i + 1, std::nullopt});
    }
    out.locate(task.ground_truth);
  } catch (const Error&) {
    rethrow_for_task(task.id);
  }
  out.stage_latencies["total"] = elapsed_ms(start);
  return out;
}

BatchResult retrieve_batch(const Pipeline& pipeline, const std::vector<CompletionTask>& tasks,
                           const PipelineConfig& cfg, std::size_t parallelism) {
  std::vector<std::optional<RankedList>> slots(tasks.size());
  std::vector<std::optional<BatchFailure>> failed(tasks.size());
  parallel_for(tasks.size(), parallelism, [&](std::size_t i) {
    try {
      slots[i] = pipeline.retrieve(tasks[i], cfg);
    } catch (const Error& e) {
      failed[i] = BatchFailure{tasks[i].id, e.kind(), e.what()};
    } catch (const std::exception& e) {
      failed[i] = BatchFailure{tasks[i].id, ErrorKind::data, e.what()};
    }
  });
  BatchResult out;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (slots[i]) out.results.push_back(std::move(*slots[i]));
    if (failed[i]) out.failures.push_back(std::move(*failed[i]));
  }
  return out;
}

}  // namespace dcs
