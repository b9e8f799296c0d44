#include "dcs/rerank.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "dcs/parallel.hpp"
#include "dcs/tokenizer.hpp"

namespace dcs {
namespace {

using Clock = std::chrono::steady_clock;

std::string fold_token(std::string_view token) {
  return to_lower(trim_whitespace(token));
}

const std::string& text_of(const DocumentTexts& documents, const std::string& ns) {
  const auto it = documents.find(ns);
  if (it == documents.end()) throw DataError(fmt::format("rerank: no document text for '{}'", ns));
  return it->second;
}

void finish(RankedList& out, std::string_view ground_truth, Clock::time_point start) {
  for (std::size_t i = 0; i < out.candidates.size(); ++i) out.candidates[i].rank = i + 1;
  if (!ground_truth.empty()) {
    out.locate(ground_truth);
  } else {
    out.ground_truth_rank.reset();
  }
  out.reranked = true;
  const double ms = elapsed_ms(start);
  out.stage_latencies["rerank"] = ms;
  if (out.stage_latencies.contains("total")) out.stage_latencies["total"] += ms;
}

}  // namespace

RerankTemplate RerankTemplate::defaults() {
  RerankTemplate t;
  t.prefix =
      "Judge whether the Document meets the requirements based on the Query and the Instruct "
      "provided. Answer \"yes\" or \"no\".";
  t.instruction =
      "Using the API's JSDoc, decide whether this API is directly useful for the caller-code to "
      "complete its intended task.";
  t.body = "\n<Instruct>: {instruction}\n<Query>: {query}\n<Document>: {document}";
  t.suffix = "<|im_end|>\n<|im_start|>assistant\n<think>\n\n</think>\n\n";
  return t;
}

RerankPrompt build_rerank_prompt(std::string_view query, std::string_view document,
                                 const RerankTemplate& tmpl) {
  if (query.empty()) throw DataError("rerank prompt: empty query");
  if (document.empty()) throw DataError("rerank prompt: empty document");
  RerankPrompt p;
  p.prefix = tmpl.prefix;
  p.instruction = tmpl.instruction;
  p.query = query;
  p.document = document;
  p.suffix = tmpl.suffix;
  p.assembled = p.prefix +
                render_template(tmpl.body, {{"instruction", p.instruction},
                                            {"query", p.query},
                                            {"document", p.document}}) +
                p.suffix;
  return p;
}

FirstTokenScore first_token_score(const DecisionOutput& output) {
  double p_yes = 0.0;
  double p_no = 0.0;
  for (const auto& [token, logprob] : output.logprobs) {
    const auto folded = fold_token(token);
    if (folded == "yes") p_yes += std::exp(logprob);
    if (folded == "no") p_no += std::exp(logprob);
  }
  if (p_yes + p_no > 0) return {p_yes / (p_yes + p_no), false};
  if (output.text) {
    const auto trimmed = trim_whitespace(*output.text);
    const auto space = trimmed.find_first_of(" \t\r\n");
    const auto first = to_lower(std::string_view(trimmed).substr(0, space));
    if (first.starts_with("yes")) return {1.0, false};
    if (first.starts_with("no")) return {0.0, false};
  }
  return {0.0, true};
}

double OverlapScorer::score(const std::string& query, const std::string& document) const {
  const auto q = tokenize(query);
  const std::set<std::string> qset(q.begin(), q.end());
  if (qset.empty()) return 0.0;
  const auto d = tokenize(document);
  const std::set<std::string> dset(d.begin(), d.end());
  std::size_t shared = 0;
  for (const auto& t : qset) shared += dset.contains(t) ? 1 : 0;
  return static_cast<double>(shared) / static_cast<double>(qset.size());
}

RankedList rerank(const RankedList& list, const DocumentTexts& documents, const Scorer& scorer,
                  const RerankOptions& options, std::string_view ground_truth) {
  const auto start = Clock::now();
  RankedList out = list;
  const std::size_t depth = std::min(options.depth, out.candidates.size());
  std::vector<double> scores(depth, 0.0);
  parallel_for(depth, options.parallelism, [&](std::size_t i) {
    const auto& c = list.candidates[i];
    try {
      const double s = scorer.score(list.query_text, text_of(documents, c.ns));
      scores[i] = std::isfinite(s) ? std::clamp(s, 0.0, 1.0) : -std::numeric_limits<double>::infinity();
    } catch (const std::exception& e) {
      spdlog::warn("rerank: scorer failed for '{}' in task '{}': {}", c.ns, list.task_id, e.what());
      scores[i] = -std::numeric_limits<double>::infinity();
    }
  });
  for (std::size_t i = 0; i < depth; ++i) {
    auto& c = out.candidates[i];
    c.original_rank = list.candidates[i].rank;
    c.score = scores[i];
    c.stage = CandidateStage::rerank;
  }
  std::stable_sort(out.candidates.begin(), out.candidates.begin() + static_cast<std::ptrdiff_t>(depth),
                   [](const Candidate& a, const Candidate& b) {
                     if (a.score != b.score) return a.score > b.score;
                     return *a.original_rank < *b.original_rank;
                   });
  for (std::size_t i = depth; i < out.candidates.size(); ++i) {
    out.candidates[i].original_rank = list.candidates[i].rank;
  }
  finish(out, ground_truth, start);
  return out;
}

RankedList rerank_listwise(const RankedList& list, const DocumentTexts& documents,
                           const ListwiseReranker& reranker, std::size_t depth,
                           std::string_view ground_truth) {
  const auto start = Clock::now();
  RankedList out = list;
  depth = std::min(depth, out.candidates.size());
  std::vector<std::string> texts;
  texts.reserve(depth);
  for (std::size_t i = 0; i < depth; ++i) texts.push_back(text_of(documents, list.candidates[i].ns));
  const auto order = reranker.order(list.query_text, texts);
  if (order.size() != depth) {
    throw DataError(fmt::format("listwise reranker returned {} indices for {} documents",
                                order.size(), depth));
  }
  std::vector<bool> seen(depth, false);
  for (std::size_t i = 0; i < depth; ++i) {
    if (order[i] >= depth || seen[order[i]]) throw DataError("listwise reranker order is not a permutation");
    seen[order[i]] = true;
    auto c = list.candidates[order[i]];
    c.original_rank = c.rank;
    c.stage = CandidateStage::rerank;
    c.score = static_cast<double>(depth - i) / static_cast<double>(depth);
    out.candidates[i] = std::move(c);
  }
  for (std::size_t i = depth; i < out.candidates.size(); ++i) {
    out.candidates[i].original_rank = list.candidates[i].rank;
  }
  finish(out, ground_truth, start);
  return out;
}

}  // namespace dcs
