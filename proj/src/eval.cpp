#include "dcs/eval.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "dcs/error.hpp"
#include "dcs/parallel.hpp"
#include "dcs/tokenizer.hpp"

namespace dcs {
namespace {

void require_outcomes(std::span<const RetrievalOutcome> outcomes) {
  if (outcomes.empty()) throw DataError("metrics: empty outcome set");
}

Json to_json(const Percentiles& p) {
  return Json{{"p50", p.p50}, {"p95", p.p95}, {"max", p.max}, {"count", p.count}};
}

Percentiles percentiles_from_json(const Json& j) {
  return {j.at("p50").get<double>(), j.at("p95").get<double>(), j.at("max").get<double>(),
          j.at("count").get<std::size_t>()};
}

std::string judge_code(const CompletionTask& task) {
  if (!task.code_after) return task.code_before;
  return task.code_before + "\n// <cursor>\n" + *task.code_after;
}

}  // namespace

RetrievalOutcome outcome_of(const RankedList& list) {
  return {list.task_id, list.ground_truth_rank, list.stage_latencies, list.strategy, list.reranked};
}

std::map<std::size_t, double> topk_accuracy(std::span<const RetrievalOutcome> outcomes,
                                            const std::vector<std::size_t>& ks) {
  require_outcomes(outcomes);
  if (ks.empty()) throw DataError("topk_accuracy: no K values");
  std::map<std::size_t, double> out;
  for (auto k : ks) {
    if (k < 1) throw DataError("topk_accuracy: K must be >= 1");
    std::size_t hits = 0;
    for (const auto& o : outcomes) {
      if (o.ground_truth_rank && *o.ground_truth_rank <= k) ++hits;
    }
    out[k] = 100.0 * static_cast<double>(hits) / static_cast<double>(outcomes.size());
  }
  return out;
}

double mrr_at_k(std::span<const RetrievalOutcome> outcomes, std::size_t k) {
  require_outcomes(outcomes);
  if (k < 1) throw DataError("mrr_at_k: k must be >= 1");
  double sum = 0.0;
  for (const auto& o : outcomes) {
    if (o.ground_truth_rank && *o.ground_truth_rank <= k) sum += 1.0 / static_cast<double>(*o.ground_truth_rank);
  }
  return sum / static_cast<double>(outcomes.size());
}

double nearest_rank(std::vector<double> values, double p) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  return values[rank - 1];
}

Percentiles percentiles(std::vector<double> values) {
  Percentiles p;
  p.count = values.size();
  if (values.empty()) return p;
  std::sort(values.begin(), values.end());
  p.p50 = nearest_rank(values, 50);
  p.p95 = nearest_rank(values, 95);
  p.max = values.back();
  return p;
}

LatencySummary latency_stats(std::span<const RetrievalOutcome> outcomes) {
  LatencySummary s;
  std::vector<double> totals;
  std::map<std::string, std::vector<double>> stages;
  for (const auto& o : outcomes) {
    double sum = 0.0;
    std::optional<double> total;
    for (const auto& [stage, ms] : o.stage_latencies) {
      if (stage == "total") {
        total = ms;
      } else {
        stages[stage].push_back(ms);
        sum += ms;
      }
    }
    if (!o.stage_latencies.empty()) totals.push_back(total.value_or(sum));
  }
  s.end_to_end = percentiles(std::move(totals));
  for (auto& [stage, values] : stages) s.stages[stage] = percentiles(std::move(values));
  return s;
}

Json to_json(const LatencySummary& s) {
  Json stages = Json::object();
  for (const auto& [name, p] : s.stages) stages[name] = to_json(p);
  return Json{{"end_to_end", to_json(s.end_to_end)}, {"stages", std::move(stages)}};
}

std::string judge_user_prompt(std::string_view code, std::string_view ns,
                              std::string_view api_description) {
  return fmt::format(
      "### CODE:\n{}\n\n### NAMESPACE:\n{}\n\n### API DESCRIPTIONS (Context):\n{}\n\n"
      "Does this namespace fit the code's intent?",
      code, ns, api_description);
}

std::string api_description(const ScriptIncludeRecord& record) {
  std::string out;
  for (const auto& m : record.methods) {
    if (!out.empty()) out += '\n';
    out += m.signature.empty() ? m.name : m.signature;
    if (m.jsdoc) out += ": " + trim_whitespace(*m.jsdoc);
  }
  if (out.empty() && record.jsdoc_summary) out = *record.jsdoc_summary;
  return out;
}

std::optional<Verdict> parse_verdict(std::string_view raw) {
  for (auto line : split_lines(raw)) {
    const auto t = trim_whitespace(line);
    if (t.empty()) continue;
    if (t == "Yes.") return Verdict::yes;
    if (t == "No.") return Verdict::no;
    return std::nullopt;
  }
  return std::nullopt;
}

IntentJudgeResult judge_intent(const CompletionTask& task, const Corpus& corpus, const LlmClient& llm) {
  const auto* record = corpus.find(task.ground_truth);
  if (record == nullptr) {
    throw DataError(fmt::format("task '{}': ground truth '{}' not in corpus", task.id, task.ground_truth));
  }
  LlmRequest req;
  req.system = std::string(kJudgeSystemPrompt);
  req.prompt = judge_user_prompt(judge_code(task), record->ns, api_description(*record));
  req.max_tokens = 8;
  req.temperature = 0.0;
  req.purpose = "judge";
  req.task_id = task.id;
  IntentJudgeResult result;
  result.task_id = task.id;
  result.raw = llm.complete(req);
  result.verdict = parse_verdict(result.raw);
  return result;
}

Intent intent_from(const IntentJudgeResult& result) {
  if (!result.verdict) return Intent::unjudged;
  return *result.verdict == Verdict::yes ? Intent::clear : Intent::ambiguous;
}

EvalReport evaluate_outcomes(std::string label, std::span<const RetrievalOutcome> outcomes,
                             const std::vector<std::size_t>& ks, bool include_latency,
                             std::size_t failed) {
  EvalReport r;
  r.label = std::move(label);
  r.n = outcomes.size();
  r.failed = failed;
  if (outcomes.empty()) return r;
  r.topk = topk_accuracy(outcomes, ks);
  for (auto k : ks) r.mrr[k] = mrr_at_k(outcomes, k);
  if (include_latency) r.latency = latency_stats(outcomes);
  return r;
}

ReportSet build_report(const std::vector<LabeledOutcomes>& sets, const std::vector<std::size_t>& ks,
                       bool include_latency) {
  ReportSet out;
  out.ks = ks;
  for (const auto& [label, outcomes] : sets) {
    out.reports.push_back(evaluate_outcomes(label, outcomes, ks, include_latency));
  }
  return out;
}

Json ReportSet::to_json() const {
  Json j = Json::object();
  for (const auto& r : reports) {
    Json topk = Json::object();
    Json mrr = Json::object();
    for (const auto& [k, v] : r.topk) topk[std::to_string(k)] = v;
    for (const auto& [k, v] : r.mrr) mrr[std::to_string(k)] = v;
    Json row{{"topk", std::move(topk)}, {"mrr", std::move(mrr)}, {"n", r.n}, {"failed", r.failed}};
    if (r.latency) row["latency_ms"] = dcs::to_json(*r.latency);
    j[r.label] = std::move(row);
  }
  return j;
}

ReportSet ReportSet::from_json(const Json& j) {
  ReportSet out;
  std::set<std::size_t> ks;
  for (const auto& [label, row] : j.items()) {
    EvalReport r;
    r.label = label;
    r.n = row.at("n").get<std::size_t>();
    r.failed = row.value("failed", std::size_t{0});
    for (const auto& [k, v] : row.at("topk").items()) {
      r.topk[std::stoul(k)] = v.get<double>();
      ks.insert(std::stoul(k));
    }
    for (const auto& [k, v] : row.at("mrr").items()) r.mrr[std::stoul(k)] = v.get<double>();
    if (row.contains("latency_ms")) {
      LatencySummary s;
      const auto& lj = row.at("latency_ms");
      s.end_to_end = percentiles_from_json(lj.at("end_to_end"));
      for (const auto& [name, p] : lj.at("stages").items()) s.stages[name] = percentiles_from_json(p);
      r.latency = s;
    }
    out.reports.push_back(std::move(r));
  }
  out.ks.assign(ks.begin(), ks.end());
  return out;
}

std::string ReportSet::markdown() const {
  auto table = [&](const char* title, bool accuracy) {
    std::string s = fmt::format("### {}\n\n| Method |", title);
    for (auto k : ks) s += fmt::format(" @{} |", k);
    s += "\n|---|";
    for (std::size_t i = 0; i < ks.size(); ++i) s += "---:|";
    s += '\n';
    for (const auto& r : reports) {
      s += fmt::format("| {} |", r.label);
      for (auto k : ks) {
        const auto& m = accuracy ? r.topk : r.mrr;
        const auto it = m.find(k);
        if (it == m.end()) {
          s += " - |";
        } else if (accuracy) {
          s += fmt::format(" {:.2f} |", it->second);
        } else {
          s += fmt::format(" {:.4f} |", it->second);
        }
      }
      s += '\n';
    }
    return s;
  };
  std::string out = table("Top-K accuracy (%)", true) + "\n" + table("MRR@K", false);
  bool any_latency = false;
  for (const auto& r : reports) any_latency = any_latency || r.latency.has_value();
  if (any_latency) {
    out += "\n### Latency (ms, client-observed wall time)\n\n| Method | Stage | p50 | p95 | max |\n"
           "|---|---|---:|---:|---:|\n";
    for (const auto& r : reports) {
      if (!r.latency) continue;
      const auto& e = r.latency->end_to_end;
      out += fmt::format("| {} | end_to_end | {:.3f} | {:.3f} | {:.3f} |\n", r.label, e.p50, e.p95, e.max);
      for (const auto& [stage, p] : r.latency->stages) {
        out += fmt::format("| {} | {} | {:.3f} | {:.3f} | {:.3f} |\n", r.label, stage, p.p50, p.p95, p.max);
      }
    }
  }
  return out;
}

std::string ReportSet::csv() const {
  std::string out = "label,n,failed";
  for (auto k : ks) out += fmt::format(",acc@{}", k);
  for (auto k : ks) out += fmt::format(",mrr@{}", k);
  out += '\n';
  for (const auto& r : reports) {
    std::string label = r.label;
    if (label.find_first_of(",\"") != std::string::npos) {
      std::string quoted = "\"";
      for (char c : label) quoted += c == '"' ? std::string("\"\"") : std::string(1, c);
      label = quoted + "\"";
    }
    out += fmt::format("{},{},{}", label, r.n, r.failed);
    for (auto k : ks) out += fmt::format(",{:.4f}", r.topk.count(k) ? r.topk.at(k) : 0.0);
    for (auto k : ks) out += fmt::format(",{:.6f}", r.mrr.count(k) ? r.mrr.at(k) : 0.0);
    out += '\n';
  }
  return out;
}

KnowledgeCheckResult knowledge_check(const std::vector<CompletionTask>& tasks, const LlmClient& llm,
                                     const PromptTemplates& prompts, std::size_t parallelism) {
  std::vector<int> hit(tasks.size(), 0);  // 1 hit, 0 miss, -1 failed
  parallel_for(tasks.size(), parallelism, [&](std::size_t i) {
    LlmRequest req;
    req.prompt = render_template(prompts.knowledge_check_prompt, {{"code", tasks[i].code_before}});
    req.purpose = "knowledge_check";
    req.task_id = tasks[i].id;
    try {
      hit[i] = contains_identifier(llm.complete(req), tasks[i].ground_truth) ? 1 : 0;
    } catch (const std::exception&) {
      hit[i] = -1;
    }
  });
  KnowledgeCheckResult r;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (hit[i] < 0) {
      r.failed_ids.push_back(tasks[i].id);
      continue;
    }
    ++r.n;
    r.hits += static_cast<std::size_t>(hit[i]);
  }
  r.fraction = r.n == 0 ? 0.0 : static_cast<double>(r.hits) / static_cast<double>(r.n);
  return r;
}

}  // namespace dcs
