#include "dcs/query_enhance.hpp"

#include <cctype>
#include <vector>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "dcs/error.hpp"
#include "dcs/tokenizer.hpp"
#include "dcs/toml.hpp"

namespace dcs {
namespace {

std::string join_lines(const std::vector<std::string_view>& lines, std::size_t begin, std::size_t end) {
  std::string out;
  for (auto i = begin; i < end; ++i) {
    if (i > begin) out += '\n';
    out += lines[i];
  }
  return out;
}

// Calls the LLM with one retry on transport errors or empty output. Returns
// the raw output, possibly blank after the retry.
std::string complete_with_retry(const LlmClient& llm, const LlmRequest& req) {
  for (int attempt = 0;; ++attempt) {
    try {
      auto out = llm.complete(req);
      if (!is_blank(out) || attempt >= 1) return out;
      spdlog::warn("llm returned empty {} output for task '{}'; retrying", req.purpose, req.task_id);
    } catch (const TransportError& e) {
      if (attempt >= 1) {
        throw TransportError(e.dependency(),
                             fmt::format("task '{}': {} request failed: {}", req.task_id,
                                         req.purpose, e.what()));
      }
      spdlog::warn("llm {} request for task '{}' failed, retrying: {}", req.purpose, req.task_id,
                   e.what());
    }
  }
}

struct PromptContext {
  std::string prefix;
  std::string code;  // prefix, or the FIM rendering when fim applies
  bool fim = false;
};

PromptContext prompt_context(const CompletionTask& task, const QueryOptions& opts,
                             const PromptTemplates& prompts) {
  opts.trim.validate();
  PromptContext ctx;
  ctx.prefix = trim_prefix(task.code_before, opts.trim);
  if (is_blank(ctx.prefix)) throw DataError(fmt::format("task '{}': empty query", task.id));
  ctx.fim = opts.fim && task.code_after.has_value();
  ctx.code = ctx.fim ? format_fim(ctx.prefix, trim_suffix(*task.code_after, opts.trim), prompts)
                     : ctx.prefix;
  return ctx;
}

}  // namespace

std::string_view to_string(QueryStrategy strategy) {
  switch (strategy) {
    case QueryStrategy::prefix:
      return "prefix";
    case QueryStrategy::description:
      return "description";
    case QueryStrategy::hypothetical:
      return "hypothetical";
  }
  return "prefix";
}

std::optional<QueryStrategy> parse_strategy(std::string_view text) {
  if (text == "prefix") return QueryStrategy::prefix;
  if (text == "description") return QueryStrategy::description;
  if (text == "hypothetical") return QueryStrategy::hypothetical;
  return std::nullopt;
}

void TrimConfig::validate() const {
  if (max_lines < 1) throw ConfigError("trim: max_lines must be >= 1");
  if (protect_tail_lines < 1 || protect_tail_lines > max_lines) {
    throw ConfigError("trim: protect_tail_lines must be in [1, max_lines]");
  }
}

PromptTemplates PromptTemplates::defaults() {
  PromptTemplates p;
  p.description_prompt =
      "You are given partial ServiceNow server-side JavaScript code. The developer's cursor is at "
      "the end of the code.\n"
      "Describe in one line what the developer intends to do next.\n"
      "Reply with exactly one line beginning with \"INTENT:\".\n\n"
      "Code:\n{code}\n";
  p.hypothetical_prompt =
      "Complete the following partial ServiceNow server-side JavaScript code.\n"
      "First write a JSDoc comment with an @description tag explaining what the completion does, "
      "then write the completing code. Reply with code only.\n\n"
      "Code:\n{code}\n";
  p.generate_prompt =
      "Below is the source of the ServiceNow Script Include {namespace}.\n"
      "Write a realistic caller script that uses {namespace}, split into three parts:\n"
      "- code_before: the lines before the call; it must not mention {namespace}\n"
      "- code_middle: the few lines that invoke {namespace}\n"
      "- code_after: the lines after the call; it must not mention {namespace}\n"
      "Answer with three sections, each a heading followed by a fenced javascript block:\n"
      "### code_before\n### code_middle\n### code_after\n\n"
      "Script Include source:\n{raw_code}\n";
  p.knowledge_check_prompt =
      "Complete the following partial ServiceNow server-side JavaScript code. Reply with code "
      "only.\n\n{code}\n";
  p.embed_instruction =
      "Instruct: Given the code, find APIs based on their JSDoc that this code might need to "
      "complete its intended purpose.\nCode:\n";
  return p;
}

PromptTemplates load_prompts(const std::filesystem::path& path) {
  auto p = PromptTemplates::defaults();
  const auto j = load_toml(path);
  auto take = [&](const char* key, std::string& field) {
    if (!j.contains(key)) return;
    if (!j.at(key).is_string()) throw ConfigError(fmt::format("{}: '{}' must be a string", path.string(), key));
    field = j.at(key).get<std::string>();
  };
  take("description_prompt", p.description_prompt);
  take("hypothetical_prompt", p.hypothetical_prompt);
  take("generate_prompt", p.generate_prompt);
  take("knowledge_check_prompt", p.knowledge_check_prompt);
  take("embed_instruction", p.embed_instruction);
  take("fim_pre_sentinel", p.fim_pre_sentinel);
  take("fim_suf_sentinel", p.fim_suf_sentinel);
  return p;
}

std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& vars) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      const auto close = tmpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        const auto it = vars.find(std::string(tmpl.substr(i + 1, close - i - 1)));
        if (it != vars.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out += tmpl[i++];
  }
  return out;
}

std::string trim_prefix(std::string_view code_before, const TrimConfig& cfg) {
  const auto lines = split_lines(code_before);
  const std::size_t total = lines.size();
  const std::size_t keep = std::min(cfg.max_lines, total);
  std::size_t begin = total - keep;
  const std::size_t tail_start = total - std::min(cfg.protect_tail_lines, keep);
  while (begin < tail_start && is_blank(lines[begin])) ++begin;
  return join_lines(lines, begin, total);
}

std::string trim_suffix(std::string_view code_after, const TrimConfig& cfg) {
  const auto lines = split_lines(code_after);
  std::size_t end = std::min(cfg.max_lines, lines.size());
  while (end > 0 && is_blank(lines[end - 1])) --end;
  return join_lines(lines, 0, end);
}

std::string format_fim(std::string_view prefix, std::string_view suffix,
                       const PromptTemplates& prompts) {
  return fmt::format("{}\n{}\n{}\n{}", prompts.fim_pre_sentinel, prefix, prompts.fim_suf_sentinel,
                     suffix);
}

QueryBundle make_prefix_query(const CompletionTask& task, const QueryOptions& opts,
                              const PromptTemplates& prompts) {
  auto ctx = prompt_context(task, opts, prompts);
  QueryBundle q;
  q.task_id = task.id;
  q.strategy = QueryStrategy::prefix;
  q.fim = ctx.fim;
  q.text = std::move(ctx.code);
  return q;
}

std::string trim_whitespace(std::string_view text) {
  std::size_t b = 0;
  std::size_t e = text.size();
  while (b < e && std::isspace(static_cast<unsigned char>(text[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
  return std::string(text.substr(b, e - b));
}

std::string normalize_intent(std::string_view raw) {
  std::string first;
  for (auto line : split_lines(raw)) {
    auto t = trim_whitespace(line);
    if (t.empty()) continue;
    if (t.starts_with("INTENT:")) return t;
    if (first.empty()) first = std::move(t);
  }
  return first.empty() ? std::string{} : "INTENT: " + first;
}

std::string strip_code_fences(std::string_view raw) {
  const auto open = raw.find("```");
  if (open == std::string_view::npos) return trim_whitespace(raw);
  const auto body = raw.find('\n', open);
  if (body == std::string_view::npos) return trim_whitespace(raw.substr(open + 3));
  const auto close = raw.find("```", body + 1);
  const auto inner = raw.substr(body + 1, close == std::string_view::npos ? std::string_view::npos
                                                                           : close - body - 1);
  // Keep leading indentation of the first line; drop trailing whitespace only.
  std::size_t e = inner.size();
  while (e > 0 && std::isspace(static_cast<unsigned char>(inner[e - 1]))) --e;
  return std::string(inner.substr(0, e));
}

QueryBundle make_description_query(const CompletionTask& task, const LlmClient& llm,
                                   const QueryOptions& opts, const PromptTemplates& prompts) {
  const auto ctx = prompt_context(task, opts, prompts);
  LlmRequest req;
  req.prompt = render_template(prompts.description_prompt, {{"code", ctx.code}});
  req.max_tokens = opts.max_tokens;
  req.temperature = opts.temperature;
  req.purpose = "description";
  req.task_id = task.id;
  auto raw = complete_with_retry(llm, req);
  auto intent = normalize_intent(raw);
  if (intent.empty()) {
    throw DataError(fmt::format("task '{}': empty description output after retry", task.id));
  }
  QueryBundle q;
  q.task_id = task.id;
  q.strategy = QueryStrategy::description;
  q.fim = ctx.fim;
  q.text = std::move(intent);
  q.llm_raw = std::move(raw);
  return q;
}

QueryBundle make_hypothetical_query(const CompletionTask& task, const LlmClient& llm,
                                    const QueryOptions& opts, const PromptTemplates& prompts) {
  const auto ctx = prompt_context(task, opts, prompts);
  LlmRequest req;
  req.prompt = render_template(prompts.hypothetical_prompt, {{"code", ctx.code}});
  req.max_tokens = opts.max_tokens;
  req.temperature = opts.temperature;
  req.purpose = "hypothetical";
  req.task_id = task.id;
  auto raw = complete_with_retry(llm, req);
  const auto completion = strip_code_fences(raw);
  QueryBundle q;
  q.task_id = task.id;
  q.fim = ctx.fim;
  q.llm_raw = std::move(raw);
  if (is_blank(completion)) {
    spdlog::warn("task '{}': empty hypothetical completion; falling back to prefix query", task.id);
    q.strategy = QueryStrategy::prefix;
    q.downgraded = true;
    q.text = ctx.code;
    return q;
  }
  q.strategy = QueryStrategy::hypothetical;
  q.text = ctx.code + "\n" + completion;
  return q;
}

QueryBundle make_query(const CompletionTask& task, QueryStrategy strategy, const LlmClient* llm,
                       const QueryOptions& opts, const PromptTemplates& prompts) {
  if (strategy == QueryStrategy::prefix) return make_prefix_query(task, opts, prompts);
  if (llm == nullptr) throw ConfigError("llm endpoint required");
  if (strategy == QueryStrategy::description) return make_description_query(task, *llm, opts, prompts);
  return make_hypothetical_query(task, *llm, opts, prompts);
}

}  // namespace dcs
