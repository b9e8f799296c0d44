#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "dcs/corpus.hpp"
#include "dcs/llm.hpp"

namespace dcs {

enum class QueryStrategy { prefix, description, hypothetical };

std::string_view to_string(QueryStrategy strategy);
std::optional<QueryStrategy> parse_strategy(std::string_view text);

struct TrimConfig {
  std::size_t max_lines = 10;
  std::size_t protect_tail_lines = 2;

  /// Throws ConfigError unless 1 <= protect_tail_lines <= max_lines.
  void validate() const;
  friend bool operator==(const TrimConfig&, const TrimConfig&) = default;
};

/// Prompt templates with {placeholder} substitution. Defaults are compiled in;
/// prompts.toml can override any key.
struct PromptTemplates {
  std::string description_prompt;
  std::string hypothetical_prompt;
  std::string generate_prompt;
  std::string knowledge_check_prompt;
  std::string embed_instruction;
  std::string fim_pre_sentinel = "<PRE>";
  std::string fim_suf_sentinel = "<SUF>";

  static PromptTemplates defaults();
};

PromptTemplates load_prompts(const std::filesystem::path& path);

/// Replaces every {name} with vars[name]; unknown placeholders stay verbatim.
std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& vars);

struct QueryBundle {
  std::string task_id;
  QueryStrategy strategy = QueryStrategy::prefix;
  bool fim = false;
  std::string text;                    // what gets embedded / tokenized
  std::optional<std::string> llm_raw;  // unedited LLM output
  bool downgraded = false;             // hypothetical fell back to prefix
};

struct QueryOptions {
  TrimConfig trim;
  bool fim = false;  // use code_after when the task has one
  int max_tokens = 256;
  double temperature = 0.0;
};

/// Last min(max_lines, total) lines of the cursor prefix, with leading blank
/// lines of that window dropped. The final protect_tail_lines lines are always
/// kept verbatim, so the result ends with the input's last line.
std::string trim_prefix(std::string_view code_before, const TrimConfig& cfg);

/// First max_lines lines of the suffix, trailing blank lines dropped.
std::string trim_suffix(std::string_view code_after, const TrimConfig& cfg);

/// "<PRE>\n{prefix}\n<SUF>\n{suffix}" with the configured sentinels.
std::string format_fim(std::string_view prefix, std::string_view suffix, const PromptTemplates& prompts);

/// Throws DataError("empty query") when the trimmed prefix is blank.
QueryBundle make_prefix_query(const CompletionTask& task, const QueryOptions& opts,
                              const PromptTemplates& prompts);

/// One retry on transport error or empty output, then TransportError / DataError.
QueryBundle make_description_query(const CompletionTask& task, const LlmClient& llm,
                                   const QueryOptions& opts, const PromptTemplates& prompts);

/// Prefix text, a newline, then the LLM's completion (fences stripped). An
/// empty completion after the retry downgrades to the prefix query.
QueryBundle make_hypothetical_query(const CompletionTask& task, const LlmClient& llm,
                                    const QueryOptions& opts, const PromptTemplates& prompts);

/// Dispatches on strategy; `llm` may be null only for the prefix strategy.
QueryBundle make_query(const CompletionTask& task, QueryStrategy strategy, const LlmClient* llm,
                       const QueryOptions& opts, const PromptTemplates& prompts);

/// First line starting with "INTENT:"; otherwise the first non-blank line,
/// prefixed. Empty when the input is blank.
std::string normalize_intent(std::string_view raw);

/// Contents of the first ``` fenced block when one exists, else the trimmed input.
std::string strip_code_fences(std::string_view raw);

std::string trim_whitespace(std::string_view text);

}  // namespace dcs
