#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace dcs {

using Json = nlohmann::json;

struct MethodRecord {
  std::string name;
  std::string signature;
  std::optional<std::string> jsdoc;
  Json extra = Json::object();  // unknown keys, preserved on round-trip

  friend bool operator==(const MethodRecord&, const MethodRecord&) = default;
};

/// One Script Include: an API namespace and everything indexed about it.
struct ScriptIncludeRecord {
  std::string ns;
  std::string scope;
  std::string package;
  bool is_global = false;
  std::vector<MethodRecord> methods;
  std::string raw_code;
  std::optional<std::string> jsdoc_summary;
  std::size_t raw_token_count = 0;
  std::size_t jsdoc_token_count = 0;
  Json extra = Json::object();

  friend bool operator==(const ScriptIncludeRecord&, const ScriptIncludeRecord&) = default;
};

enum class Intent { clear, ambiguous, unjudged };

std::string_view to_string(Intent intent);
std::optional<Intent> parse_intent(std::string_view text);

/// One evaluation sample. `ground_truth` may be empty for ad-hoc queries that
/// never went through load_tasks (e.g. serve requests).
struct CompletionTask {
  std::string id;
  std::string code_before;
  std::string code_middle;
  std::optional<std::string> code_after;
  std::string ground_truth;
  Intent intent = Intent::unjudged;
  Json extra = Json::object();

  bool fim_capable() const { return code_after.has_value(); }

  friend bool operator==(const CompletionTask&, const CompletionTask&) = default;
};

struct CorpusOptions {
  std::string global_scope = "global";
};

/// Validated, immutable-after-load list of namespaces with a lookup table.
class Corpus {
 public:
  Corpus() = default;
  /// Validates invariants; throws DataError on violations.
  explicit Corpus(std::vector<ScriptIncludeRecord> records);

  const std::vector<ScriptIncludeRecord>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  const ScriptIncludeRecord* find(std::string_view ns) const;
  bool contains(std::string_view ns) const { return find(ns) != nullptr; }

  friend bool operator==(const Corpus& a, const Corpus& b) { return a.records_ == b.records_; }

 private:
  std::vector<ScriptIncludeRecord> records_;
  std::map<std::string, std::size_t, std::less<>> by_ns_;
};

/// Builds a record from its JSON form; fills is_global and token counts.
ScriptIncludeRecord record_from_json(const Json& j, const CorpusOptions& opts = {});
Json to_json(const ScriptIncludeRecord& record);

CompletionTask task_from_json(const Json& j);
Json to_json(const CompletionTask& task);

Corpus parse_corpus(std::string_view jsonl, const CorpusOptions& opts = {},
                    std::string_view source_name = "<corpus>");
Corpus load_corpus(const std::filesystem::path& path, const CorpusOptions& opts = {});
std::string serialize_corpus(const Corpus& corpus);

std::vector<CompletionTask> parse_tasks(std::string_view jsonl, const Corpus* corpus = nullptr,
                                        std::string_view source_name = "<tasks>");
std::vector<CompletionTask> load_tasks(const std::filesystem::path& path,
                                       const Corpus* corpus = nullptr);
std::string serialize_tasks(const std::vector<CompletionTask>& tasks);

struct TokenSummary {
  std::size_t min = 0;
  double mean = 0.0;
  std::size_t max = 0;

  friend bool operator==(const TokenSummary&, const TokenSummary&) = default;
};

struct CorpusStats {
  std::size_t namespace_count = 0;
  std::size_t api_count = 0;
  TokenSummary raw_tokens;
  TokenSummary jsdoc_tokens;  // over records that carry a summary; zeros when none do

  friend bool operator==(const CorpusStats&, const CorpusStats&) = default;
};

/// Throws DataError on an empty corpus.
CorpusStats corpus_stats(const Corpus& corpus);
Json to_json(const CorpusStats& stats);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace dcs
