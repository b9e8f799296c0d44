#include "dcs/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "dcs/error.hpp"
#include "dcs/tokenizer.hpp"

namespace dcs {
namespace {

const std::set<std::string, std::less<>> kRecordKeys = {"namespace", "scope", "package",
                                                        "methods", "raw_code", "jsdoc_summary"};
const std::set<std::string, std::less<>> kMethodKeys = {"name", "signature", "jsdoc"};
const std::set<std::string, std::less<>> kTaskKeys = {"id", "code_before", "code_middle",
                                                      "code_after", "ground_truth", "intent"};

std::string required_string(const Json& j, const char* key, std::string_view what) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) {
    throw DataError(fmt::format("{}: missing required field '{}'", what, key));
  }
  if (!it->is_string()) {
    throw DataError(fmt::format("{}: field '{}' must be a string", what, key));
  }
  return it->get<std::string>();
}

std::optional<std::string> optional_string(const Json& j, const char* key, std::string_view what) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) {
    throw DataError(fmt::format("{}: field '{}' must be a string", what, key));
  }
  return it->get<std::string>();
}

Json unknown_keys(const Json& j, const std::set<std::string, std::less<>>& known) {
  Json extra = Json::object();
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) extra[key] = value;
  }
  return extra;
}

MethodRecord method_from_json(const Json& j, std::string_view owner) {
  if (!j.is_object()) throw DataError(fmt::format("{}: method entry must be an object", owner));
  MethodRecord m;
  m.name = required_string(j, "name", owner);
  if (m.name.empty()) throw DataError(fmt::format("{}: method name is empty", owner));
  m.signature = optional_string(j, "signature", owner).value_or("");
  m.jsdoc = optional_string(j, "jsdoc", owner);
  m.extra = unknown_keys(j, kMethodKeys);
  return m;
}

template <typename Fn>
void for_each_json_line(std::string_view jsonl, std::string_view source_name, Fn&& fn) {
  std::size_t line_no = 0;
  for (auto line : split_lines(jsonl)) {
    ++line_no;
    if (is_blank(line)) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw DataError(fmt::format("{}:{}: parse error: {}", source_name, line_no, e.what()));
    }
    if (!j.is_object()) {
      throw DataError(fmt::format("{}:{}: expected a JSON object", source_name, line_no));
    }
    try {
      fn(j, line_no);
    } catch (const DataError& e) {
      throw DataError(fmt::format("{}:{}: {}", source_name, line_no, e.what()));
    }
  }
}

TokenSummary summarize(const std::vector<std::size_t>& counts) {
  if (counts.empty()) return {};
  TokenSummary s;
  s.min = *std::min_element(counts.begin(), counts.end());
  s.max = *std::max_element(counts.begin(), counts.end());
  unsigned long long total = 0;
  for (auto c : counts) total += c;
  s.mean = static_cast<double>(total) / static_cast<double>(counts.size());
  return s;
}

}  // namespace

std::string_view to_string(Intent intent) {
  switch (intent) {
    case Intent::clear:
      return "clear";
    case Intent::ambiguous:
      return "ambiguous";
    case Intent::unjudged:
      return "unjudged";
  }
  return "unjudged";
}

std::optional<Intent> parse_intent(std::string_view text) {
  if (text == "clear") return Intent::clear;
  if (text == "ambiguous") return Intent::ambiguous;
  if (text == "unjudged") return Intent::unjudged;
  return std::nullopt;
}

Corpus::Corpus(std::vector<ScriptIncludeRecord> records) : records_(std::move(records)) {
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    if (r.ns.empty()) throw DataError(fmt::format("record {}: empty namespace", i));
    if (!by_ns_.emplace(r.ns, i).second) {
      throw DataError(fmt::format("duplicate namespace '{}'", r.ns));
    }
    std::set<std::string_view> names;
    for (const auto& m : r.methods) {
      if (!names.insert(m.name).second) {
        throw DataError(fmt::format("namespace '{}': duplicate method '{}'", r.ns, m.name));
      }
    }
  }
}

const ScriptIncludeRecord* Corpus::find(std::string_view ns) const {
  const auto it = by_ns_.find(ns);
  return it == by_ns_.end() ? nullptr : &records_[it->second];
}

ScriptIncludeRecord record_from_json(const Json& j, const CorpusOptions& opts) {
  ScriptIncludeRecord r;
  r.ns = required_string(j, "namespace", "record");
  if (r.ns.empty()) throw DataError("record: namespace must be non-empty");
  const std::string what = fmt::format("namespace '{}'", r.ns);
  r.scope = required_string(j, "scope", what);
  r.package = required_string(j, "package", what);
  r.raw_code = required_string(j, "raw_code", what);
  r.jsdoc_summary = optional_string(j, "jsdoc_summary", what);
  const auto methods = j.find("methods");
  if (methods == j.end() || !methods->is_array()) {
    throw DataError(fmt::format("{}: missing required field 'methods'", what));
  }
  std::set<std::string> names;
  for (const auto& m : *methods) {
    r.methods.push_back(method_from_json(m, what));
    if (!names.insert(r.methods.back().name).second) {
      throw DataError(fmt::format("{}: duplicate method '{}'", what, r.methods.back().name));
    }
  }
  r.is_global = r.scope == opts.global_scope;
  r.raw_token_count = tokenize(r.raw_code).size();
  r.jsdoc_token_count = r.jsdoc_summary ? tokenize(*r.jsdoc_summary).size() : 0;
  r.extra = unknown_keys(j, kRecordKeys);
  return r;
}

Json to_json(const ScriptIncludeRecord& r) {
  Json j = r.extra;
  j["namespace"] = r.ns;
  j["scope"] = r.scope;
  j["package"] = r.package;
  Json methods = Json::array();
  for (const auto& m : r.methods) {
    Json mj = m.extra;
    mj["name"] = m.name;
    mj["signature"] = m.signature;
    if (m.jsdoc) mj["jsdoc"] = *m.jsdoc;
    methods.push_back(std::move(mj));
  }
  j["methods"] = std::move(methods);
  j["raw_code"] = r.raw_code;
  if (r.jsdoc_summary) j["jsdoc_summary"] = *r.jsdoc_summary;
  return j;
}

CompletionTask task_from_json(const Json& j) {
  CompletionTask t;
  t.id = required_string(j, "id", "task");
  if (t.id.empty()) throw DataError("task: id must be non-empty");
  const std::string what = fmt::format("task '{}'", t.id);
  t.code_before = required_string(j, "code_before", what);
  t.code_middle = required_string(j, "code_middle", what);
  if (t.code_middle.empty()) throw DataError(fmt::format("{}: code_middle must be non-empty", what));
  t.code_after = optional_string(j, "code_after", what);
  t.ground_truth = required_string(j, "ground_truth", what);
  if (t.ground_truth.empty()) throw DataError(fmt::format("{}: ground_truth must be non-empty", what));
  if (auto intent = optional_string(j, "intent", what)) {
    auto parsed = parse_intent(*intent);
    if (!parsed) throw DataError(fmt::format("{}: unknown intent '{}'", what, *intent));
    t.intent = *parsed;
  }
  t.extra = unknown_keys(j, kTaskKeys);
  return t;
}

Json to_json(const CompletionTask& t) {
  Json j = t.extra;
  j["id"] = t.id;
  j["code_before"] = t.code_before;
  j["code_middle"] = t.code_middle;
  if (t.code_after) j["code_after"] = *t.code_after;
  j["ground_truth"] = t.ground_truth;
  j["intent"] = std::string(to_string(t.intent));
  return j;
}

Corpus parse_corpus(std::string_view jsonl, const CorpusOptions& opts, std::string_view source_name) {
  std::vector<ScriptIncludeRecord> records;
  std::map<std::string, std::size_t> first_line;
  for_each_json_line(jsonl, source_name, [&](const Json& j, std::size_t line_no) {
    auto record = record_from_json(j, opts);
    const auto [it, inserted] = first_line.emplace(record.ns, line_no);
    if (!inserted) {
      throw DataError(fmt::format("duplicate namespace '{}' on lines {} and {}", record.ns,
                                  it->second, line_no));
    }
    records.push_back(std::move(record));
  });
  return Corpus(std::move(records));
}

Corpus load_corpus(const std::filesystem::path& path, const CorpusOptions& opts) {
  return parse_corpus(read_file(path), opts, path.string());
}

std::string serialize_corpus(const Corpus& corpus) {
  std::string out;
  for (const auto& r : corpus.records()) {
    out += to_json(r).dump();
    out += '\n';
  }
  return out;
}

std::vector<CompletionTask> parse_tasks(std::string_view jsonl, const Corpus* corpus,
                                        std::string_view source_name) {
  std::vector<CompletionTask> tasks;
  std::set<std::string> ids;
  for_each_json_line(jsonl, source_name, [&](const Json& j, std::size_t) {
    auto task = task_from_json(j);
    if (!ids.insert(task.id).second) throw DataError(fmt::format("duplicate task id '{}'", task.id));
    tasks.push_back(std::move(task));
  });
  if (corpus != nullptr) {
    std::vector<std::string> unresolved;
    for (const auto& t : tasks) {
      if (!corpus->contains(t.ground_truth)) unresolved.push_back(t.id);
    }
    if (!unresolved.empty()) {
      throw DataError(fmt::format("{}: unresolved ground_truth for tasks: {}", source_name,
                                  fmt::join(unresolved, ", ")));
    }
  }
  return tasks;
}

std::vector<CompletionTask> load_tasks(const std::filesystem::path& path, const Corpus* corpus) {
  return parse_tasks(read_file(path), corpus, path.string());
}

std::string serialize_tasks(const std::vector<CompletionTask>& tasks) {
  std::string out;
  for (const auto& t : tasks) {
    out += to_json(t).dump();
    out += '\n';
  }
  return out;
}

CorpusStats corpus_stats(const Corpus& corpus) {
  if (corpus.empty()) throw DataError("corpus_stats: empty corpus");
  CorpusStats stats;
  stats.namespace_count = corpus.size();
  std::vector<std::size_t> raw;
  std::vector<std::size_t> jsdoc;
  for (const auto& r : corpus.records()) {
    stats.api_count += r.methods.size();
    raw.push_back(r.raw_token_count);
    if (r.jsdoc_summary) jsdoc.push_back(r.jsdoc_token_count);
  }
  stats.raw_tokens = summarize(raw);
  stats.jsdoc_tokens = summarize(jsdoc);
  return stats;
}

Json to_json(const CorpusStats& s) {
  auto summary = [](const TokenSummary& t) {
    return Json{{"min", t.min}, {"mean", t.mean}, {"max", t.max}};
  };
  return Json{{"namespace_count", s.namespace_count},
              {"api_count", s.api_count},
              {"raw_tokens", summary(s.raw_tokens)},
              {"jsdoc_tokens", summary(s.jsdoc_tokens)}};
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot open file: {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError(fmt::format("cannot write file: {}", path.string()));
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw ConfigError(fmt::format("write failed: {}", path.string()));
}

}  // namespace dcs
