#include "dcs/fixtures.hpp"

#include <algorithm>
#include <optional>
#include <random>

#include <fmt/format.h>

#include "dcs/tokenizer.hpp"

namespace dcs::fixtures {
namespace {

struct MethodSpec {
  std::string name;
  std::string signature;
  std::optional<std::string> jsdoc;
};

struct TaskSpec {
  std::string before;
  std::string middle;
  std::string after;  // empty: no suffix
  bool clear = true;
  std::string goal;
  std::string hypothetical;
};

struct NsSpec {
  std::string ns;
  std::string scope;
  std::string package;
  std::optional<std::string> summary;
  std::vector<MethodSpec> methods;
  std::vector<TaskSpec> tasks;
};

#include "fixtures_toy.inc"

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

// Pronounceable lowercase words, all distinct, none a real keyword.
class WordMaker {
 public:
  explicit WordMaker(std::uint64_t seed) : rng_(seed) {}
  std::string next() {
    static constexpr std::string_view kOnset = "bdfgklmnprstvz";
    static constexpr std::string_view kVowel = "aeiou";
    while (true) {
      std::string w;
      const auto syllables = 2 + rng_.below(2);
      for (std::size_t s = 0; s < syllables; ++s) {
        w += kOnset[rng_.below(kOnset.size())];
        w += kVowel[rng_.below(kVowel.size())];
      }
      w += kOnset[rng_.below(kOnset.size())];
      if (used_.insert(w).second) return w;
    }
  }
  Rng& rng() { return rng_; }

 private:
  Rng rng_;
  std::set<std::string> used_;
};

std::string capitalize(std::string w) {
  if (!w.empty() && w[0] >= 'a' && w[0] <= 'z') w[0] = static_cast<char>(w[0] - 'a' + 'A');
  return w;
}

std::string raw_code_for(const std::string& ns, const std::vector<MethodSpec>& methods) {
  std::string code = fmt::format("var {0} = Class.create();\n{0}.prototype = {{\n  initialize: function() {{}},\n", ns);
  for (const auto& m : methods) {
    const auto open = m.signature.find('(');
    const auto args = open == std::string::npos ? std::string() : m.signature.substr(open);
    code += fmt::format("\n  {}: function{} {{\n    // {}\n  }},\n", m.name, args, m.jsdoc.value_or("implementation"));
  }
  code += fmt::format("\n  type: '{}'\n}};\n", ns);
  return code;
}

ScriptIncludeRecord make_record(const std::string& ns, const std::string& scope, const std::string& package,
                                const std::vector<MethodSpec>& methods, const std::optional<std::string>& summary) {
  Json j{{"namespace", ns}, {"scope", scope}, {"package", package}};
  Json ms = Json::array();
  for (const auto& m : methods) {
    Json mj{{"name", m.name}, {"signature", m.signature}};
    if (m.jsdoc) mj["jsdoc"] = *m.jsdoc;
    ms.push_back(std::move(mj));
  }
  j["methods"] = std::move(ms);
  j["raw_code"] = raw_code_for(ns, methods);
  if (summary) j["jsdoc_summary"] = *summary;
  return record_from_json(j);
}

std::string jsonl(const std::vector<Json>& rows) {
  std::string out;
  for (const auto& r : rows) out += r.dump() + "\n";
  return out;
}

}  // namespace

ToyBenchmark toy_benchmark() {
  ToyBenchmark out;
  std::vector<ScriptIncludeRecord> records;
  std::vector<Json> responses;
  std::size_t n = 0;
  for (const auto& spec : kToy) {
    records.push_back(make_record(spec.ns, spec.scope, spec.package, spec.methods, spec.summary));
    for (const auto& t : spec.tasks) {
      CompletionTask task;
      task.id = fmt::format("toy-{:03}", ++n);
      task.code_before = t.before;
      task.code_middle = t.middle;
      if (!t.after.empty()) task.code_after = t.after;
      task.ground_truth = spec.ns;
      task.intent = t.clear ? Intent::clear : Intent::ambiguous;
      if (spec.scope != "global") task.extra = Json{{"scope", spec.scope}, {"package", spec.package}};
      out.tasks.push_back(std::move(task));
      const auto& id = out.tasks.back().id;
      responses.push_back(Json{{"purpose", "description"}, {"task_id", id}, {"text", "INTENT: " + t.goal}});
      responses.push_back(
          Json{{"purpose", "hypothetical"}, {"task_id", id}, {"text", "```javascript\n" + t.hypothetical + "\n```"}});
      responses.push_back(Json{{"purpose", "judge"}, {"task_id", id}, {"text", t.clear ? "Yes." : "No."}});
      responses.push_back(Json{{"purpose", "knowledge_check"}, {"task_id", id}, {"text", t.hypothetical}});
    }
  }
  out.corpus = Corpus(std::move(records));
  out.llm_responses = jsonl(responses);
  return out;
}

KnowledgeGraph kg_snapshot() {
  constexpr std::size_t kGlobal = 2516;
  constexpr std::size_t kNonGlobal = 1744;
  constexpr std::size_t kTwoPairs = 52;
  constexpr std::size_t kScopes = 80;
  std::vector<GraphTriple> triples;
  triples.reserve(kGlobal + kNonGlobal + kTwoPairs);
  for (std::size_t i = 0; i < kGlobal; ++i) {
    triples.push_back({fmt::format("com.glide.pkg{:02}", i % 40), "global", fmt::format("GlobalApi{:04}", i)});
  }
  for (std::size_t i = 0; i < kNonGlobal; ++i) {
    const auto scope = i % kScopes;
    const auto ns = fmt::format("ScopedApi{:04}", i);
    triples.push_back({fmt::format("com.x_app_{:02}", scope), fmt::format("x_app_{:02}", scope), ns});
    // Every 33rd namespace is also registered in a second application.
    if (i % 33 == 0 && i / 33 < kTwoPairs) {
      const auto other = (scope + 1) % kScopes;
      triples.push_back({fmt::format("com.x_app_{:02}", other), fmt::format("x_app_{:02}", other), ns});
    }
  }
  return KnowledgeGraph::from_triples(std::move(triples));
}

DecontaminationFixture decontamination() {
  constexpr std::size_t kLeaks = 30;
  constexpr std::size_t kNear = 12;
  constexpr std::size_t kClusters = 10;
  constexpr std::size_t kClusterSize = 3;
  constexpr std::size_t kTotal = 200;
  constexpr std::size_t kSingles = kTotal - kLeaks - kNear - kClusters * kClusterSize;

  WordMaker words(0xdc5eedULL);
  auto& rng = words.rng();
  auto line = [&] {
    return fmt::format("var {} = {}.{}({}, '{}');", words.next(), words.next(), words.next(), words.next(),
                       words.next());
  };
  struct Draft {
    SyntheticTriplet t;
    int kind = 0;  // 0 single, 1 leak, 2 near, 3+c cluster c
  };
  std::vector<Draft> drafts;
  auto base = [&](int kind) {
    Draft d;
    d.kind = kind;
    const auto target = capitalize(words.next()) + capitalize(words.next());
    std::vector<std::string> before;
    for (int i = 0; i < 6; ++i) before.push_back(line());
    d.t.target = target;
    d.t.code_middle = fmt::format("var {} = new {}().{}({});", words.next(), target, words.next(), words.next());
    d.t.code_after = line() + "\n" + line();
    for (const auto& l : before) d.t.code_before += l + "\n";
    d.t.code_before.pop_back();
    d.t.source = TripletSource::llm_generated;
    return d;
  };
  for (std::size_t i = 0; i < kSingles; ++i) drafts.push_back(base(0));
  for (std::size_t i = 0; i < kLeaks; ++i) {
    auto d = base(1);
    const auto stmt = fmt::format("var {} = new {}();", words.next(), d.t.target);
    if (i % 3 == 2) {
      d.t.code_after = stmt + "\n" + d.t.code_after;
    } else {
      d.t.code_before = stmt + "\n" + d.t.code_before;
    }
    drafts.push_back(std::move(d));
  }
  for (std::size_t i = 0; i < kNear; ++i) {
    auto d = base(2);
    auto lower = to_lower(d.t.target);
    // A snake_case or embedded spelling of the target, never the identifier itself.
    const auto split = d.t.target.find_first_of("ABCDEFGHIJKLMNOPQRSTUVWXYZ", 1);
    const auto mention = i % 2 == 0 ? lower.substr(0, split) + "_" + lower.substr(split)
                                    : "cached" + d.t.target + "List";
    const auto stmt = fmt::format("var {} = {}.{}();", mention, words.next(), words.next());
    if (i % 4 == 3) {
      d.t.code_after = stmt + "\n" + d.t.code_after;
    } else {
      d.t.code_before += "\n" + stmt;
    }
    drafts.push_back(std::move(d));
  }
  for (std::size_t c = 0; c < kClusters; ++c) {
    auto d = base(3 + static_cast<int>(c));
    drafts.push_back(d);
    // Variant 1: the same lines in another order.
    auto lines = split_lines(d.t.code_before);
    std::vector<std::string> owned(lines.begin(), lines.end());
    std::reverse(owned.begin(), owned.end());
    auto v1 = d;
    v1.t.code_before.clear();
    for (const auto& l : owned) v1.t.code_before += l + "\n";
    v1.t.code_before.pop_back();
    drafts.push_back(std::move(v1));
    // Variant 2: one argument renamed.
    auto v2 = d;
    const auto quote = v2.t.code_after.find('\'');
    const auto end = v2.t.code_after.find('\'', quote + 1);
    v2.t.code_after.replace(quote + 1, end - quote - 1, words.next());
    drafts.push_back(std::move(v2));
  }
  rng.shuffle(drafts);

  DecontaminationFixture out;
  std::map<int, std::vector<std::string>> clusters;
  for (std::size_t i = 0; i < drafts.size(); ++i) {
    auto& d = drafts[i];
    d.t.id = fmt::format("syn-{:03}", i);
    if (d.kind == 1) out.leaks.insert(d.t.id);
    if (d.kind == 2) out.near_mentions.insert(d.t.id);
    if (d.kind >= 3) clusters[d.kind].push_back(d.t.id);
    out.triplets.push_back(std::move(d.t));
  }
  for (auto& [kind, ids] : clusters) {
    std::sort(ids.begin(), ids.end());
    out.duplicate_clusters.push_back(ids);
  }
  std::sort(out.duplicate_clusters.begin(), out.duplicate_clusters.end());
  return out;
}

MiningFixture mining() {
  constexpr std::size_t kDistinct = 24;
  constexpr std::size_t kWrappers = 30;
  constexpr std::size_t kKept = 204;
  constexpr std::size_t kTied = 45;
  constexpr std::size_t kMissed = 36;

  WordMaker words(0x3171e5ULL);
  auto& rng = words.rng();
  MiningFixture out;
  std::vector<ScriptIncludeRecord> records;
  std::vector<std::vector<std::string>> vocab;
  std::vector<std::string> names;
  for (std::size_t i = 0; i < kDistinct; ++i) {
    std::vector<std::string> v;
    for (int k = 0; k < 12; ++k) v.push_back(words.next());
    const auto ns = capitalize(v[0]) + "Service";
    std::string summary = fmt::format("{} record helpers:", ns);
    for (const auto& w : v) summary += " " + w;
    records.push_back(make_record(ns, "global", "com.glide.mining", {{v[1], v[1] + "(record)", "Handles " + v[2] + "."}},
                                  summary + "."));
    vocab.push_back(std::move(v));
    names.push_back(ns);
  }
  // Near-identical legacy wrappers: identical documentation, so they tie.
  std::vector<std::string> wrapper_words;
  for (int k = 0; k < 8; ++k) wrapper_words.push_back(words.next());
  std::string wrapper_doc = "Legacy wrapper:";
  for (const auto& w : wrapper_words) wrapper_doc += " " + w;
  wrapper_doc += ".";
  for (std::size_t i = 0; i < kWrappers; ++i) {
    records.push_back(make_record(fmt::format("LegacyWrapper{:02}", i), "global", "com.glide.legacy",
                                  {{"call", "call(args)", std::nullopt}}, wrapper_doc));
  }
  out.corpus = Corpus(std::move(records));

  auto code_from = [&](const std::vector<std::string>& pool, std::size_t count) {
    std::string code;
    for (std::size_t k = 0; k < count; ++k) {
      code += fmt::format("var {} = {}({});\n", words.next(), pool[rng.below(pool.size())],
                          pool[rng.below(pool.size())]);
    }
    code.pop_back();
    return code;
  };
  std::vector<SyntheticTriplet> triplets;
  auto add = [&](const std::string& target, std::string before) {
    SyntheticTriplet t;
    t.code_before = std::move(before);
    t.code_middle = fmt::format("var result = new {}().run();", target);
    t.code_after = "gs.info(result);";
    t.target = target;
    triplets.push_back(std::move(t));
  };
  for (std::size_t i = 0; i < kKept; ++i) {
    const auto a = i % kDistinct;
    add(names[a], code_from(vocab[a], 4));
  }
  for (std::size_t i = 0; i < kTied; ++i) {
    add(fmt::format("LegacyWrapper{:02}", i % kWrappers), code_from(wrapper_words, 4));
  }
  for (std::size_t i = 0; i < kMissed; ++i) {
    add(names[i % kDistinct], code_from(wrapper_words, 4));
  }
  rng.shuffle(triplets);
  for (std::size_t i = 0; i < triplets.size(); ++i) triplets[i].id = fmt::format("mine-{:03}", i);
  out.triplets = std::move(triplets);
  return out;
}

std::map<std::string, std::string> fixture_files() {
  std::map<std::string, std::string> files;
  const auto toy = toy_benchmark();
  files["toy/corpus.jsonl"] = serialize_corpus(toy.corpus);
  files["toy/tasks.jsonl"] = serialize_tasks(toy.tasks);
  files["toy/llm_responses.jsonl"] = toy.llm_responses;

  files["kg/snapshot.json"] = graph_to_json(kg_snapshot()).dump() + "\n";

  const auto dc = decontamination();
  files["decontam/triplets.jsonl"] = serialize_triplets(dc.triplets);
  files["decontam/planted.json"] = Json{{"leaks", dc.leaks},
                                        {"near_mentions", dc.near_mentions},
                                        {"duplicate_clusters", dc.duplicate_clusters}}
                                       .dump(2) +
                                   "\n";

  const auto mf = mining();
  files["mining/corpus.jsonl"] = serialize_corpus(mf.corpus);
  files["mining/triplets.jsonl"] = serialize_triplets(mf.triplets);
  return files;
}

void write_fixtures(const std::filesystem::path& dir) {
  for (const auto& [rel, content] : fixture_files()) {
    const auto path = dir / rel;
    std::filesystem::create_directories(path.parent_path());
    write_file(path, content);
  }
}

}  // namespace dcs::fixtures
