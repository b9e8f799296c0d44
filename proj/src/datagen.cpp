#include "dcs/datagen.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <numeric>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "dcs/error.hpp"
#include "dcs/tokenizer.hpp"

namespace dcs {
namespace {

std::string squash(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    if (c == '_' || c == '$') continue;
    out += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
  }
  return out;
}

bool mentions(std::string_view line, std::string_view squashed_target) {
  for (auto ident : split_identifiers(line)) {
    if (squash(ident).find(squashed_target) != std::string::npos) return true;
  }
  return false;
}

std::string join_sorted(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

std::string concat_fields(const SyntheticTriplet& t) {
  return t.code_before + "\n" + t.code_middle + "\n" + t.code_after;
}

class DisjointSet {
 public:
  explicit DisjointSet(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  // The smaller root wins so every cluster is rooted at its lowest index.
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent_[b] = a;
  }

 private:
  std::vector<std::size_t> parent_;
};

std::string_view to_string(TripletSource s) {
  return s == TripletSource::llm_generated ? "llm_generated" : "imported";
}

}  // namespace

Json to_json(const SyntheticTriplet& t) {
  return Json{{"id", t.id},
              {"code_before", t.code_before},
              {"code_middle", t.code_middle},
              {"code_after", t.code_after},
              {"target", t.target},
              {"source", std::string(to_string(t.source))}};
}

SyntheticTriplet triplet_from_json(const Json& j) {
  SyntheticTriplet t;
  t.id = j.at("id").get<std::string>();
  if (t.id.empty()) throw DataError("triplet: empty id");
  t.code_before = j.value("code_before", "");
  t.code_middle = j.at("code_middle").get<std::string>();
  t.code_after = j.value("code_after", "");
  t.target = j.at("target").get<std::string>();
  const auto source = j.value("source", "imported");
  if (source == "llm_generated") {
    t.source = TripletSource::llm_generated;
  } else if (source == "imported") {
    t.source = TripletSource::imported;
  } else {
    throw DataError(fmt::format("triplet '{}': unknown source '{}'", t.id, source));
  }
  return t;
}

std::vector<SyntheticTriplet> parse_triplets(std::string_view jsonl, std::string_view source_name) {
  std::vector<SyntheticTriplet> out;
  std::size_t line_no = 0;
  for (auto line : split_lines(jsonl)) {
    ++line_no;
    if (is_blank(line)) continue;
    try {
      out.push_back(triplet_from_json(Json::parse(line)));
    } catch (const Json::exception& e) {
      throw DataError(fmt::format("{}:{}: {}", source_name, line_no, e.what()));
    } catch (const DataError& e) {
      throw DataError(fmt::format("{}:{}: {}", source_name, line_no, e.what()));
    }
  }
  return out;
}

std::string serialize_triplets(const std::vector<SyntheticTriplet>& triplets) {
  std::string out;
  for (const auto& t : triplets) out += to_json(t).dump() + "\n";
  return out;
}

bool detect_leak(const SyntheticTriplet& t) {
  return contains_identifier(t.code_before, t.target) || contains_identifier(t.code_after, t.target);
}

bool near_mention(const SyntheticTriplet& t, std::size_t radius) {
  const auto target = squash(t.target);
  if (target.empty()) return false;
  const auto before = split_lines(t.code_before);
  for (std::size_t i = before.size() - std::min(radius, before.size()); i < before.size(); ++i) {
    if (mentions(before[i], target)) return true;
  }
  const auto after = split_lines(t.code_after);
  for (std::size_t i = 0; i < std::min(radius, after.size()); ++i) {
    if (mentions(after[i], target)) return true;
  }
  return false;
}

std::size_t lcs_length(std::string_view a, std::string_view b) {
  if (a.size() < b.size()) std::swap(a, b);  // bit-vectors over the longer string
  if (b.empty()) return 0;
  const std::size_t words = (a.size() + 63) / 64;
  std::array<std::vector<std::uint64_t>, 256> peq;
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto& v = peq[static_cast<unsigned char>(a[i])];
    if (v.empty()) v.assign(words, 0);
    v[i / 64] |= std::uint64_t{1} << (i % 64);
  }
  std::vector<std::uint64_t> row(words, ~std::uint64_t{0});
  for (char ch : b) {
    const auto& match = peq[static_cast<unsigned char>(ch)];
    if (match.empty()) continue;
    std::uint64_t carry = 0;
    std::uint64_t borrow = 0;
    for (std::size_t w = 0; w < words; ++w) {
      const std::uint64_t v = row[w];
      const std::uint64_t u = v & match[w];
      const std::uint64_t sum = v + u;
      const std::uint64_t sum_c = sum + carry;
      carry = (sum < v) || (sum_c < sum) ? 1 : 0;
      const std::uint64_t diff = v - u;
      const std::uint64_t diff_b = diff - borrow;
      borrow = (v < u) || (diff < borrow) ? 1 : 0;
      row[w] = sum_c | diff_b;
    }
  }
  std::size_t zeros = 0;
  for (std::size_t w = 0; w < words; ++w) {
    std::uint64_t v = ~row[w];
    if (w == words - 1 && a.size() % 64 != 0) v &= (std::uint64_t{1} << (a.size() % 64)) - 1;
    zeros += static_cast<std::size_t>(std::popcount(v));
  }
  return zeros;
}

double indel_ratio(std::string_view a, std::string_view b) {
  if (a.empty() && b.empty()) return 1.0;
  return 2.0 * static_cast<double>(lcs_length(a, b)) / static_cast<double>(a.size() + b.size());
}

double token_set_ratio(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::string> sa(a.begin(), a.end());
  std::vector<std::string> sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  sa.erase(std::unique(sa.begin(), sa.end()), sa.end());
  std::sort(sb.begin(), sb.end());
  sb.erase(std::unique(sb.begin(), sb.end()), sb.end());
  if (sa.empty() || sb.empty()) return 0.0;

  std::vector<std::string> inter, only_a, only_b;
  std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(inter));
  std::set_difference(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(only_a));
  std::set_difference(sb.begin(), sb.end(), sa.begin(), sa.end(), std::back_inserter(only_b));
  if (!inter.empty() && (only_a.empty() || only_b.empty())) return 1.0;

  const auto t0 = join_sorted(inter);
  const auto da = join_sorted(only_a);
  const auto db = join_sorted(only_b);
  const auto t1 = t0.empty() ? da : t0 + " " + da;
  const auto t2 = t0.empty() ? db : t0 + " " + db;
  double best = 0.0;
  if (!t0.empty()) {
    // t0 is a prefix of t1 and t2, so LCS(t0, ti) = |t0|.
    best = std::max(2.0 * t0.size() / (t0.size() + t1.size()), 2.0 * t0.size() / (t0.size() + t2.size()));
  }
  // LCS(t1, t2) <= |t0| + 1 + min(|da|, |db|): skip the exact computation when
  // it cannot beat what we already have.
  const double bound = 2.0 * static_cast<double>(t0.size() + 1 + std::min(da.size(), db.size())) /
                       static_cast<double>(t1.size() + t2.size());
  if (bound > best) best = std::max(best, indel_ratio(t1, t2));
  return std::min(best, 1.0);
}

std::vector<SyntheticTriplet> fuzzy_dedup(const std::vector<SyntheticTriplet>& triplets, double threshold,
                                          std::vector<DedupRemoval>* removed) {
  if (!(threshold > 0.0 && threshold <= 1.0)) throw ConfigError("fuzzy_dedup: threshold must be in (0, 1]");
  std::vector<SyntheticTriplet> sorted = triplets;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto& a, const auto& b) { return a.id < b.id; });
  std::vector<std::vector<std::string>> tokens;
  tokens.reserve(sorted.size());
  for (const auto& t : sorted) {
    auto tok = tokenize(concat_fields(t));
    std::sort(tok.begin(), tok.end());
    tok.erase(std::unique(tok.begin(), tok.end()), tok.end());
    tokens.push_back(std::move(tok));
  }
  DisjointSet clusters(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    for (std::size_t j = i + 1; j < sorted.size(); ++j) {
      if (clusters.find(i) == clusters.find(j)) continue;
      if (token_set_ratio(tokens[i], tokens[j]) >= threshold) clusters.unite(i, j);
    }
  }
  std::vector<SyntheticTriplet> kept;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const auto root = clusters.find(i);
    if (root == i) {
      kept.push_back(sorted[i]);
    } else if (removed != nullptr) {
      removed->push_back({sorted[i].id, sorted[root].id});
    }
  }
  return kept;
}

Json CleanReport::to_json() const {
  Json removals = Json::array();
  for (const auto& r : removed) removals.push_back(Json{{"id", r.id}, {"pass", r.pass}, {"reason", r.reason}});
  return Json{{"kept", kept.size()},
              {"removed", std::move(removals)},
              {"counts",
               {{"input", input},
                {"after_leaks", after_leaks},
                {"after_near_mentions", after_near_mentions},
                {"after_dedup", after_dedup}}}};
}

CleanReport clean_dataset(const std::vector<SyntheticTriplet>& triplets, const CleanConfig& cfg) {
  CleanReport report;
  report.input = triplets.size();
  std::vector<SyntheticTriplet> pool;
  for (const auto& t : triplets) {
    if (detect_leak(t)) {
      report.removed.push_back({t.id, 1, "leak: target appears in code_before/code_after"});
    } else {
      pool.push_back(t);
    }
  }
  report.after_leaks = pool.size();

  std::vector<SyntheticTriplet> pool2;
  for (auto& t : pool) {
    if (near_mention(t, cfg.near_radius)) {
      report.removed.push_back({t.id, 2, fmt::format("near_mention: target mentioned within {} lines of the span",
                                                     cfg.near_radius)});
    } else {
      pool2.push_back(std::move(t));
    }
  }
  report.after_near_mentions = pool2.size();

  std::vector<DedupRemoval> dups;
  report.kept = fuzzy_dedup(pool2, cfg.dedup_threshold, &dups);
  for (const auto& d : dups) report.removed.push_back({d.id, 3, "near_duplicate_of:" + d.representative});
  report.after_dedup = report.kept.size();
  return report;
}

void MiningConfig::validate() const {
  if (range_min < 1 || range_max < range_min) throw ConfigError("mining: need 1 <= range_min <= range_max");
  if (margin < 0) throw ConfigError("mining: margin must be >= 0");
  if (num_negatives < 1) throw ConfigError("mining: num_negatives must be >= 1");
  trim.validate();
}

Json MiningConfig::to_json() const {
  return Json{{"range_min", range_min},
              {"range_max", range_max},
              {"margin", margin},
              {"num_negatives", num_negatives},
              {"trim_max_lines", trim.max_lines}};
}

MiningResult mine_hard_negatives(const std::vector<SyntheticTriplet>& triplets, const DenseIndex& index,
                                 const Embedder& embedder, std::string_view instruction,
                                 const MiningConfig& cfg) {
  cfg.validate();
  MiningResult result;
  for (const auto& t : triplets) {
    const auto query = trim_prefix(t.code_before, cfg.trim);
    if (is_blank(query)) {
      result.discarded.push_back({t.id, "empty_query"});
      continue;
    }
    const auto vectors = embedder.embed({query}, instruction);
    if (vectors.size() != 1) throw DataError("mining: embedder returned no query vector");
    const auto ranked = score_dense(index, vectors.front());
    const auto limit = std::min(cfg.range_max, ranked.size());
    std::optional<std::size_t> positive_at;
    for (std::size_t i = 0; i < limit; ++i) {
      if (ranked[i].ns == t.target) positive_at = i;
    }
    if (!positive_at) {
      result.discarded.push_back({t.id, "positive_not_retrieved"});
      continue;
    }
    HardNegativeSet set;
    set.anchor_id = t.id;
    set.positive = t.target;
    set.positive_score = ranked[*positive_at].score;
    for (std::size_t i = cfg.range_min - 1; i < limit && set.negatives.size() < cfg.num_negatives; ++i) {
      if (ranked[i].ns == t.target) continue;
      if (ranked[i].score < set.positive_score - cfg.margin) set.negatives.push_back(ranked[i]);
    }
    if (set.negatives.size() < cfg.num_negatives) {
      result.discarded.push_back({t.id, "insufficient_negatives"});
      continue;
    }
    result.sets.push_back(std::move(set));
  }
  return result;
}

Json to_json(const HardNegativeSet& set, const MiningConfig& cfg) {
  Json negatives = Json::array();
  for (const auto& n : set.negatives) negatives.push_back(Json{{"namespace", n.ns}, {"score", n.score}});
  return Json{{"anchor_id", set.anchor_id},
              {"positive", set.positive},
              {"positive_score", set.positive_score},
              {"negatives", std::move(negatives)},
              {"config", cfg.to_json()}};
}

double reward(std::string_view completion, RewardLabel label) {
  const auto trimmed = trim_whitespace(completion);
  const auto end = trimmed.find_first_of(" \t\r\n");
  const auto first = to_lower(std::string_view(trimmed).substr(0, end));
  if (label == RewardLabel::positive && first.starts_with("yes")) return 1.0;
  if (label == RewardLabel::negative && first.starts_with("no")) return 1.0;
  return -1.0;
}

std::optional<ParsedSections> parse_triplet_response(std::string_view text) {
  auto section = [&](std::string_view label) -> std::optional<std::string> {
    std::size_t from = 0;
    while (true) {
      const auto at = text.find(label, from);
      if (at == std::string_view::npos) return std::nullopt;
      from = at + label.size();
      // The label must sit on a heading line, not inside code.
      const auto line_start = text.rfind('\n', at);
      const auto head = text.substr(line_start == std::string_view::npos ? 0 : line_start + 1,
                                    at - (line_start == std::string_view::npos ? 0 : line_start + 1));
      if (head.find("```") != std::string_view::npos) continue;
      const auto open = text.find("```", from);
      if (open == std::string_view::npos) return std::nullopt;
      const auto body = text.find('\n', open);
      if (body == std::string_view::npos) return std::nullopt;
      const auto close = text.find("```", body + 1);
      if (close == std::string_view::npos) return std::nullopt;
      auto inner = text.substr(body + 1, close - body - 1);
      if (!inner.empty() && inner.back() == '\n') inner.remove_suffix(1);
      return std::string(inner);
    }
  };
  auto before = section("code_before");
  auto middle = section("code_middle");
  auto after = section("code_after");
  if (!before || !middle || !after || is_blank(*middle)) return std::nullopt;
  return ParsedSections{std::move(*before), std::move(*middle), std::move(*after)};
}

GenerationResult generate_triplets(const std::vector<ScriptIncludeRecord>& records, const LlmClient& llm,
                                   std::size_t n_per_namespace, const std::set<std::string>& excluded,
                                   const PromptTemplates& prompts, double temperature) {
  std::vector<std::string> contaminated;
  for (const auto& r : records) {
    if (excluded.contains(r.ns)) contaminated.push_back(r.ns);
  }
  if (!contaminated.empty()) {
    throw ContaminationError(fmt::format("contamination: namespaces reserved for evaluation: {}",
                                         fmt::join(contaminated, ", ")));
  }
  GenerationResult result;
  for (const auto& r : records) {
    for (std::size_t k = 0; k < n_per_namespace; ++k) {
      const auto id = fmt::format("{}#{}", r.ns, k);
      LlmRequest req;
      req.prompt = render_template(prompts.generate_prompt, {{"namespace", r.ns}, {"raw_code", r.raw_code}});
      req.max_tokens = 1024;
      req.temperature = temperature;
      req.purpose = "generate";
      req.task_id = id;
      std::string text;
      try {
        text = llm.complete(req);
      } catch (const TransportError& e) {
        spdlog::warn("generate: {} failed: {}", id, e.what());
        result.discarded.push_back({id, "transport"});
        continue;
      }
      auto parsed = parse_triplet_response(text);
      if (!parsed) {
        result.discarded.push_back({id, "malformed"});
        continue;
      }
      if (!contains_identifier(parsed->code_middle, r.ns)) {
        result.discarded.push_back({id, "target_absent_from_middle"});
        continue;
      }
      result.triplets.push_back({id, std::move(parsed->code_before), std::move(parsed->code_middle),
                                 std::move(parsed->code_after), r.ns, TripletSource::llm_generated});
    }
  }
  return result;
}

}  // namespace dcs
