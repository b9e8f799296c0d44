#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dcs/corpus.hpp"
#include "dcs/embedder.hpp"
#include "dcs/index.hpp"
#include "dcs/llm.hpp"
#include "dcs/query_enhance.hpp"

namespace dcs {

enum class TripletSource { llm_generated, imported };

struct SyntheticTriplet {
  std::string id;
  std::string code_before;
  std::string code_middle;
  std::string code_after;
  std::string target;
  TripletSource source = TripletSource::llm_generated;

  friend bool operator==(const SyntheticTriplet&, const SyntheticTriplet&) = default;
};

Json to_json(const SyntheticTriplet& t);
SyntheticTriplet triplet_from_json(const Json& j);
std::vector<SyntheticTriplet> parse_triplets(std::string_view jsonl, std::string_view source_name = "<triplets>");
std::string serialize_triplets(const std::vector<SyntheticTriplet>& triplets);

/// Target occurs as a whole identifier (case-insensitive) in code_before or
/// code_after. code_middle is the answer and never counts.
bool detect_leak(const SyntheticTriplet& triplet);

/// Looser "mentioned nearby" test over the last `radius` lines of code_before
/// and the first `radius` lines of code_after: after lowercasing and dropping
/// '_' and '$', the target appears inside some identifier ("array_util",
/// "arrayUtilHelper" both mention ArrayUtil).
bool near_mention(const SyntheticTriplet& triplet, std::size_t radius);

/// Order-insensitive token-set similarity in [0, 1] (the token_set_ratio
/// construction: sorted intersection vs. intersection plus each side's
/// remainder, compared with the LCS-based indel ratio; best of three). 0 when
/// either side is empty.
double token_set_ratio(const std::vector<std::string>& a, const std::vector<std::string>& b);

/// Indel similarity 2 * LCS / (|a| + |b|); 1.0 for two empty strings.
double indel_ratio(std::string_view a, std::string_view b);

std::size_t lcs_length(std::string_view a, std::string_view b);

struct DedupRemoval {
  std::string id;
  std::string representative;
};

/// Single-linkage clustering on token_set_ratio >= threshold over the
/// concatenated code fields; the lowest id of each cluster survives. Output
/// is sorted by id.
std::vector<SyntheticTriplet> fuzzy_dedup(const std::vector<SyntheticTriplet>& triplets, double threshold,
                                          std::vector<DedupRemoval>* removed = nullptr);

struct CleanConfig {
  std::size_t near_radius = 3;
  double dedup_threshold = 0.90;
};

struct CleanRemoval {
  std::string id;
  int pass = 0;
  std::string reason;
};

struct CleanReport {
  std::vector<SyntheticTriplet> kept;
  std::vector<CleanRemoval> removed;
  std::size_t input = 0;
  std::size_t after_leaks = 0;
  std::size_t after_near_mentions = 0;
  std::size_t after_dedup = 0;

  Json to_json() const;
};

/// Pass 1 drops leaks, pass 2 near-mentions, pass 3 fuzzy duplicates.
CleanReport clean_dataset(const std::vector<SyntheticTriplet>& triplets, const CleanConfig& cfg = {});

struct MiningConfig {
  std::size_t range_min = 2;  // 1-based candidate ranks eligible as negatives
  std::size_t range_max = 30;
  double margin = 0.05;
  std::size_t num_negatives = 5;
  TrimConfig trim;

  void validate() const;
  Json to_json() const;
};

struct HardNegativeSet {
  std::string anchor_id;
  std::string positive;
  double positive_score = 0.0;
  std::vector<ScoredNamespace> negatives;
};

struct MiningDiscard {
  std::string id;
  std::string reason;  // positive_not_retrieved | insufficient_negatives | empty_query
};

struct MiningResult {
  std::vector<HardNegativeSet> sets;
  std::vector<MiningDiscard> discarded;
};

/// Embeds each triplet's trimmed prefix and ranks the dense index. Negatives
/// come from ranks [range_min, range_max], exclude the positive, and score
/// below positive_score - margin; the best num_negatives are kept. Triplets
/// with fewer eligible negatives are discarded.
MiningResult mine_hard_negatives(const std::vector<SyntheticTriplet>& triplets, const DenseIndex& index,
                                 const Embedder& embedder, std::string_view instruction,
                                 const MiningConfig& cfg = {});

Json to_json(const HardNegativeSet& set, const MiningConfig& cfg);

enum class RewardLabel { positive, negative };

/// +1.0 when the first whitespace-delimited token, case-folded, starts with
/// "yes" for a positive label or "no" for a negative one; -1.0 otherwise.
double reward(std::string_view completion, RewardLabel label);

struct GenerationDiscard {
  std::string id;
  std::string reason;  // malformed | target_absent_from_middle | transport
};

struct GenerationResult {
  std::vector<SyntheticTriplet> triplets;
  std::vector<GenerationDiscard> discarded;
};

struct ParsedSections {
  std::string code_before;
  std::string code_middle;
  std::string code_after;
};

/// Finds the code_before / code_middle / code_after headings, each followed
/// by a fenced block. Missing sections give nullopt.
std::optional<ParsedSections> parse_triplet_response(std::string_view text);

/// Throws ContaminationError before any LLM call when a requested namespace
/// is in `excluded`.
GenerationResult generate_triplets(const std::vector<ScriptIncludeRecord>& records, const LlmClient& llm,
                                   std::size_t n_per_namespace, const std::set<std::string>& excluded,
                                   const PromptTemplates& prompts, double temperature = 0.7);

}  // namespace dcs
