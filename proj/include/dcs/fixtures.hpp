#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "dcs/corpus.hpp"
#include "dcs/datagen.hpp"
#include "dcs/knowledge_graph.hpp"

// Deterministic generators for the bundled data/ directory. The same bytes
// come out on every platform: randomness goes through std::mt19937_64 with
// hand-rolled range reduction, never through std distributions.
namespace dcs::fixtures {

/// 30 namespaces, 60 tasks, canned mock-LLM answers for every task.
struct ToyBenchmark {
  Corpus corpus;
  std::vector<CompletionTask> tasks;
  std::string llm_responses;  // MockLlmClient JSONL
};
ToyBenchmark toy_benchmark();

/// Platform metadata shaped like a large instance: 2,516 global and 1,744
/// non-global namespaces, 52 of the latter registered under two pairs.
KnowledgeGraph kg_snapshot();

struct DecontaminationFixture {
  std::vector<SyntheticTriplet> triplets;
  std::set<std::string> leaks;
  std::set<std::string> near_mentions;
  std::vector<std::vector<std::string>> duplicate_clusters;  // each sorted, lowest id first
};
DecontaminationFixture decontamination();

struct MiningFixture {
  Corpus corpus;
  std::vector<SyntheticTriplet> triplets;
};
MiningFixture mining();

/// Relative path -> file content for everything under data/.
std::map<std::string, std::string> fixture_files();

/// Writes fixture_files() below `dir`.
void write_fixtures(const std::filesystem::path& dir);

}  // namespace dcs::fixtures
