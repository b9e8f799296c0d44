#include "doctest.h"

#include <set>

#include "dcs/datagen.hpp"
#include "dcs/fixtures.hpp"
#include "dcs/tokenizer.hpp"
#include "support.hpp"

using namespace dcs;

TEST_CASE("bundled data/ matches the generator byte for byte") {
  const auto files = fixtures::fixture_files();
  CHECK(files.size() == 8);
  for (const auto& [rel, content] : files) {
    CAPTURE(rel);
    const auto path = testing_support::source_dir() / "data" / rel;
    REQUIRE(std::filesystem::exists(path));
    CHECK(read_file(path) == content);
  }
}

TEST_CASE("generators are deterministic") {
  CHECK(fixtures::fixture_files() == fixtures::fixture_files());
}

TEST_CASE("toy benchmark shape") {
  const auto toy = fixtures::toy_benchmark();
  CHECK(toy.corpus.size() == 30);
  CHECK(toy.tasks.size() == 60);
  std::map<std::string, int> per_ns;
  for (const auto& t : toy.tasks) {
    ++per_ns[t.ground_truth];
    CHECK(toy.corpus.contains(t.ground_truth));
    CHECK_FALSE(contains_identifier(t.code_before, t.ground_truth));
  }
  for (const auto& [ns, n] : per_ns) CHECK(n == 2);
}

TEST_CASE("decontamination fixture labels are consistent") {
  const auto fx = fixtures::decontamination();
  std::set<std::string> ids;
  for (const auto& t : fx.triplets) ids.insert(t.id);
  CHECK(ids.size() == 200);
  std::size_t leaks = 0;
  for (const auto& t : fx.triplets) leaks += detect_leak(t) ? 1 : 0;
  CHECK(leaks == 30);
  CHECK(fx.leaks.size() == 30);
  CHECK(fx.near_mentions.size() == 12);
  CHECK(fx.duplicate_clusters.size() == 10);
  for (const auto& c : fx.duplicate_clusters) {
    CHECK(c.size() == 3);
    CHECK(std::is_sorted(c.begin(), c.end()));
  }
}

TEST_CASE("knowledge-graph snapshot counts") {
  const auto g = fixtures::kg_snapshot();
  CHECK(g.global_namespaces().size() == 2516);
  CHECK(g.non_global_namespaces().size() == 1744);
  std::size_t multi = 0;
  for (const auto& ns : g.non_global_namespaces()) multi += g.pair_count(ns) > 1 ? 1 : 0;
  CHECK(multi == 52);
}
