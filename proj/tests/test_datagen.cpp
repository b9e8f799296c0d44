#include "doctest.h"

#include <random>
#include <set>

#include "dcs/datagen.hpp"
#include "dcs/error.hpp"
#include "dcs/fixtures.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace dcs;

namespace {

SyntheticTriplet triplet(std::string id, std::string before, std::string middle, std::string after,
                         std::string target) {
  return {std::move(id), std::move(before), std::move(middle), std::move(after), std::move(target),
          TripletSource::llm_generated};
}

std::vector<std::string> words(std::initializer_list<const char*> w) { return {w.begin(), w.end()}; }

}  // namespace

TEST_CASE("leak detection ignores the middle") {
  CHECK(detect_leak(triplet("a", "var u = new ArrayUtil();", "u.x()", "", "ArrayUtil")));
  CHECK(detect_leak(triplet("a", "", "x", "arrayutil.go()", "ArrayUtil")));
  CHECK_FALSE(detect_leak(triplet("a", "var arr = [];", "new ArrayUtil()", "done();", "ArrayUtil")));
  CHECK_FALSE(detect_leak(triplet("a", "var array_util = 1;", "x", "", "ArrayUtil")));
}

TEST_CASE("near mention is looser and windowed") {
  const auto t = triplet("a", "var array_util = 1;\nx();\ny();\nz();", "m", "", "ArrayUtil");
  CHECK_FALSE(near_mention(t, 3));
  CHECK(near_mention(t, 4));
  CHECK(near_mention(triplet("a", "", "m", "var arrayUtilHelper;", "ArrayUtil"), 1));
  CHECK(near_mention(triplet("a", "$array$util", "m", "", "ArrayUtil"), 1));
  CHECK_FALSE(near_mention(triplet("a", "var arr;", "m", "var util;", "ArrayUtil"), 3));
}

TEST_CASE("lcs matches the dynamic-programming oracle") {
  std::mt19937_64 rng(5);
  const std::string alphabet = "abcde ";
  for (int trial = 0; trial < 300; ++trial) {
    std::string a;
    std::string b;
    const auto la = testing_support::uniform(rng, 0, 150);
    const auto lb = testing_support::uniform(rng, 0, 150);
    for (std::size_t i = 0; i < la; ++i) a += alphabet[testing_support::uniform(rng, 0, alphabet.size() - 1)];
    for (std::size_t i = 0; i < lb; ++i) b += alphabet[testing_support::uniform(rng, 0, alphabet.size() - 1)];
    CHECK(lcs_length(a, b) == oracle::lcs(a, b));
  }
}

TEST_CASE("indel ratio") {
  CHECK(indel_ratio("", "") == 1.0);
  CHECK(indel_ratio("abc", "") == 0.0);
  CHECK(indel_ratio("abcd", "abce") == doctest::Approx(0.75));
}

TEST_CASE("token set ratio") {
  CHECK(token_set_ratio(words({"a", "b", "c"}), words({"c", "b", "a"})) == 1.0);
  CHECK(token_set_ratio(words({"var", "x"}), words({"var", "x", "extra"})) == 1.0);
  CHECK(token_set_ratio({}, {}) == 0.0);
  CHECK(token_set_ratio(words({"alpha"}), words({"omega"})) < 0.5);
  const double r = token_set_ratio(words({"glide", "record", "query"}), words({"glide", "record", "insert"}));
  CHECK(r > 0.5);
  CHECK(r < 1.0);
}

TEST_CASE("fuzzy dedup keeps the lowest id of a cluster") {
  std::vector<SyntheticTriplet> ts = {
      triplet("c", "var gr = new GlideRecord('incident');", "gr.query();", "", "X"),
      triplet("a", "var gr = new GlideRecord('incident');", "gr.query();", "", "X"),
      triplet("b", "totally different content here", "nothing();", "", "Y"),
  };
  std::vector<DedupRemoval> removed;
  const auto kept = fuzzy_dedup(ts, 0.9, &removed);
  REQUIRE(kept.size() == 2);
  CHECK(kept[0].id == "a");
  CHECK(kept[1].id == "b");
  REQUIRE(removed.size() == 1);
  CHECK(removed[0].id == "c");
  CHECK(removed[0].representative == "a");
}

TEST_CASE("decontamination fixture: planted leaks, near mentions and clusters") {
  const auto fx = fixtures::decontamination();
  REQUIRE(fx.triplets.size() == 200);
  const auto report = clean_dataset(fx.triplets);
  std::set<std::string> pass1;
  std::set<std::string> pass2;
  std::set<std::string> pass3;
  for (const auto& r : report.removed) {
    (r.pass == 1 ? pass1 : r.pass == 2 ? pass2 : pass3).insert(r.id);
  }
  CHECK(pass1 == fx.leaks);
  CHECK(pass2 == fx.near_mentions);
  std::set<std::string> expected3;
  for (const auto& c : fx.duplicate_clusters) expected3.insert(c.begin() + 1, c.end());
  CHECK(pass3 == expected3);
  CHECK(report.input == 200);
  CHECK(report.after_leaks == 170);
  CHECK(report.after_near_mentions == 158);
  CHECK(report.after_dedup == 138);
  for (const auto& t : report.kept) CHECK_FALSE(detect_leak(t));
  const auto again = clean_dataset(fx.triplets);
  CHECK(again.to_json() == report.to_json());
}

TEST_CASE("triplet json round trip and validation") {
  const auto fx = fixtures::decontamination();
  const auto text = serialize_triplets(fx.triplets);
  CHECK(parse_triplets(text) == fx.triplets);
  CHECK_THROWS_AS(parse_triplets("{\"id\":\"x\"}\n", "t.jsonl"), DataError);
}

TEST_CASE("reward truth table") {
  for (const auto& [completion, expected] : oracle::reward_table()) {
    CAPTURE(completion);
    CHECK(reward(completion, RewardLabel::positive) == expected.first);
    CHECK(reward(completion, RewardLabel::negative) == expected.second);
  }
}

TEST_CASE("mining funnel on the bundled fixture") {
  const auto fx = fixtures::mining();
  REQUIRE(fx.triplets.size() == 285);
  MockEmbedder embedder;
  const auto dense = build_dense(build_documents(fx.corpus, DocumentSource::jsdoc), embedder);
  const MiningConfig cfg;
  const auto r = mine_hard_negatives(fx.triplets, dense, embedder, "", cfg);
  CHECK(r.sets.size() == 204);
  CHECK(r.discarded.size() == 81);
  for (const auto& s : r.sets) {
    CHECK(s.negatives.size() == cfg.num_negatives);
    for (const auto& n : s.negatives) {
      CHECK(n.ns != s.positive);
      CHECK(n.score < s.positive_score - cfg.margin);
    }
  }
  const auto j = to_json(r.sets.front(), cfg);
  CHECK(j.at("negatives").size() == cfg.num_negatives);
  CHECK(j.at("config").at("margin") == cfg.margin);
}

TEST_CASE("mining config validation") {
  MiningConfig cfg;
  cfg.range_min = 0;
  CHECK_THROWS(cfg.validate());
  cfg.range_min = 10;
  cfg.range_max = 5;
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("triplet response parsing") {
  const std::string ok =
      "### code_before\n```javascript\nvar a = 1;\n```\n"
      "### code_middle\n```javascript\nnew ArrayUtil().contains(a, 1);\n```\n"
      "### code_after\n```javascript\ndone();\n```\n";
  const auto p = parse_triplet_response(ok);
  REQUIRE(p.has_value());
  CHECK(p->code_before == "var a = 1;");
  CHECK(p->code_middle == "new ArrayUtil().contains(a, 1);");
  CHECK(p->code_after == "done();");
  CHECK_FALSE(parse_triplet_response("### code_before\n```\nx\n```\n").has_value());
  CHECK_FALSE(parse_triplet_response("nothing here").has_value());
}

TEST_CASE("generation respects reserved namespaces and validates output") {
  const auto toy = fixtures::toy_benchmark();
  const auto* array_util = toy.corpus.find("ArrayUtil");
  const auto* differ = toy.corpus.find("Differ");
  MockLlmClient llm;
  llm.set("generate", "ArrayUtil#0",
          {"### code_before\n```\nvar a = [];\n```\n### code_middle\n```\nnew ArrayUtil().unique(a);\n```\n"
           "### code_after\n```\nreturn a;\n```\n",
           false});
  llm.set("generate", "ArrayUtil#1",
          {"### code_before\n```\nvar a = [];\n```\n### code_middle\n```\na.sort();\n```\n"
           "### code_after\n```\n```\n",
           false});
  llm.set("generate", "ArrayUtil#2", {"garbage", false});
  llm.set("generate", "ArrayUtil#3", {"", true});
  const auto prompts = PromptTemplates::defaults();
  CHECK_THROWS_AS(generate_triplets({*array_util, *differ}, llm, 4, {"Differ"}, prompts), ContaminationError);
  CHECK(llm.calls() == 0);
  const auto r = generate_triplets({*array_util}, llm, 4, {}, prompts);
  REQUIRE(r.triplets.size() == 1);
  CHECK(r.triplets[0].id == "ArrayUtil#0");
  CHECK(r.triplets[0].target == "ArrayUtil");
  std::map<std::string, std::string> reasons;
  for (const auto& d : r.discarded) reasons[d.id] = d.reason;
  CHECK(reasons.at("ArrayUtil#1") == "target_absent_from_middle");
  CHECK(reasons.at("ArrayUtil#2") == "malformed");
  CHECK(reasons.at("ArrayUtil#3") == "transport");
}
