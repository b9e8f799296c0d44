#include "doctest.h"

#include "dcs/corpus.hpp"
#include "dcs/error.hpp"
#include "dcs/fixtures.hpp"
#include "support.hpp"

using namespace dcs;

namespace {

const char* kTwo =
    R"J({"namespace":"ArrayUtil","scope":"global","package":"com.glide","methods":[{"name":"contains","signature":"contains(array, element)","jsdoc":"Checks membership."}],"raw_code":"var ArrayUtil = Class.create();","jsdoc_summary":"Array helpers.","owner":"platform"})J"
    "\n"
    R"J({"namespace":"HRCaseUtil","scope":"sn_hr_core","package":"com.sn_hr_core","methods":[],"raw_code":"var HRCaseUtil = Class.create();"})J"
    "\n";

}  // namespace

TEST_CASE("corpus parses, classifies scope and preserves unknown keys") {
  const auto corpus = parse_corpus(kTwo);
  REQUIRE(corpus.size() == 2);
  const auto* a = corpus.find("ArrayUtil");
  REQUIRE(a != nullptr);
  CHECK(a->is_global);
  CHECK(a->extra.at("owner") == "platform");
  CHECK(a->methods.at(0).jsdoc == std::optional<std::string>("Checks membership."));
  CHECK(a->raw_token_count > 0);
  const auto* h = corpus.find("HRCaseUtil");
  REQUIRE(h != nullptr);
  CHECK_FALSE(h->is_global);
  CHECK_FALSE(h->jsdoc_summary.has_value());
  CHECK(h->jsdoc_token_count == 0);
}

TEST_CASE("serialize round-trips") {
  const auto corpus = parse_corpus(kTwo);
  CHECK(parse_corpus(serialize_corpus(corpus)) == corpus);
  const auto toy = fixtures::toy_benchmark();
  CHECK(parse_corpus(serialize_corpus(toy.corpus)) == toy.corpus);
  CHECK(parse_tasks(serialize_tasks(toy.tasks), &toy.corpus) == toy.tasks);
}

TEST_CASE("custom global scope name") {
  CorpusOptions opts;
  opts.global_scope = "sn_hr_core";
  const auto corpus = parse_corpus(kTwo, opts);
  CHECK(corpus.find("HRCaseUtil")->is_global);
  CHECK_FALSE(corpus.find("ArrayUtil")->is_global);
}

TEST_CASE("duplicate namespace is a data error with a line number") {
  std::string doubled = std::string(kTwo) + R"J({"namespace":"ArrayUtil","scope":"global","package":"p","methods":[],"raw_code":"x"})J" "\n";
  try {
    parse_corpus(doubled, {}, "c.jsonl");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("c.jsonl:3") != std::string::npos);
  }
}

TEST_CASE("malformed rows are rejected") {
  CHECK_THROWS_AS(parse_corpus("{not json}\n"), DataError);
  CHECK_THROWS_AS(parse_corpus(R"J({"scope":"global"})J" "\n"), DataError);
  CHECK_THROWS_AS(Corpus(std::vector<ScriptIncludeRecord>{ScriptIncludeRecord{}}), DataError);
  CHECK_THROWS_AS(load_corpus("/nonexistent/corpus.jsonl"), Error);
}

TEST_CASE("tasks validate ground truth against the corpus") {
  const auto corpus = parse_corpus(kTwo);
  const std::string ok =
      R"J({"id":"t1","code_before":"var a = [];","code_middle":"new ArrayUtil()","ground_truth":"ArrayUtil","intent":"clear"})J" "\n";
  const auto tasks = parse_tasks(ok, &corpus);
  REQUIRE(tasks.size() == 1);
  CHECK(tasks[0].intent == Intent::clear);
  CHECK_FALSE(tasks[0].fim_capable());
  const std::string unknown =
      R"J({"id":"t1","code_before":"x","code_middle":"y","ground_truth":"Nope"})J" "\n";
  CHECK_THROWS_AS(parse_tasks(unknown, &corpus), DataError);
  CHECK_NOTHROW(parse_tasks(unknown, nullptr));
  const std::string dup = ok + ok;
  CHECK_THROWS_AS(parse_tasks(dup, &corpus), DataError);
}

TEST_CASE("intent strings") {
  CHECK(parse_intent("ambiguous") == Intent::ambiguous);
  CHECK(to_string(Intent::clear) == "clear");
  CHECK_FALSE(parse_intent("maybe").has_value());
}

TEST_CASE("corpus stats") {
  const auto corpus = parse_corpus(kTwo);
  const auto stats = corpus_stats(corpus);
  CHECK(stats.namespace_count == 2);
  CHECK(stats.api_count == 1);
  CHECK(stats.raw_tokens.min <= stats.raw_tokens.max);
  CHECK(stats.jsdoc_tokens.max == corpus.find("ArrayUtil")->jsdoc_token_count);
  CHECK_THROWS_AS(corpus_stats(Corpus{}), DataError);
}

TEST_CASE("file round trip") {
  testing_support::TempDir dir;
  const auto corpus = parse_corpus(kTwo);
  write_file(dir / "c.jsonl", serialize_corpus(corpus));
  CHECK(load_corpus(dir / "c.jsonl") == corpus);
}
