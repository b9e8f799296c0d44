#include "doctest.h"

#include "dcs/error.hpp"
#include "dcs/retrieval.hpp"
#include "dcs/tokenizer.hpp"
#include "toy_env.hpp"

using namespace dcs;
using testing_support::ToyEnv;

namespace {

const ToyEnv& env() {
  static const ToyEnv e;
  return e;
}

}  // namespace

TEST_CASE("nested-loop prefix query ranks ArrayUtil first") {
  Pipeline p(env().services());
  PipelineConfig cfg;
  const auto r = p.retrieve(env().task("toy-001"), cfg);
  REQUIRE_FALSE(r.candidates.empty());
  CHECK(r.candidates[0].ns == "ArrayUtil");
  CHECK(r.ground_truth_rank == std::optional<std::size_t>(1));
}

TEST_CASE("candidates are ranked 1..n without gaps and scores are non-increasing") {
  Pipeline p(env().services());
  for (auto stage : {FirstStage::dense, FirstStage::bm25}) {
    PipelineConfig cfg;
    cfg.first_stage = stage;
    for (const auto& t : env().toy.tasks) {
      const auto r = p.retrieve(t, cfg);
      for (std::size_t i = 0; i < r.candidates.size(); ++i) {
        CHECK(r.candidates[i].rank == i + 1);
        if (i > 0) CHECK(r.candidates[i - 1].score >= r.candidates[i].score);
      }
    }
  }
}

TEST_CASE("dense candidates match a direct scoring of the query text") {
  Pipeline p(env().services());
  const auto& t = env().task("toy-010");
  const auto r = p.retrieve(t, {});
  const auto q = env().embedder.embed({r.query_text}, "");
  const auto direct = score_dense(*env().index.dense, q[0]);
  REQUIRE(r.candidates.size() == std::min<std::size_t>(40, direct.size()));
  for (std::size_t i = 0; i < r.candidates.size(); ++i) CHECK(r.candidates[i].ns == direct[i].ns);
}

TEST_CASE("top-k lists are prefixes of each other") {
  Pipeline p(env().services());
  for (const auto& t : env().toy.tasks) {
    PipelineConfig big;
    big.k_retrieve = 20;
    PipelineConfig small;
    small.k_retrieve = 5;
    const auto a = p.retrieve(t, big);
    const auto b = p.retrieve(t, small);
    REQUIRE(b.candidates.size() <= a.candidates.size());
    for (std::size_t i = 0; i < b.candidates.size(); ++i) CHECK(a.candidates[i].ns == b.candidates[i].ns);
  }
}

TEST_CASE("knowledge-graph filter restricts the universe") {
  Pipeline p(env().services());
  PipelineConfig cfg;
  cfg.use_kg_filter = true;
  cfg.scope_context = ScopeContext{std::nullopt, std::string("sn_itsm"), false};
  const auto r = p.retrieve(env().task("toy-001"), cfg);
  CHECK_FALSE(r.candidates.empty());
  for (const auto& c : r.candidates) {
    const auto* rec = env().toy.corpus.find(c.ns);
    REQUIRE(rec != nullptr);
    CHECK(rec->scope == "sn_itsm");
  }
  CHECK_FALSE(r.ground_truth_rank.has_value());
}

TEST_CASE("task metadata supplies scope hints when none are configured") {
  CompletionTask t = env().task("toy-001");
  t.extra["scope"] = "sn_hr_core";
  CHECK(task_scope_context(t)->scope_hint == std::optional<std::string>("sn_hr_core"));
  CHECK_FALSE(task_scope_context(env().task("toy-001")).has_value());
}

TEST_CASE("bm25 first stage scores the tokenized query") {
  Pipeline p(env().services());
  PipelineConfig cfg;
  cfg.first_stage = FirstStage::bm25;
  const auto r = p.retrieve(env().task("toy-001"), cfg);
  for (const auto& c : r.candidates) CHECK(c.stage == CandidateStage::bm25);
  const auto direct = score_bm25(*env().index.bm25, tokenize(r.query_text));
  REQUIRE_FALSE(direct.empty());
  CHECK(r.candidates[0].ns == direct[0].ns);
}

TEST_CASE("stage latencies are recorded") {
  Pipeline p(env().services());
  const auto r = p.retrieve(env().task("toy-002"), {});
  for (const char* s : {"query_build", "filter", "first_stage", "total"}) {
    REQUIRE(r.stage_latencies.count(s) == 1);
    CHECK(r.stage_latencies.at(s) >= 0.0);
  }
}

TEST_CASE("errors carry the task id and kind") {
  Pipeline p(env().services(false));
  PipelineConfig cfg;
  cfg.strategy = QueryStrategy::hypothetical;
  try {
    p.retrieve(env().task("toy-003"), cfg);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("task 'toy-003'") != std::string::npos);
  }
  CompletionTask blank = env().task("toy-003");
  blank.code_before = "   ";
  CHECK_THROWS_AS(p.retrieve(blank, {}), DataError);
  PipelineConfig zero;
  zero.k_retrieve = 0;
  CHECK_THROWS_AS(p.retrieve(env().task("toy-003"), zero), ConfigError);
}

TEST_CASE("batch retrieval is order-preserving and parallelism-independent") {
  Pipeline p(env().services());
  PipelineConfig cfg;
  cfg.strategy = QueryStrategy::hypothetical;
  auto tasks = env().toy.tasks;
  tasks[5].code_before = "";
  const auto one = retrieve_batch(p, tasks, cfg, 1);
  const auto many = retrieve_batch(p, tasks, cfg, 8);
  REQUIRE(one.results.size() == tasks.size() - 1);
  REQUIRE(one.failures.size() == 1);
  CHECK(one.failures[0].task_id == tasks[5].id);
  CHECK(one.failures[0].kind == ErrorKind::data);
  REQUIRE(many.results.size() == one.results.size());
  for (std::size_t i = 0; i < one.results.size(); ++i) {
    CHECK(one.results[i].task_id == many.results[i].task_id);
    CHECK(one.results[i].candidates == many.results[i].candidates);
  }
}

TEST_CASE("ranked list json") {
  Pipeline p(env().services());
  const auto r = p.retrieve(env().task("toy-001"), {});
  const auto j = to_json(r, false);
  CHECK(j.at("task_id") == "toy-001");
  CHECK(j.at("ground_truth_rank") == 1);
  CHECK(j.at("candidates").at(0).at("namespace") == "ArrayUtil");
  CHECK_FALSE(j.contains("stage_latencies_ms"));
  CHECK(to_json(r).contains("stage_latencies_ms"));
}

TEST_CASE("pipeline needs an index") {
  CHECK_THROWS_AS(Pipeline(PipelineServices{}), ConfigError);
}
