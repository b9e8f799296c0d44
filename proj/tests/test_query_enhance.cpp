#include "doctest.h"

#include "dcs/error.hpp"
#include "dcs/query_enhance.hpp"
#include "support.hpp"

using namespace dcs;

namespace {

CompletionTask task_with(std::string before, std::optional<std::string> after = std::nullopt) {
  CompletionTask t;
  t.id = "t1";
  t.code_before = std::move(before);
  t.code_middle = "x();";
  t.code_after = std::move(after);
  t.ground_truth = "ArrayUtil";
  return t;
}

std::string numbered(int from, int to) {
  std::string s;
  for (int i = from; i <= to; ++i) s += "line" + std::to_string(i) + "\n";
  return s;
}

}  // namespace

TEST_CASE("trim keeps the last max_lines lines") {
  TrimConfig cfg{3, 1};
  CHECK(trim_prefix(numbered(1, 6), cfg) == "line4\nline5\nline6");
  CHECK(trim_prefix(numbered(1, 2), cfg) == "line1\nline2");
  CHECK(trim_prefix("", cfg).empty());
}

TEST_CASE("leading blank lines of the window are dropped") {
  TrimConfig cfg{4, 1};
  CHECK(trim_prefix("a\n\n  \nb\nc", cfg) == "b\nc");
}

TEST_CASE("the protected tail survives even when blank") {
  TrimConfig cfg{4, 2};
  CHECK(trim_prefix("a\nb\nc\n\n   ", cfg) == "b\nc\n\n   ");
  CHECK(trim_prefix("\n\n", TrimConfig{4, 2}) == "\n");
}

TEST_CASE("trim config validation") {
  CHECK_THROWS_AS(TrimConfig({3, 0}).validate(), ConfigError);
  CHECK_THROWS_AS(TrimConfig({3, 4}).validate(), ConfigError);
  CHECK_NOTHROW(TrimConfig({3, 3}).validate());
}

TEST_CASE("suffix trim keeps the head and drops trailing blanks") {
  TrimConfig cfg{3, 1};
  CHECK(trim_suffix("a\nb\n\nc\nd", cfg) == "a\nb");
  CHECK(trim_suffix("a\n\n", cfg) == "a");
}

TEST_CASE("fim formatting uses the sentinels") {
  const auto p = PromptTemplates::defaults();
  CHECK(format_fim("pre", "suf", p) == "<PRE>\npre\n<SUF>\nsuf");
}

TEST_CASE("prefix query") {
  const auto p = PromptTemplates::defaults();
  QueryOptions opts;
  const auto q = make_prefix_query(task_with("var a = 1;\nvar b = 2;", "done();"), opts, p);
  CHECK(q.strategy == QueryStrategy::prefix);
  CHECK(q.text == "var a = 1;\nvar b = 2;");
  CHECK_FALSE(q.fim);
  opts.fim = true;
  const auto f = make_prefix_query(task_with("var a = 1;", "done();"), opts, p);
  CHECK(f.fim);
  CHECK(f.text == "<PRE>\nvar a = 1;\n<SUF>\ndone();");
  // FIM silently does not apply without a suffix.
  CHECK_FALSE(make_prefix_query(task_with("var a = 1;"), opts, p).fim);
}

TEST_CASE("blank prefix is an empty-query data error") {
  const auto p = PromptTemplates::defaults();
  try {
    make_prefix_query(task_with("\n  \n"), {}, p);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()) == "task 't1': empty query");
  }
}

TEST_CASE("description query normalizes the intent line") {
  const auto p = PromptTemplates::defaults();
  MockLlmClient llm;
  llm.set("description", "t1", {"Sure.\nINTENT: merge two arrays\n", false});
  const auto q = make_description_query(task_with("var a = [];"), llm, {}, p);
  CHECK(q.text == "INTENT: merge two arrays");
  CHECK(q.llm_raw == std::optional<std::string>("Sure.\nINTENT: merge two arrays\n"));
  CHECK(normalize_intent("\n  find users \n") == "INTENT: find users");
  CHECK(normalize_intent("  ").empty());
}

TEST_CASE("description retries once then fails") {
  const auto p = PromptTemplates::defaults();
  MockLlmClient failing;
  failing.set("description", "t1", {"", true});
  CHECK_THROWS_AS(make_description_query(task_with("x"), failing, {}, p), TransportError);
  CHECK(failing.calls() == 2);
  MockLlmClient empty;
  empty.set("description", "t1", {"   ", false});
  CHECK_THROWS_AS(make_description_query(task_with("x"), empty, {}, p), DataError);
  CHECK(empty.calls() == 2);
}

TEST_CASE("hypothetical query appends the stripped completion") {
  const auto p = PromptTemplates::defaults();
  MockLlmClient llm;
  llm.set("hypothetical", "t1", {"Here:\n```javascript\nvar u = new ArrayUtil();\n```\n", false});
  const auto q = make_hypothetical_query(task_with("var a = [];"), llm, {}, p);
  CHECK(q.strategy == QueryStrategy::hypothetical);
  CHECK(q.text == "var a = [];\nvar u = new ArrayUtil();");
  CHECK_FALSE(q.downgraded);
}

TEST_CASE("empty hypothetical completion downgrades to prefix") {
  const auto p = PromptTemplates::defaults();
  MockLlmClient llm;
  llm.set("hypothetical", "t1", {"  \n", false});
  const auto q = make_hypothetical_query(task_with("var a = [];"), llm, {}, p);
  CHECK(q.downgraded);
  CHECK(q.strategy == QueryStrategy::prefix);
  CHECK(q.text == "var a = [];");
  CHECK(llm.calls() == 2);
  MockLlmClient fenced;
  fenced.set("hypothetical", "t1", {"```\n```", false});
  CHECK(make_hypothetical_query(task_with("var a = [];"), fenced, {}, p).downgraded);
}

TEST_CASE("make_query requires an llm for enhanced strategies") {
  const auto p = PromptTemplates::defaults();
  CHECK_THROWS_AS(make_query(task_with("x"), QueryStrategy::hypothetical, nullptr, {}, p), ConfigError);
  CHECK_NOTHROW(make_query(task_with("x"), QueryStrategy::prefix, nullptr, {}, p));
}

TEST_CASE("template rendering") {
  CHECK(render_template("a {x} b {y} {x}", {{"x", "1"}}) == "a 1 b {y} 1");
  CHECK(render_template("{unclosed", {{"unclosed", "z"}}) == "{unclosed");
}

TEST_CASE("code fences") {
  CHECK(strip_code_fences("  plain  ") == "plain");
  CHECK(strip_code_fences("```js\n  x();\n```") == "  x();");
  CHECK(strip_code_fences("```\nunterminated\n") == "unterminated");
}

TEST_CASE("strategy names") {
  CHECK(parse_strategy("hypothetical") == QueryStrategy::hypothetical);
  CHECK(to_string(QueryStrategy::description) == "description");
  CHECK_FALSE(parse_strategy("hyde").has_value());
}

TEST_CASE("prompts file overrides selected keys") {
  testing_support::TempDir dir;
  write_file(dir / "p.toml", "fim_pre_sentinel = \"<|fim_prefix|>\"\ndescription_prompt = '''\nD {code}\n'''\n");
  const auto p = load_prompts(dir / "p.toml");
  CHECK(p.fim_pre_sentinel == "<|fim_prefix|>");
  CHECK(p.description_prompt == "D {code}\n");
  CHECK(p.embed_instruction == PromptTemplates::defaults().embed_instruction);
  write_file(dir / "bad.toml", "fim_pre_sentinel = 3\n");
  CHECK_THROWS_AS(load_prompts(dir / "bad.toml"), ConfigError);
}
