// Figures and prompt strings checked against the published write-up kept at
// the repository root.

#include "doctest.h"

#include "dcs/eval.hpp"
#include "dcs/fixtures.hpp"
#include "dcs/knowledge_graph.hpp"
#include "dcs/query_enhance.hpp"
#include "dcs/rerank.hpp"
#include "support.hpp"

using namespace dcs;

namespace {

const std::string& source_text() {
  static const std::string text = read_file(testing_support::source_dir() / "paper.md");
  return text;
}

bool mentions(std::string_view needle) { return source_text().find(needle) != std::string::npos; }

/// Body of the first listing that follows `anchor`.
std::string listing_after(std::string_view anchor) {
  const auto& t = source_text();
  const auto a = t.find(anchor);
  REQUIRE(a != std::string::npos);
  const auto open = t.find("\\begin{lstlisting}", a);
  const auto body = t.find('\n', open) + 1;
  const auto close = t.find("\\end{lstlisting}", body);
  auto s = t.substr(body, close - body);
  while (!s.empty() && s.back() == '\n') s.pop_back();
  return s;
}

}  // namespace

TEST_CASE("namespace counts of the metadata snapshot") {
  CHECK(mentions("2,516 global"));
  CHECK(mentions("1,744 non-global"));
  const auto g = fixtures::kg_snapshot();
  CHECK(g.global_namespaces().size() == 2516);
  CHECK(g.non_global_namespaces().size() == 1744);
  const auto s = graph_stats(g);
  CHECK(s.non_global_reduction_fraction == doctest::Approx(0.59).epsilon(0.01));
  CHECK(mentions("59\\%"));
  CHECK(mentions("Approximately 97\\% of non-global"));
  CHECK(s.one_to_one_fraction == doctest::Approx(0.97).epsilon(0.005 / 0.97));
}

TEST_CASE("cleaning and mining figures") {
  CHECK(mentions("removed 30 samples"));
  CHECK(mentions("kept 204 samples"));
  CHECK(mentions("remaining 81 lacked"));
  CHECK(fixtures::decontamination().leaks.size() == 30);
}

TEST_CASE("prefix trim reproduces the worked example") {
  const auto toy = fixtures::toy_benchmark();
  const auto& task = toy.tasks.front();
  REQUIRE(task.id == "toy-001");
  CHECK(trim_prefix(task.code_before, TrimConfig{}) == listing_after("Technique 1: Prefix Code Embed"));
}

TEST_CASE("embedding instruction is verbatim") {
  const auto p = PromptTemplates::defaults();
  CHECK(mentions("Given the code, find APIs based on their JSDoc that this code might need to complete its "
                 "intended purpose."));
  CHECK(p.embed_instruction.find("Instruct: Given the code, find APIs based on their JSDoc that this code might "
                                 "need to complete its intended purpose.") == 0);
}

TEST_CASE("reranker scaffold is verbatim") {
  const auto t = RerankTemplate::defaults();
  CHECK(mentions("Judge whether the Document meets the requirements based on the Query and the Instruct provided."));
  CHECK(t.prefix == "Judge whether the Document meets the requirements based on the Query and the Instruct "
                    "provided. Answer \"yes\" or \"no\".");
  CHECK(t.instruction ==
        "Using the API's JSDoc, decide whether this API is directly useful for the caller-code to complete its "
        "intended task.");
  CHECK(mentions("decide whether this API is directly useful for the caller-code"));
  CHECK(t.suffix == "<|im_end|>\n<|im_start|>assistant\n<think>\n\n</think>\n\n");
}

TEST_CASE("judge prompts are verbatim") {
  CHECK(mentions("ServiceNow code-completion judge"));
  CHECK(std::string(kJudgeSystemPrompt).starts_with("Role  : ServiceNow code-completion judge\n"));
  CHECK(std::string(kJudgeSystemPrompt).ends_with("Output only \"Yes.\" if it fits, otherwise \"No.\" (no extra text)."));
  CHECK(mentions("Does this namespace fit the code's intent?"));
  CHECK(judge_user_prompt("{code}", "{namespace}", "{api_description}") ==
        "### CODE:\n{code}\n\n### NAMESPACE:\n{namespace}\n\n### API DESCRIPTIONS (Context):\n{api_description}"
        "\n\nDoes this namespace fit the code's intent?");
}
