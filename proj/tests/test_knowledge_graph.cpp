#include "doctest.h"

#include <cmath>
#include <map>
#include <set>

#include "dcs/error.hpp"
#include "dcs/fixtures.hpp"
#include "dcs/knowledge_graph.hpp"
#include "support.hpp"

using namespace dcs;

namespace {

KnowledgeGraph small_graph() {
  return KnowledgeGraph::from_triples({
      {"com.glide", "global", "ArrayUtil"},
      {"com.glide", "global", "JSUtil"},
      {"com.sn_itsm", "sn_itsm", "IncidentUtils"},
      {"com.sn_itsm", "sn_itsm", "SLAUtil"},
      {"com.sn_hr", "sn_hr_core", "HRCaseUtil"},
      {"com.sn_hr", "sn_hr_shared", "HRCaseUtil"},
  });
}

NamespaceSet all_of(const KnowledgeGraph& g) { return g.namespace_nodes(); }

}  // namespace

TEST_CASE("node sets and global classification") {
  const auto g = small_graph();
  CHECK(g.package_nodes().size() == 3);
  CHECK(g.scope_nodes().size() == 4);
  CHECK(g.namespace_nodes().size() == 5);
  CHECK(g.global_namespaces() == NamespaceSet{"ArrayUtil", "JSUtil"});
  CHECK(g.non_global_namespaces() == NamespaceSet{"HRCaseUtil", "IncidentUtils", "SLAUtil"});
  CHECK(g.pair_count("HRCaseUtil") == 2);
  CHECK(g.pair_count("ArrayUtil") == 1);
  CHECK(g.pair_count("Missing") == 0);
}

TEST_CASE("duplicate triples collapse") {
  const auto g = KnowledgeGraph::from_triples({{"p", "s", "A"}, {"p", "s", "A"}});
  CHECK(g.triples().size() == 1);
}

TEST_CASE("scope hint keeps matching namespaces plus globals") {
  const auto g = small_graph();
  ScopeContext ctx;
  ctx.scope_hint = "sn_itsm";
  CHECK(filter_candidates(g, ctx, all_of(g)) ==
        NamespaceSet{"ArrayUtil", "IncidentUtils", "JSUtil", "SLAUtil"});
  ctx.include_global = false;
  CHECK(filter_candidates(g, ctx, all_of(g)) == NamespaceSet{"IncidentUtils", "SLAUtil"});
}

TEST_CASE("package and scope hints intersect") {
  const auto g = small_graph();
  ScopeContext ctx;
  ctx.package_hint = "com.sn_hr";
  ctx.scope_hint = "sn_hr_shared";
  ctx.include_global = false;
  CHECK(filter_candidates(g, ctx, all_of(g)) == NamespaceSet{"HRCaseUtil"});
}

TEST_CASE("no hints with include_global false leaves every non-global") {
  const auto g = small_graph();
  ScopeContext ctx;
  ctx.include_global = false;
  CHECK(filter_candidates(g, ctx, all_of(g)) == g.non_global_namespaces());
}

TEST_CASE("result is intersected with the universe") {
  const auto g = small_graph();
  ScopeContext ctx;
  ctx.scope_hint = "sn_itsm";
  CHECK(filter_candidates(g, ctx, NamespaceSet{"SLAUtil", "Other"}) == NamespaceSet{"SLAUtil"});
}

TEST_CASE("unknown hint falls back to the universe") {
  const auto g = small_graph();
  ScopeContext ctx;
  ctx.scope_hint = "x_nowhere";
  FilterDiagnostics diag;
  CHECK(filter_candidates(g, ctx, all_of(g), &diag) == all_of(g));
  CHECK(diag.hint_matched_nothing);
}

TEST_CASE("stats on empty graph are zero") {
  const auto s = graph_stats(KnowledgeGraph{});
  CHECK(s.global_count == 0);
  CHECK(s.non_global_reduction_fraction == 0.0);
  CHECK(s.one_to_one_fraction == 0.0);
}

TEST_CASE("stats against a brute-force recount of the snapshot") {
  const auto g = fixtures::kg_snapshot();
  std::map<std::string, std::set<std::pair<std::string, std::string>>> pairs;
  std::set<std::string> global;
  for (const auto& t : g.triples()) {
    pairs[t.ns].insert({t.package, t.scope});
    if (t.scope == "global") global.insert(t.ns);
  }
  const double total = static_cast<double>(pairs.size());
  std::size_t non_global = 0;
  std::size_t one_to_one = 0;
  for (const auto& [ns, p] : pairs) {
    if (global.count(ns) != 0) continue;
    ++non_global;
    if (p.size() == 1) ++one_to_one;
  }
  const auto s = graph_stats(g);
  CHECK(s.global_count == global.size());
  CHECK(s.non_global_count == non_global);
  CHECK(s.non_global_reduction_fraction ==
        doctest::Approx(1.0 - static_cast<double>(non_global) / total).epsilon(1e-12));
  CHECK(s.one_to_one_fraction ==
        doctest::Approx(static_cast<double>(one_to_one) / static_cast<double>(non_global)).epsilon(1e-12));
}

TEST_CASE("json round trip and snapshot loading") {
  const auto g = small_graph();
  const auto back = graph_from_json(graph_to_json(g));
  CHECK(back.triples() == g.triples());
  testing_support::TempDir dir;
  write_file(dir / "g.json", graph_to_json(g).dump());
  CHECK(load_graph_snapshot(dir / "g.json").triples() == g.triples());
  CHECK_THROWS_AS(graph_from_json(Json::parse(R"J({"triples": 3})J")), DataError);
}

TEST_CASE("graph built from a corpus has one triple per record") {
  const auto toy = fixtures::toy_benchmark();
  const auto g = build_graph(toy.corpus);
  CHECK(g.triples().size() == toy.corpus.size());
  for (const auto& r : toy.corpus.records()) {
    CHECK(g.global_namespaces().count(r.ns) == (r.is_global ? 1u : 0u));
  }
  CHECK(build_graph(Corpus{}).triples().empty());
}
