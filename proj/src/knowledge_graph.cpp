#include "dcs/knowledge_graph.hpp"

#include <algorithm>

#include <spdlog/spdlog.h>

#include "dcs/error.hpp"

namespace dcs {

KnowledgeGraph KnowledgeGraph::from_triples(std::vector<GraphTriple> triples,
                                            std::string global_scope) {
  KnowledgeGraph g;
  g.global_scope_ = std::move(global_scope);
  std::sort(triples.begin(), triples.end());
  triples.erase(std::unique(triples.begin(), triples.end()), triples.end());
  g.triples_ = std::move(triples);
  for (const auto& t : g.triples_) {
    g.packages_.insert(t.package);
    g.scopes_.insert(t.scope);
    g.namespaces_.insert(t.ns);
    ++g.pairs_[t.ns];
    if (t.scope == g.global_scope_) g.global_.insert(t.ns);
  }
  for (const auto& ns : g.namespaces_) {
    if (!g.global_.contains(ns)) g.non_global_.insert(ns);
  }
  return g;
}

std::size_t KnowledgeGraph::pair_count(std::string_view ns) const {
  const auto it = pairs_.find(ns);
  return it == pairs_.end() ? 0 : it->second;
}

KnowledgeGraph build_graph(const Corpus& corpus, const std::string& global_scope) {
  std::vector<GraphTriple> triples;
  triples.reserve(corpus.size());
  for (const auto& r : corpus.records()) triples.push_back({r.package, r.scope, r.ns});
  return KnowledgeGraph::from_triples(std::move(triples), global_scope);
}

NamespaceSet filter_candidates(const KnowledgeGraph& graph, const ScopeContext& context,
                               const NamespaceSet& universe, FilterDiagnostics* diagnostics) {
  if (diagnostics != nullptr) *diagnostics = {};
  if (!context.has_hints() && context.include_global) return universe;

  NamespaceSet matched;
  for (const auto& t : graph.triples()) {
    if (context.package_hint && t.package != *context.package_hint) continue;
    if (context.scope_hint && t.scope != *context.scope_hint) continue;
    if (graph.global_namespaces().contains(t.ns)) continue;
    matched.insert(t.ns);
  }
  if (context.has_hints() && matched.empty()) {
    spdlog::warn("scope filter: hints (package={}, scope={}) match no namespace; using full universe",
                 context.package_hint.value_or("*"), context.scope_hint.value_or("*"));
    if (diagnostics != nullptr) diagnostics->hint_matched_nothing = true;
    return universe;
  }

  NamespaceSet result;
  for (const auto& ns : universe) {
    if (matched.contains(ns) || (context.include_global && graph.global_namespaces().contains(ns))) {
      result.insert(ns);
    }
  }
  return result;
}

GraphStats graph_stats(const KnowledgeGraph& graph) {
  GraphStats s;
  s.global_count = graph.global_namespaces().size();
  s.non_global_count = graph.non_global_namespaces().size();
  const auto total = s.global_count + s.non_global_count;
  if (total > 0) {
    s.non_global_reduction_fraction =
        static_cast<double>(s.global_count) / static_cast<double>(total);
  }
  if (s.non_global_count > 0) {
    std::size_t one_to_one = 0;
    for (const auto& ns : graph.non_global_namespaces()) {
      if (graph.pair_count(ns) == 1) ++one_to_one;
    }
    s.one_to_one_fraction = static_cast<double>(one_to_one) / static_cast<double>(s.non_global_count);
  }
  return s;
}

Json graph_to_json(const KnowledgeGraph& graph) {
  Json triples = Json::array();
  for (const auto& t : graph.triples()) triples.push_back(Json::array({t.package, t.scope, t.ns}));
  return Json{{"triples", std::move(triples)}};
}

KnowledgeGraph graph_from_json(const Json& j, const std::string& global_scope) {
  const auto it = j.find("triples");
  if (it == j.end() || !it->is_array()) throw DataError("graph snapshot: missing 'triples' array");
  std::vector<GraphTriple> triples;
  triples.reserve(it->size());
  for (const auto& t : *it) {
    if (!t.is_array() || t.size() != 3 || !t[0].is_string() || !t[1].is_string() ||
        !t[2].is_string()) {
      throw DataError("graph snapshot: each triple must be [package, scope, namespace]");
    }
    triples.push_back({t[0].get<std::string>(), t[1].get<std::string>(), t[2].get<std::string>()});
  }
  return KnowledgeGraph::from_triples(std::move(triples), global_scope);
}

KnowledgeGraph load_graph_snapshot(const std::filesystem::path& path,
                                   const std::string& global_scope) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const Json::parse_error& e) {
    throw DataError(std::string("graph snapshot: ") + e.what());
  }
  return graph_from_json(j, global_scope);
}

Json to_json(const GraphStats& s) {
  return Json{{"global_count", s.global_count},
              {"non_global_count", s.non_global_count},
              {"non_global_reduction_fraction", s.non_global_reduction_fraction},
              {"one_to_one_fraction", s.one_to_one_fraction}};
}

}  // namespace dcs
