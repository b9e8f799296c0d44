#pragma once

#include <compare>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dcs/corpus.hpp"

namespace dcs {

using NamespaceSet = std::set<std::string, std::less<>>;

struct GraphTriple {
  std::string package;
  std::string scope;
  std::string ns;

  friend auto operator<=>(const GraphTriple&, const GraphTriple&) = default;
};

/// package -> scope -> namespace hierarchy built from platform metadata.
/// A namespace is global when any of its triples sits in the global scope.
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;
  static KnowledgeGraph from_triples(std::vector<GraphTriple> triples,
                                     std::string global_scope = "global");

  const std::vector<GraphTriple>& triples() const noexcept { return triples_; }
  const std::set<std::string>& package_nodes() const noexcept { return packages_; }
  const std::set<std::string>& scope_nodes() const noexcept { return scopes_; }
  const NamespaceSet& namespace_nodes() const noexcept { return namespaces_; }
  const NamespaceSet& global_namespaces() const noexcept { return global_; }
  const NamespaceSet& non_global_namespaces() const noexcept { return non_global_; }
  const std::string& global_scope() const noexcept { return global_scope_; }

  /// Distinct (package, scope) pairs a namespace is registered under.
  std::size_t pair_count(std::string_view ns) const;

 private:
  std::vector<GraphTriple> triples_;  // sorted, unique
  std::set<std::string> packages_;
  std::set<std::string> scopes_;
  NamespaceSet namespaces_;
  NamespaceSet global_;
  NamespaceSet non_global_;
  std::map<std::string, std::size_t, std::less<>> pairs_;
  std::string global_scope_ = "global";
};

struct ScopeContext {
  std::optional<std::string> package_hint;
  std::optional<std::string> scope_hint;
  bool include_global = true;

  bool has_hints() const { return package_hint.has_value() || scope_hint.has_value(); }
  friend bool operator==(const ScopeContext&, const ScopeContext&) = default;
};

struct GraphStats {
  std::size_t global_count = 0;
  std::size_t non_global_count = 0;
  double non_global_reduction_fraction = 0.0;
  double one_to_one_fraction = 0.0;
};

/// One triple per record, deterministic. Empty corpus gives an empty graph.
KnowledgeGraph build_graph(const Corpus& corpus, const std::string& global_scope = "global");

struct FilterDiagnostics {
  bool hint_matched_nothing = false;  // unknown hint; the universe was returned unchanged
};

/// Non-global namespaces matching the hints (an unset hint is a wildcard),
/// unioned with the global namespaces when include_global, intersected with
/// `universe`. A hint that matches no namespace anywhere in the graph falls
/// back to the full universe with a logged warning.
NamespaceSet filter_candidates(const KnowledgeGraph& graph, const ScopeContext& context,
                               const NamespaceSet& universe,
                               FilterDiagnostics* diagnostics = nullptr);

/// Fractions are 0 when their denominator is empty.
GraphStats graph_stats(const KnowledgeGraph& graph);

Json graph_to_json(const KnowledgeGraph& graph);
KnowledgeGraph graph_from_json(const Json& j, const std::string& global_scope = "global");
KnowledgeGraph load_graph_snapshot(const std::filesystem::path& path,
                                   const std::string& global_scope = "global");
Json to_json(const GraphStats& stats);

}  // namespace dcs
