#pragma once

#include <string_view>

#include "dcs/cli.hpp"
#include "dcs/retrieval.hpp"

namespace httplib {
class Server;
}

namespace dcs {

struct ServeResponse {
  int status = 200;
  Json body;
};

/// Request handling for POST /v1/retrieve, independent of the socket layer.
/// Body: {"code_before", "code_middle"?, "code_after"?, "strategy"?, "k"?,
/// "rerank"?, "scope"?, "ground_truth"?}. 400 for malformed requests, 503
/// naming the dependency when a service is down.
class RetrievalService {
 public:
  RetrievalService(const Pipeline& pipeline, PipelineConfig defaults, const ScorerProvider& scorers,
                   std::size_t rerank_depth);
  ServeResponse retrieve(std::string_view body) const;
  Json health() const;

 private:
  const Pipeline& pipeline_;
  PipelineConfig defaults_;
  const ScorerProvider& scorers_;
  std::size_t rerank_depth_;
};

/// Registers /v1/retrieve and /healthz on `server`.
void mount(httplib::Server& server, const RetrievalService& service);

}  // namespace dcs
