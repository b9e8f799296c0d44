#include "dcs/serve.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "httplib.h"

#include "dcs/error.hpp"
#include "dcs/rerank.hpp"
#include "dcs/tokenizer.hpp"

namespace dcs {
namespace {

ServeResponse error_response(int status, std::string message, std::string dependency = {}) {
  Json body{{"error", std::move(message)}};
  if (!dependency.empty()) body["dependency"] = std::move(dependency);
  return {status, std::move(body)};
}

struct BadRequest {
  std::string message;
};

std::string string_field(const Json& j, const char* key, bool required) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) {
    if (required) throw BadRequest{fmt::format("missing field '{}'", key)};
    return {};
  }
  if (!it->is_string()) throw BadRequest{fmt::format("field '{}' must be a string", key)};
  return it->get<std::string>();
}

ScopeContext scope_from(const Json& j) {
  ScopeContext ctx;
  if (j.is_string()) {
    ctx.scope_hint = j.get<std::string>();
    return ctx;
  }
  if (!j.is_object()) throw BadRequest{"field 'scope' must be a string or an object"};
  for (const auto& [key, v] : j.items()) {
    if (key == "scope" && v.is_string()) {
      ctx.scope_hint = v.get<std::string>();
    } else if (key == "package" && v.is_string()) {
      ctx.package_hint = v.get<std::string>();
    } else if (key == "include_global" && v.is_boolean()) {
      ctx.include_global = v.get<bool>();
    } else {
      throw BadRequest{fmt::format("bad scope field '{}'", key)};
    }
  }
  return ctx;
}

}  // namespace

RetrievalService::RetrievalService(const Pipeline& pipeline, PipelineConfig defaults,
                                   const ScorerProvider& scorers, std::size_t rerank_depth)
    : pipeline_(pipeline), defaults_(std::move(defaults)), scorers_(scorers), rerank_depth_(rerank_depth) {}

ServeResponse RetrievalService::retrieve(std::string_view body) const {
  const auto start = std::chrono::steady_clock::now();
  try {
    Json req;
    try {
      req = Json::parse(body);
    } catch (const Json::exception& e) {
      throw BadRequest{fmt::format("invalid JSON: {}", e.what())};
    }
    if (!req.is_object()) throw BadRequest{"request body must be a JSON object"};

    CompletionTask task;
    task.id = req.contains("id") && req["id"].is_string() ? req["id"].get<std::string>() : "request";
    task.code_before = string_field(req, "code_before", true);
    task.code_middle = string_field(req, "code_middle", false);
    if (req.contains("code_after") && !req["code_after"].is_null()) {
      task.code_after = string_field(req, "code_after", false);
    }
    task.ground_truth = string_field(req, "ground_truth", false);

    PipelineConfig cfg = defaults_;
    if (req.contains("strategy")) {
      auto s = parse_strategy(string_field(req, "strategy", true));
      if (!s) throw BadRequest{"unknown strategy"};
      cfg.strategy = *s;
    }
    if (req.contains("k")) {
      if (!req["k"].is_number_unsigned() || req["k"].get<std::size_t>() == 0) {
        throw BadRequest{"field 'k' must be a positive integer"};
      }
      cfg.k_retrieve = req["k"].get<std::size_t>();
    }
    if (req.contains("fim")) {
      if (!req["fim"].is_boolean()) throw BadRequest{"field 'fim' must be a boolean"};
      cfg.fim = req["fim"].get<bool>();
    }
    if (req.contains("scope") && !req["scope"].is_null()) {
      cfg.scope_context = scope_from(req["scope"]);
      cfg.use_kg_filter = true;
    }
    std::optional<std::size_t> depth;
    if (req.contains("rerank")) {
      const auto& r = req["rerank"];
      if (r.is_boolean()) {
        if (r.get<bool>()) depth = rerank_depth_;
      } else if (r.is_number_unsigned() && r.get<std::size_t>() > 0) {
        depth = r.get<std::size_t>();
      } else {
        throw BadRequest{"field 'rerank' must be a boolean or a positive depth"};
      }
    }
    if (cfg.strategy != QueryStrategy::prefix && pipeline_.services().llm == nullptr) {
      return error_response(503, "llm endpoint required", "llm");
    }
    if (depth && !scorers_.configured()) return error_response(503, "scorer endpoint required", "scorer");
    if (depth && scorers_.oracle() && task.ground_truth.empty()) {
      throw BadRequest{"the oracle scorer needs 'ground_truth'"};
    }

    auto list = pipeline_.retrieve(task, cfg);
    if (depth) {
      const auto scorer = scorers_.for_task(task.ground_truth);
      list = rerank(list, pipeline_.documents(), *scorer, RerankOptions{*depth, 1}, task.ground_truth);
    }
    auto out = to_json(list, true);
    if (task.ground_truth.empty()) out.erase("ground_truth_rank");
    spdlog::debug("served request in {:.2f} ms", std::chrono::duration<double, std::milli>(
                                                      std::chrono::steady_clock::now() - start)
                                                      .count());
    return {200, std::move(out)};
  } catch (const BadRequest& e) {
    return error_response(400, e.message);
  } catch (const TransportError& e) {
    spdlog::warn("dependency failure: {}", e.what());
    return error_response(503, e.what(), e.dependency());
  } catch (const DataError& e) {
    return error_response(400, e.what());
  } catch (const ConfigError& e) {
    return error_response(400, e.what());
  }
}

Json RetrievalService::health() const {
  const auto& s = pipeline_.services();
  Json j{{"status", "ok"}, {"documents", pipeline_.documents().size()}};
  j["embedder"] = s.embedder != nullptr ? Json(s.embedder->tag()) : Json(nullptr);
  j["llm"] = s.llm != nullptr ? Json(s.llm->tag()) : Json(nullptr);
  j["scorer"] = scorers_.tag();
  return j;
}

void mount(httplib::Server& server, const RetrievalService& service) {
  server.Post("/v1/retrieve", [&service](const httplib::Request& req, httplib::Response& res) {
    const auto r = service.retrieve(req.body);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  });
  server.Get("/healthz", [&service](const httplib::Request&, httplib::Response& res) {
    res.set_content(service.health().dump(), "application/json");
  });
}

}  // namespace dcs
