#include "dcs/http_services.hpp"

#include <cstdlib>
#include <regex>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "httplib.h"

#include "dcs/error.hpp"

namespace dcs {
namespace {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

ParsedUrl parse_url(const std::string& url) {
  static const std::regex kUrl(R"(^(https?://[A-Za-z0-9.\-]+(:[0-9]{1,5})?)(/[^\s]*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, kUrl)) throw ConfigError(fmt::format("malformed endpoint url: '{}'", url));
  return {m[1].str(), m[3].matched ? m[3].str() : std::string("/")};
}

bool retryable(int status) { return status == 429 || status >= 500; }

}  // namespace

void validate_url(const std::string& url) { parse_url(url); }

Json post_json(const HttpEndpoint& endpoint, const Json& body, const std::string& dependency) {
  const auto url = parse_url(endpoint.url);
  httplib::Client client(url.origin);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(endpoint.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(endpoint.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  httplib::Headers headers;
  if (!endpoint.auth_env.empty()) {
    if (const char* token = std::getenv(endpoint.auth_env.c_str()); token != nullptr && *token != '\0') {
      headers.emplace("Authorization", std::string("Bearer ") + token);
    }
  }
  const auto payload = body.dump();
  auto delay = endpoint.backoff;
  std::string last_error;
  for (int attempt = 0; attempt <= endpoint.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
    auto res = client.Post(url.path, headers, payload, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      spdlog::debug("{}: attempt {} failed: {}", dependency, attempt + 1, last_error);
      continue;
    }
    if (retryable(res->status)) {
      last_error = fmt::format("HTTP {}", res->status);
      spdlog::debug("{}: attempt {} got {}", dependency, attempt + 1, last_error);
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      throw TransportError(dependency, fmt::format("{}: HTTP {}: {}", dependency, res->status, res->body));
    }
    try {
      return Json::parse(res->body);
    } catch (const Json::exception& e) {
      throw TransportError(dependency, fmt::format("{}: unparseable response: {}", dependency, e.what()));
    }
  }
  throw TransportError(dependency, fmt::format("{} unavailable at {}: {} (after {} attempts)", dependency,
                                               endpoint.url, last_error, endpoint.max_retries + 1));
}

HttpEmbedder::HttpEmbedder(HttpEndpoint endpoint, std::size_t dim)
    : endpoint_(std::move(endpoint)), dim_(dim) {
  validate_url(endpoint_.url);
}

std::vector<std::vector<float>> HttpEmbedder::embed(const std::vector<std::string>& texts,
                                                    std::string_view instruction) const {
  if (texts.empty()) return {};
  Json body{{"input", texts}};
  if (!instruction.empty()) body["instruction"] = std::string(instruction);
  const auto res = post_json(endpoint_, body, "embedder");
  std::vector<std::vector<float>> out;
  try {
    for (const auto& item : res.at("data")) out.push_back(item.at("embedding").get<std::vector<float>>());
  } catch (const Json::exception& e) {
    throw TransportError("embedder", fmt::format("embedder: malformed response: {}", e.what()));
  }
  if (out.size() != texts.size()) {
    throw TransportError("embedder",
                         fmt::format("embedder: {} vectors for {} inputs", out.size(), texts.size()));
  }
  return out;
}

std::size_t HttpEmbedder::dim() const {
  std::call_once(probe_, [this] {
    if (dim_ != 0) return;
    const auto probe = embed({"dimension probe"}, {});
    dim_ = probe.front().size();
  });
  return dim_;
}

std::string HttpLlmClient::complete(const LlmRequest& request) const {
  Json messages = Json::array();
  if (!request.system.empty()) messages.push_back(Json{{"role", "system"}, {"content", request.system}});
  messages.push_back(Json{{"role", "user"}, {"content", request.prompt}});
  const Json body{{"messages", std::move(messages)},
                  {"max_tokens", request.max_tokens},
                  {"temperature", request.temperature}};
  const auto res = post_json(endpoint_, body, "llm");
  if (res.contains("text") && res["text"].is_string()) return res["text"].get<std::string>();
  if (res.contains("choices") && res["choices"].is_array() && !res["choices"].empty()) {
    const auto& choice = res["choices"][0];
    if (choice.contains("message") && choice["message"].contains("content") &&
        choice["message"]["content"].is_string()) {
      return choice["message"]["content"].get<std::string>();
    }
    if (choice.contains("text") && choice["text"].is_string()) return choice["text"].get<std::string>();
  }
  throw TransportError("llm", fmt::format("llm: no completion text in response for task '{}'", request.task_id));
}

HttpScorer::HttpScorer(HttpEndpoint endpoint, Mode mode, RerankTemplate tmpl)
    : endpoint_(std::move(endpoint)), mode_(mode), template_(std::move(tmpl)) {
  validate_url(endpoint_.url);
}

double HttpScorer::score(const std::string& query, const std::string& document) const {
  Json body;
  if (mode_ == Mode::raw) {
    body = Json{{"prompt", build_rerank_prompt(query, document, template_).assembled}};
  } else {
    body = Json{{"query", query}, {"document", document}};
  }
  const auto res = post_json(endpoint_, body, "scorer");
  if (res.contains("score") && res["score"].is_number()) return res["score"].get<double>();
  DecisionOutput out;
  if (res.contains("text") && res["text"].is_string()) out.text = res["text"].get<std::string>();
  if (res.contains("logprobs") && res["logprobs"].is_object()) {
    for (const auto& [token, lp] : res["logprobs"].items()) {
      if (lp.is_number()) out.logprobs[token] = lp.get<double>();
    }
  }
  if (!out.text && out.logprobs.empty()) throw TransportError("scorer", "scorer: response has no score or text");
  const auto verdict = first_token_score(out);
  if (verdict.parse_failure) spdlog::warn("scorer: unparseable decision token, scored 0");
  return verdict.score;
}

std::vector<std::size_t> HttpListwiseReranker::order(const std::string& query,
                                                     const std::vector<std::string>& documents) const {
  const auto res = post_json(endpoint_, Json{{"query", query}, {"documents", documents}}, "reranker");
  try {
    return res.at("order").get<std::vector<std::size_t>>();
  } catch (const Json::exception& e) {
    throw TransportError("reranker", fmt::format("reranker: malformed order: {}", e.what()));
  }
}

}  // namespace dcs
