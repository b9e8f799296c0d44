#pragma once

#include <chrono>
#include <memory>
#include <mutex>
#include <string>

#include "dcs/corpus.hpp"
#include "dcs/embedder.hpp"
#include "dcs/llm.hpp"
#include "dcs/rerank.hpp"

namespace dcs {

/// A JSON-over-HTTP service. The bearer token is read from `auth_env` on
/// every call and never stored.
struct HttpEndpoint {
  std::string url;  // scheme://host[:port]/path
  std::string auth_env;
  std::chrono::milliseconds timeout{30000};
  int max_retries = 2;
  std::chrono::milliseconds backoff{200};  // doubled after each failed attempt
};

/// Throws ConfigError for a URL that is not http(s)://host[:port][/path].
void validate_url(const std::string& url);

/// POSTs `body` and returns the parsed response. Connection failures, 429 and
/// 5xx answers are retried; anything still failing becomes
/// TransportError(dependency). Other 4xx answers and unparseable bodies fail
/// at once.
Json post_json(const HttpEndpoint& endpoint, const Json& body, const std::string& dependency);

/// {"input": [...], "instruction"?} -> {"data": [{"embedding": [...]}]}.
class HttpEmbedder final : public Embedder {
 public:
  /// dim = 0 probes the service once on first use.
  HttpEmbedder(HttpEndpoint endpoint, std::size_t dim = 0);
  std::vector<std::vector<float>> embed(const std::vector<std::string>& texts,
                                        std::string_view instruction) const override;
  std::size_t dim() const override;
  std::string tag() const override { return "remote:" + endpoint_.url; }

 private:
  HttpEndpoint endpoint_;
  mutable std::once_flag probe_;
  mutable std::size_t dim_;
};

/// Chat-style completion: {"messages", "max_tokens", "temperature"}. Accepts
/// {"text"} or an OpenAI-shaped {"choices": [{"message": {"content"}}]}.
class HttpLlmClient final : public LlmClient {
 public:
  explicit HttpLlmClient(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {}
  std::string complete(const LlmRequest& request) const override;
  std::string tag() const override { return "remote:" + endpoint_.url; }

 private:
  HttpEndpoint endpoint_;
};

/// Pointwise yes/no relevance service. Pair mode sends {"query", "document"};
/// raw mode sends the assembled prompt as {"prompt"}. The answer is either
/// {"score"} or {"text", "logprobs"?}, read with first_token_score.
class HttpScorer final : public Scorer {
 public:
  enum class Mode { pair, raw };
  HttpScorer(HttpEndpoint endpoint, Mode mode = Mode::pair,
             RerankTemplate tmpl = RerankTemplate::defaults());
  double score(const std::string& query, const std::string& document) const override;
  std::string tag() const override { return "remote:" + endpoint_.url; }

 private:
  HttpEndpoint endpoint_;
  Mode mode_;
  RerankTemplate template_;
};

/// {"query", "documents"} -> {"order": [indices]}.
class HttpListwiseReranker final : public ListwiseReranker {
 public:
  explicit HttpListwiseReranker(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {}
  std::vector<std::size_t> order(const std::string& query,
                                 const std::vector<std::string>& documents) const override;
  std::string tag() const override { return "remote:" + endpoint_.url; }

 private:
  HttpEndpoint endpoint_;
};

}  // namespace dcs
