#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>

namespace dcs {

struct LlmRequest {
  std::string system;  // optional system message
  std::string prompt;
  int max_tokens = 256;
  double temperature = 0.0;
  std::string purpose;  // description | hypothetical | judge | generate | knowledge_check
  std::string task_id;  // tracing key, also what the mock client looks up
};

/// Text completion service. complete() returns text or throws TransportError;
/// it must honor its own timeout. Implementations must be thread-safe.
class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual std::string complete(const LlmRequest& request) const = 0;
  virtual std::string tag() const = 0;
};

/// Canned completions keyed by (purpose, task_id), with optional per-purpose
/// defaults. A canned entry may instead be a simulated transport failure.
class MockLlmClient final : public LlmClient {
 public:
  struct Response {
    std::string text;
    bool fail = false;  // throw TransportError instead of answering
  };

  MockLlmClient() = default;

  void set(std::string purpose, std::string task_id, Response response);
  void set_default(std::string purpose, std::string text);

  /// Adds JSONL rows {"purpose", "task_id"?, "text"?, "error"?}; a row
  /// without task_id sets that purpose's default.
  void load_jsonl(const std::filesystem::path& path);

  std::string complete(const LlmRequest& request) const override;
  std::string tag() const override { return "mock-llm"; }
  std::size_t calls() const noexcept { return calls_.load(); }

 private:
  std::map<std::pair<std::string, std::string>, Response> canned_;
  std::map<std::string, std::string> defaults_;
  mutable std::atomic<std::size_t> calls_{0};
};

}  // namespace dcs
