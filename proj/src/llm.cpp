#include "dcs/llm.hpp"

#include <fmt/format.h>

#include "dcs/corpus.hpp"
#include "dcs/error.hpp"
#include "dcs/tokenizer.hpp"

namespace dcs {

void MockLlmClient::set(std::string purpose, std::string task_id, Response response) {
  canned_[{std::move(purpose), std::move(task_id)}] = std::move(response);
}

void MockLlmClient::set_default(std::string purpose, std::string text) {
  defaults_[std::move(purpose)] = std::move(text);
}

void MockLlmClient::load_jsonl(const std::filesystem::path& path) {
  const auto text = read_file(path);
  std::size_t line_no = 0;
  for (auto line : split_lines(text)) {
    ++line_no;
    if (is_blank(line)) continue;
    try {
      const auto j = Json::parse(line);
      Response r;
      r.text = j.value("text", "");
      r.fail = j.contains("error");
      const auto task_id = j.value("task_id", "");
      const auto purpose = j.at("purpose").get<std::string>();
      if (task_id.empty()) {
        set_default(purpose, r.text);
      } else {
        set(purpose, task_id, std::move(r));
      }
    } catch (const Json::exception& e) {
      throw DataError(fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
    }
  }
}

std::string MockLlmClient::complete(const LlmRequest& request) const {
  calls_.fetch_add(1);
  const auto it = canned_.find({request.purpose, request.task_id});
  if (it != canned_.end()) {
    if (it->second.fail) {
      throw TransportError("llm", fmt::format("mock llm: simulated timeout for task '{}'",
                                              request.task_id));
    }
    return it->second.text;
  }
  const auto d = defaults_.find(request.purpose);
  if (d != defaults_.end()) return d->second;
  throw TransportError("llm", fmt::format("mock llm: no canned '{}' response for task '{}'",
                                          request.purpose, request.task_id));
}

}  // namespace dcs
