#include "dcs/embedder.hpp"

#include <fmt/format.h>

#include "dcs/tokenizer.hpp"

namespace dcs {

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

MockEmbedder::MockEmbedder(std::size_t dim) : dim_(dim == 0 ? 1 : dim) {}

std::vector<std::vector<float>> MockEmbedder::embed(const std::vector<std::string>& texts,
                                                    std::string_view /*instruction*/) const {
  std::vector<std::vector<float>> out;
  out.reserve(texts.size());
  for (const auto& text : texts) {
    std::vector<float> v(dim_, 0.0f);
    for (const auto& token : tokenize(text)) v[fnv1a64(token) % dim_] += 1.0f;
    out.push_back(std::move(v));
  }
  return out;
}

std::string MockEmbedder::tag() const { return fmt::format("mock-hash-fnv1a-d{}", dim_); }

}  // namespace dcs
