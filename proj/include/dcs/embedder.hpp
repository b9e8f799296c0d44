#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace dcs {

/// Text embedding service. Implementations must be safe to call concurrently.
class Embedder {
 public:
  virtual ~Embedder() = default;

  /// One vector of length dim() per input text. `instruction` is the
  /// instruction-tuned prompt for query-side embedding, empty for documents.
  virtual std::vector<std::vector<float>> embed(const std::vector<std::string>& texts,
                                                std::string_view instruction) const = 0;
  virtual std::size_t dim() const = 0;
  virtual std::string tag() const = 0;
};

/// Deterministic hashed bag-of-tokens: every token is hashed (FNV-1a, 64-bit)
/// onto one of `dim` coordinates and counts are accumulated. Vectors are
/// returned unnormalized; indexes normalize on receipt. The instruction is
/// ignored, as an instruction-tuned model would not match it against documents.
class MockEmbedder final : public Embedder {
 public:
  explicit MockEmbedder(std::size_t dim = 512);

  std::vector<std::vector<float>> embed(const std::vector<std::string>& texts,
                                        std::string_view instruction) const override;
  std::size_t dim() const override { return dim_; }
  std::string tag() const override;

 private:
  std::size_t dim_;
};

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace dcs
