#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dcs/corpus.hpp"
#include "dcs/embedder.hpp"

namespace dcs {

enum class DocumentSource { jsdoc, raw_code };
enum class TextOrigin { jsdoc_summary, method_fragments, raw_code };

std::string_view to_string(DocumentSource source);
std::optional<DocumentSource> parse_document_source(std::string_view text);

/// One indexed document per namespace; all of a namespace's methods live in it.
struct IndexDocument {
  std::string ns;
  std::string text;
  std::vector<std::string> tokens;
  std::size_t token_count = 0;
  TextOrigin origin = TextOrigin::raw_code;

  friend bool operator==(const IndexDocument&, const IndexDocument&) = default;
};

/// jsdoc: the namespace summary when present; otherwise the method JSDoc
/// fragments under a namespace header; otherwise raw code (warning logged).
/// raw_code: the full script.
std::vector<IndexDocument> build_documents(const Corpus& corpus, DocumentSource source);

IndexDocument make_document(std::string ns, std::string text, TextOrigin origin);

struct ScoredNamespace {
  std::string ns;
  double score = 0.0;

  friend bool operator==(const ScoredNamespace&, const ScoredNamespace&) = default;
};

/// Ordinal mask over an index's documents; empty means "all".
using DocMask = std::vector<bool>;

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;

  friend bool operator==(const Bm25Params&, const Bm25Params&) = default;
};

struct Posting {
  std::uint32_t doc = 0;
  std::uint32_t tf = 0;

  friend bool operator==(const Posting&, const Posting&) = default;
};

struct Bm25Index {
  Bm25Params params;
  std::map<std::string, std::vector<Posting>, std::less<>> postings;  // ascending doc ordinal
  std::vector<std::uint32_t> doc_lengths;
  double avgdl = 0.0;
  std::vector<std::string> doc_ids;

  std::size_t size() const noexcept { return doc_ids.size(); }
  /// Throws DataError when an invariant does not hold.
  void validate() const;

  friend bool operator==(const Bm25Index&, const Bm25Index&) = default;
};

/// Throws DataError on an empty document list or out-of-range parameters.
Bm25Index build_bm25(const std::vector<IndexDocument>& documents, Bm25Params params = {});

/// Okapi BM25, idf = ln(1 + (N - df + 0.5) / (df + 0.5)). Each query token
/// contributes once per occurrence. Zero-score documents are omitted; ties
/// break by ascending namespace.
std::vector<ScoredNamespace> score_bm25(const Bm25Index& index,
                                        std::span<const std::string> query_tokens,
                                        const DocMask& mask = {});

struct DenseIndex {
  std::size_t dim = 0;
  std::vector<float> vectors;  // row-major, doc_ids.size() x dim, unit rows
  std::vector<std::string> doc_ids;
  std::string embedder_tag;

  std::size_t size() const noexcept { return doc_ids.size(); }
  std::span<const float> row(std::size_t i) const {
    return {vectors.data() + i * dim, dim};
  }
  void validate() const;

  friend bool operator==(const DenseIndex&, const DenseIndex&) = default;
};

struct DenseBuildOptions {
  std::string instruction;  // empty for documents
  std::size_t batch_size = 32;
  std::size_t parallelism = 1;
  int max_retries = 2;  // per batch, on TransportError
};

/// L2-normalizes every returned vector. Any batch failing after retries, a
/// count or dimension mismatch, or a zero vector aborts the whole build.
DenseIndex build_dense(const std::vector<IndexDocument>& documents, const Embedder& embedder,
                       const DenseBuildOptions& options = {});

/// In-place L2 normalization; returns false for a zero vector.
bool l2_normalize(std::vector<float>& v);

/// Cosine similarity (the query is normalized here), descending, ties by
/// ascending namespace. Throws DataError on dimension mismatch.
std::vector<ScoredNamespace> score_dense(const DenseIndex& index, std::span<const float> query,
                                         const DocMask& mask = {});

/// Everything persisted in an index directory.
struct IndexBundle {
  DocumentSource source = DocumentSource::jsdoc;
  std::vector<IndexDocument> documents;
  std::optional<Bm25Index> bm25;
  std::optional<DenseIndex> dense;

  const IndexDocument* document(std::string_view ns) const;
  std::vector<std::string> namespaces() const;

  friend bool operator==(const IndexBundle&, const IndexBundle&) = default;
};

inline constexpr int kIndexFormatVersion = 1;

/// Writes manifest.json, docids.jsonl, and bm25.postings / dense.vecs when present.
void save_index(const IndexBundle& index, const std::filesystem::path& dir);

/// Verifies format version, tokenizer tag, checksums and index invariants.
IndexBundle load_index(const std::filesystem::path& dir);

}  // namespace dcs
