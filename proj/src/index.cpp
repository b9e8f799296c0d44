#include "dcs/index.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <exception>
#include <mutex>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>
#include <zlib.h>

#include "dcs/error.hpp"
#include "dcs/tokenizer.hpp"

namespace dcs {
namespace {

bool by_score_then_ns(const ScoredNamespace& a, const ScoredNamespace& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.ns < b.ns;
}

bool masked_out(const DocMask& mask, std::size_t i) { return !mask.empty() && !mask[i]; }

// Little-endian binary helpers.
void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float f) {
  std::uint32_t bits = 0;
  std::memcpy(&bits, &f, sizeof bits);
  put_u32(out, bits);
}

class Reader {
 public:
  Reader(std::string_view data, std::string_view what) : data_(data), what_(what) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  float f32() {
    const auto bits = u32();
    float f = 0;
    std::memcpy(&f, &bits, sizeof f);
    return f;
  }

  std::string_view bytes(std::size_t n) {
    need(n);
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw DataError(fmt::format("{}: truncated file", what_));
  }

  std::string_view data_;
  std::string_view what_;
  std::size_t pos_ = 0;
};

std::string crc_hex(std::string_view data) {
  auto crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(data.data()), static_cast<uInt>(data.size()));
  return fmt::format("crc32:{:08x}", static_cast<std::uint32_t>(crc));
}

std::string encode_bm25(const Bm25Index& index) {
  std::string out;
  put_u32(out, static_cast<std::uint32_t>(index.doc_lengths.size()));
  for (auto len : index.doc_lengths) put_u32(out, len);
  put_u32(out, static_cast<std::uint32_t>(index.postings.size()));
  for (const auto& [term, list] : index.postings) {
    put_u32(out, static_cast<std::uint32_t>(term.size()));
    out += term;
    put_u32(out, static_cast<std::uint32_t>(list.size()));
    for (const auto& p : list) {
      put_u32(out, p.doc);
      put_u32(out, p.tf);
    }
  }
  return out;
}

Bm25Index decode_bm25(std::string_view data, Bm25Params params, std::vector<std::string> doc_ids) {
  Reader r(data, "bm25.postings");
  Bm25Index index;
  index.params = params;
  const auto n = r.u32();
  if (n != doc_ids.size()) throw DataError("bm25.postings: document count disagrees with docids");
  index.doc_lengths.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) index.doc_lengths.push_back(r.u32());
  const auto terms = r.u32();
  for (std::uint32_t t = 0; t < terms; ++t) {
    std::string term(r.bytes(r.u32()));
    const auto count = r.u32();
    std::vector<Posting> list;
    list.reserve(count);
    for (std::uint32_t k = 0; k < count; ++k) {
      Posting p;
      p.doc = r.u32();
      p.tf = r.u32();
      list.push_back(p);
    }
    index.postings.emplace(std::move(term), std::move(list));
  }
  if (!r.done()) throw DataError("bm25.postings: trailing bytes");
  index.doc_ids = std::move(doc_ids);
  unsigned long long total = 0;
  for (auto len : index.doc_lengths) total += len;
  index.avgdl = n == 0 ? 0.0 : static_cast<double>(total) / n;
  index.validate();
  return index;
}

std::string encode_dense(const DenseIndex& index) {
  std::string out;
  put_u32(out, static_cast<std::uint32_t>(index.dim));
  put_u32(out, static_cast<std::uint32_t>(index.size()));
  for (float f : index.vectors) put_f32(out, f);
  return out;
}

DenseIndex decode_dense(std::string_view data, std::string tag, std::vector<std::string> doc_ids) {
  Reader r(data, "dense.vecs");
  DenseIndex index;
  index.dim = r.u32();
  const auto rows = r.u32();
  if (rows != doc_ids.size()) throw DataError("dense.vecs: row count disagrees with docids");
  index.vectors.reserve(static_cast<std::size_t>(rows) * index.dim);
  for (std::size_t i = 0; i < static_cast<std::size_t>(rows) * index.dim; ++i) {
    index.vectors.push_back(r.f32());
  }
  if (!r.done()) throw DataError("dense.vecs: trailing bytes");
  index.doc_ids = std::move(doc_ids);
  index.embedder_tag = std::move(tag);
  index.validate();
  return index;
}

std::string_view to_string(TextOrigin origin) {
  switch (origin) {
    case TextOrigin::jsdoc_summary:
      return "jsdoc_summary";
    case TextOrigin::method_fragments:
      return "method_fragments";
    case TextOrigin::raw_code:
      return "raw_code";
  }
  return "raw_code";
}

TextOrigin parse_origin(std::string_view s) {
  if (s == "jsdoc_summary") return TextOrigin::jsdoc_summary;
  if (s == "method_fragments") return TextOrigin::method_fragments;
  if (s == "raw_code") return TextOrigin::raw_code;
  throw DataError(fmt::format("docids.jsonl: unknown origin '{}'", s));
}

}  // namespace

std::string_view to_string(DocumentSource source) {
  return source == DocumentSource::jsdoc ? "jsdoc" : "raw";
}

std::optional<DocumentSource> parse_document_source(std::string_view text) {
  if (text == "jsdoc") return DocumentSource::jsdoc;
  if (text == "raw" || text == "raw_code") return DocumentSource::raw_code;
  return std::nullopt;
}

IndexDocument make_document(std::string ns, std::string text, TextOrigin origin) {
  IndexDocument d;
  d.ns = std::move(ns);
  d.text = std::move(text);
  d.tokens = tokenize(d.text);
  d.token_count = d.tokens.size();
  d.origin = origin;
  return d;
}

std::vector<IndexDocument> build_documents(const Corpus& corpus, DocumentSource source) {
  std::vector<IndexDocument> docs;
  docs.reserve(corpus.size());
  for (const auto& r : corpus.records()) {
    if (source == DocumentSource::raw_code) {
      docs.push_back(make_document(r.ns, r.raw_code, TextOrigin::raw_code));
      continue;
    }
    if (r.jsdoc_summary) {
      docs.push_back(make_document(r.ns, *r.jsdoc_summary, TextOrigin::jsdoc_summary));
      continue;
    }
    std::string grouped;
    for (const auto& m : r.methods) {
      if (!m.jsdoc) continue;
      if (grouped.empty()) grouped = fmt::format("/** Namespace {} */\n", r.ns);
      grouped += *m.jsdoc;
      grouped += '\n';
    }
    if (!grouped.empty()) {
      spdlog::warn("namespace '{}' has no jsdoc_summary; grouping method JSDoc fragments", r.ns);
      docs.push_back(make_document(r.ns, std::move(grouped), TextOrigin::method_fragments));
    } else {
      spdlog::warn("namespace '{}' has no JSDoc; indexing raw code instead", r.ns);
      docs.push_back(make_document(r.ns, r.raw_code, TextOrigin::raw_code));
    }
  }
  return docs;
}

void Bm25Index::validate() const {
  if (doc_lengths.size() != doc_ids.size()) throw DataError("bm25: doc_lengths/doc_ids size mismatch");
  if (params.k1 <= 0 || params.b < 0 || params.b > 1) throw DataError("bm25: invalid k1/b");
  if (!doc_ids.empty() && !(avgdl > 0)) throw DataError("bm25: avgdl must be positive");
  for (const auto& [term, list] : postings) {
    if (list.empty()) throw DataError(fmt::format("bm25: empty posting list for '{}'", term));
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (list[i].doc >= doc_ids.size()) {
        throw DataError(fmt::format("bm25: corrupt postings for '{}' (ordinal out of range)", term));
      }
      if (list[i].tf == 0) throw DataError(fmt::format("bm25: zero term frequency for '{}'", term));
      if (i > 0 && list[i].doc <= list[i - 1].doc) {
        throw DataError(fmt::format("bm25: corrupt postings for '{}' (unsorted)", term));
      }
    }
  }
}

Bm25Index build_bm25(const std::vector<IndexDocument>& documents, Bm25Params params) {
  if (documents.empty()) throw DataError("build_bm25: no documents");
  if (!(params.k1 > 0)) throw DataError("build_bm25: k1 must be > 0");
  if (params.b < 0 || params.b > 1) throw DataError("build_bm25: b must be in [0, 1]");
  Bm25Index index;
  index.params = params;
  unsigned long long total = 0;
  for (std::uint32_t d = 0; d < documents.size(); ++d) {
    const auto& doc = documents[d];
    index.doc_ids.push_back(doc.ns);
    index.doc_lengths.push_back(static_cast<std::uint32_t>(doc.tokens.size()));
    total += doc.tokens.size();
    std::map<std::string_view, std::uint32_t> tf;
    for (const auto& t : doc.tokens) ++tf[t];
    for (const auto& [term, count] : tf) {
      auto it = index.postings.find(term);
      if (it == index.postings.end()) it = index.postings.emplace(std::string(term), std::vector<Posting>{}).first;
      it->second.push_back({d, count});
    }
  }
  index.avgdl = static_cast<double>(total) / static_cast<double>(documents.size());
  if (!(index.avgdl > 0)) throw DataError("build_bm25: all documents are empty");
  return index;
}

std::vector<ScoredNamespace> score_bm25(const Bm25Index& index,
                                        std::span<const std::string> query_tokens,
                                        const DocMask& mask) {
  const auto n = static_cast<double>(index.size());
  const double k1 = index.params.k1;
  const double b = index.params.b;
  std::vector<double> scores(index.size(), 0.0);
  std::vector<bool> hit(index.size(), false);
  for (const auto& token : query_tokens) {
    const auto it = index.postings.find(token);
    if (it == index.postings.end()) continue;
    const auto df = static_cast<double>(it->second.size());
    const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
    for (const auto& p : it->second) {
      const double tf = p.tf;
      const double norm = k1 * (1.0 - b + b * index.doc_lengths[p.doc] / index.avgdl);
      scores[p.doc] += idf * (tf * (k1 + 1.0)) / (tf + norm);
      hit[p.doc] = true;
    }
  }
  std::vector<ScoredNamespace> out;
  for (std::size_t d = 0; d < scores.size(); ++d) {
    if (!hit[d] || masked_out(mask, d) || !(scores[d] > 0)) continue;
    out.push_back({index.doc_ids[d], scores[d]});
  }
  std::sort(out.begin(), out.end(), by_score_then_ns);
  return out;
}

bool l2_normalize(std::vector<float>& v) {
  double sq = 0.0;
  for (float f : v) sq += static_cast<double>(f) * f;
  if (!(sq > 0) || !std::isfinite(sq)) return false;
  const double inv = 1.0 / std::sqrt(sq);
  for (auto& f : v) f = static_cast<float>(f * inv);
  return true;
}

void DenseIndex::validate() const {
  if (dim == 0) throw DataError("dense: dim must be > 0");
  if (vectors.size() != doc_ids.size() * dim) throw DataError("dense: vector data size mismatch");
  for (std::size_t i = 0; i < size(); ++i) {
    double sq = 0.0;
    for (float f : row(i)) sq += static_cast<double>(f) * f;
    if (std::abs(std::sqrt(sq) - 1.0) > 1e-6) {
      throw DataError(fmt::format("dense: vector for '{}' is not unit length", doc_ids[i]));
    }
  }
}

DenseIndex build_dense(const std::vector<IndexDocument>& documents, const Embedder& embedder,
                       const DenseBuildOptions& options) {
  if (options.batch_size == 0) throw ConfigError("build_dense: batch_size must be >= 1");
  const std::size_t dim = embedder.dim();
  if (dim == 0) throw ConfigError("build_dense: embedder reports dim 0");
  const std::size_t batches = (documents.size() + options.batch_size - 1) / options.batch_size;
  std::vector<std::vector<std::vector<float>>> results(batches);
  std::vector<std::exception_ptr> errors(batches);

  auto run_batch = [&](std::size_t bi) {
    const auto begin = bi * options.batch_size;
    const auto end = std::min(documents.size(), begin + options.batch_size);
    std::vector<std::string> texts;
    for (auto i = begin; i < end; ++i) texts.push_back(documents[i].text);
    for (int attempt = 0;; ++attempt) {
      try {
        results[bi] = embedder.embed(texts, options.instruction);
        break;
      } catch (const TransportError& e) {
        if (attempt >= options.max_retries) {
          errors[bi] = std::make_exception_ptr(TransportError(
              e.dependency(), fmt::format("embedding batch {} failed after {} attempts: {}", bi,
                                          attempt + 1, e.what())));
          return;
        }
        spdlog::warn("embedding batch {} failed (attempt {}): {}", bi, attempt + 1, e.what());
      } catch (...) {
        errors[bi] = std::current_exception();
        return;
      }
    }
    if (results[bi].size() != end - begin) {
      errors[bi] = std::make_exception_ptr(DataError(fmt::format(
          "embedder returned {} vectors for {} texts", results[bi].size(), end - begin)));
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(options.parallelism, batches));
  if (workers <= 1) {
    for (std::size_t bi = 0; bi < batches; ++bi) run_batch(bi);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (auto bi = next.fetch_add(1); bi < batches; bi = next.fetch_add(1)) run_batch(bi);
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  DenseIndex index;
  index.dim = dim;
  index.embedder_tag = embedder.tag();
  index.vectors.reserve(documents.size() * dim);
  std::size_t ordinal = 0;
  for (auto& batch : results) {
    for (auto& v : batch) {
      const auto& ns = documents[ordinal].ns;
      if (v.size() != dim) {
        throw DataError(fmt::format("dimension mismatch for '{}': expected {}, got {}", ns, dim,
                                    v.size()));
      }
      if (!l2_normalize(v)) throw DataError(fmt::format("zero-norm embedding for '{}'", ns));
      index.vectors.insert(index.vectors.end(), v.begin(), v.end());
      index.doc_ids.push_back(ns);
      ++ordinal;
    }
  }
  return index;
}

std::vector<ScoredNamespace> score_dense(const DenseIndex& index, std::span<const float> query,
                                         const DocMask& mask) {
  if (query.size() != index.dim) {
    throw DataError(fmt::format("query dimension {} does not match index dimension {}",
                                query.size(), index.dim));
  }
  double qsq = 0.0;
  for (float f : query) qsq += static_cast<double>(f) * f;
  const double qnorm = std::sqrt(qsq);
  std::vector<ScoredNamespace> out;
  out.reserve(index.size());
  for (std::size_t d = 0; d < index.size(); ++d) {
    if (masked_out(mask, d)) continue;
    double dot = 0.0;
    const auto row = index.row(d);
    for (std::size_t i = 0; i < index.dim; ++i) dot += static_cast<double>(row[i]) * query[i];
    out.push_back({index.doc_ids[d], qnorm > 0 ? dot / qnorm : 0.0});
  }
  std::sort(out.begin(), out.end(), by_score_then_ns);
  return out;
}

const IndexDocument* IndexBundle::document(std::string_view ns) const {
  for (const auto& d : documents) {
    if (d.ns == ns) return &d;
  }
  return nullptr;
}

std::vector<std::string> IndexBundle::namespaces() const {
  std::vector<std::string> out;
  out.reserve(documents.size());
  for (const auto& d : documents) out.push_back(d.ns);
  return out;
}

void save_index(const IndexBundle& index, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  Json manifest;
  manifest["format_version"] = kIndexFormatVersion;
  manifest["tokenizer"] = std::string(kTokenizerTag);
  manifest["source"] = std::string(to_string(index.source));
  manifest["doc_count"] = index.documents.size();
  Json checksums = Json::object();

  std::string docids;
  for (std::size_t i = 0; i < index.documents.size(); ++i) {
    const auto& d = index.documents[i];
    docids += Json{{"ordinal", i}, {"namespace", d.ns}, {"origin", std::string(to_string(d.origin))},
                   {"text", d.text}}
                  .dump();
    docids += '\n';
  }
  write_file(dir / "docids.jsonl", docids);
  checksums["docids.jsonl"] = crc_hex(docids);

  if (index.bm25) {
    const auto bytes = encode_bm25(*index.bm25);
    write_file(dir / "bm25.postings", bytes);
    checksums["bm25.postings"] = crc_hex(bytes);
    manifest["k1"] = index.bm25->params.k1;
    manifest["b"] = index.bm25->params.b;
  } else {
    std::filesystem::remove(dir / "bm25.postings");
    manifest["k1"] = nullptr;
    manifest["b"] = nullptr;
  }
  if (index.dense) {
    const auto bytes = encode_dense(*index.dense);
    write_file(dir / "dense.vecs", bytes);
    checksums["dense.vecs"] = crc_hex(bytes);
    manifest["dim"] = index.dense->dim;
    manifest["embedder_tag"] = index.dense->embedder_tag;
  } else {
    std::filesystem::remove(dir / "dense.vecs");
    manifest["dim"] = nullptr;
    manifest["embedder_tag"] = nullptr;
  }
  manifest["checksums"] = std::move(checksums);
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

IndexBundle load_index(const std::filesystem::path& dir) {
  Json manifest;
  try {
    manifest = Json::parse(read_file(dir / "manifest.json"));
  } catch (const Json::parse_error& e) {
    throw DataError(fmt::format("{}: corrupt manifest: {}", dir.string(), e.what()));
  }
  try {
    if (manifest.at("format_version").get<int>() != kIndexFormatVersion) {
      throw DataError(fmt::format("index version mismatch: found {}, expected {}",
                                  manifest.at("format_version").dump(), kIndexFormatVersion));
    }
    const auto tok = manifest.at("tokenizer").get<std::string>();
    if (tok != kTokenizerTag) {
      throw DataError(fmt::format("index version mismatch: tokenizer '{}' (expected '{}')", tok,
                                  kTokenizerTag));
    }
    const auto& checksums = manifest.at("checksums");
    auto checked = [&](const char* name) {
      auto bytes = read_file(dir / name);
      const auto expected = checksums.at(name).get<std::string>();
      if (crc_hex(bytes) != expected) throw DataError(fmt::format("checksum failure: {}", name));
      return bytes;
    };

    IndexBundle index;
    const auto source = parse_document_source(manifest.at("source").get<std::string>());
    if (!source) throw DataError("manifest: unknown document source");
    index.source = *source;
    const auto docids = checked("docids.jsonl");
    std::vector<std::string> ids;
    for (auto line : split_lines(docids)) {
      if (is_blank(line)) continue;
      const auto j = Json::parse(line);
      if (j.at("ordinal").get<std::size_t>() != index.documents.size()) {
        throw DataError("docids.jsonl: ordinals out of sequence");
      }
      index.documents.push_back(make_document(j.at("namespace").get<std::string>(),
                                              j.at("text").get<std::string>(),
                                              parse_origin(j.at("origin").get<std::string>())));
      ids.push_back(index.documents.back().ns);
    }
    if (ids.size() != manifest.at("doc_count").get<std::size_t>()) {
      throw DataError("docids.jsonl: document count disagrees with manifest");
    }
    if (checksums.contains("bm25.postings")) {
      const Bm25Params params{manifest.at("k1").get<double>(), manifest.at("b").get<double>()};
      index.bm25 = decode_bm25(checked("bm25.postings"), params, ids);
    }
    if (checksums.contains("dense.vecs")) {
      index.dense = decode_dense(checked("dense.vecs"), manifest.at("embedder_tag").get<std::string>(), ids);
      if (index.dense->dim != manifest.at("dim").get<std::size_t>()) {
        throw DataError("dense.vecs: dim disagrees with manifest");
      }
    }
    return index;
  } catch (const Json::exception& e) {
    throw DataError(fmt::format("{}: malformed index: {}", dir.string(), e.what()));
  }
}

}  // namespace dcs
