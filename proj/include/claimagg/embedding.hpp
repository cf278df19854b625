#pragma once

// Sentence embeddings: binary storage, sidecar fetch, cosine similarity.
//
// Binary layout (all integers little-endian):
//   magic   "CAEM"            4 bytes
//   version u32               currently 1
//   count   u64               number of rows
//   dim     u32
//   model   u32 length + UTF-8 bytes
//   ids     count x (u32 length + UTF-8 bytes)
//   rows    count x dim IEEE-754 float32

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "claimagg/error.hpp"
#include "claimagg/http.hpp"
#include "claimagg/matrix.hpp"

namespace claimagg {

struct EmbeddingMatrix {
  std::vector<std::string> post_ids;
  std::size_t dim = 0;
  std::vector<float> values;  // row-major, rows() * dim
  std::string model_name;

  std::size_t rows() const noexcept { return post_ids.size(); }

  std::span<const float> row(std::size_t i) const noexcept { return {values.data() + i * dim, dim}; }

  void validate() const {
    if (values.size() != rows() * dim) throw ValidationError("embedding matrix shape mismatch");
    if (rows() > 0 && dim == 0) throw ValidationError("embedding dim must be positive");
    std::unordered_map<std::string_view, std::size_t> seen;
    for (std::size_t i = 0; i < rows(); ++i)
      if (!seen.emplace(post_ids[i], i).second)
        throw ValidationError("duplicate embedding id " + post_ids[i]);
    for (std::size_t i = 0; i < values.size(); ++i)
      if (!std::isfinite(values[i]))
        throw ValidationError("non-finite embedding value in row " + post_ids[i / dim]);
  }

  /// Rows for `ids`, in that order. Throws NotFoundError naming missing ids.
  EmbeddingMatrix select(std::span<const std::string> ids) const {
    std::unordered_map<std::string_view, std::size_t> index;
    for (std::size_t i = 0; i < rows(); ++i) index.emplace(post_ids[i], i);
    EmbeddingMatrix out;
    out.dim = dim;
    out.model_name = model_name;
    out.values.reserve(ids.size() * dim);
    std::string missing;
    for (const auto& id : ids) {
      auto it = index.find(id);
      if (it == index.end()) {
        missing += (missing.empty() ? "" : ", ") + id;
        continue;
      }
      out.post_ids.push_back(id);
      auto r = row(it->second);
      out.values.insert(out.values.end(), r.begin(), r.end());
    }
    if (!missing.empty()) throw NotFoundError("no embedding for: " + missing);
    return out;
  }

  friend bool operator==(const EmbeddingMatrix&, const EmbeddingMatrix&) = default;
};

namespace detail {

template <typename T, typename U>
double dot(std::span<const T> u, std::span<const U> v) {
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) acc += static_cast<double>(u[i]) * static_cast<double>(v[i]);
  return acc;
}

inline double clamp_unit(double x) { return std::clamp(x, -1.0, 1.0); }

}  // namespace detail

template <typename T>
double cosine_similarity(std::span<const T> u, std::span<const T> v) {
  if (u.size() != v.size())
    throw ValidationError("cosine_similarity: dimension mismatch " + std::to_string(u.size()) + " vs " +
                          std::to_string(v.size()));
  const double nu = std::sqrt(detail::dot(u, u));
  const double nv = std::sqrt(detail::dot(v, v));
  if (nu == 0.0 || nv == 0.0) throw ValidationError("cosine_similarity: zero-norm vector");
  return detail::clamp_unit(detail::dot(u, v) / (nu * nv));
}

inline double cosine_similarity(const std::vector<double>& u, const std::vector<double>& v) {
  return cosine_similarity(std::span<const double>(u), std::span<const double>(v));
}

/// Full pairwise cosine matrix, computed in row stripes on `threads` workers.
inline SimMatrix similarity_matrix(const EmbeddingMatrix& e, unsigned threads = 1) {
  const std::size_t n = e.rows();
  std::vector<double> norms(n);
  std::string zero;
  for (std::size_t i = 0; i < n; ++i) {
    norms[i] = std::sqrt(detail::dot(e.row(i), e.row(i)));
    if (norms[i] == 0.0) zero += (zero.empty() ? "" : ", ") + e.post_ids[i];
  }
  if (!zero.empty()) throw ValidationError("zero-norm embedding for: " + zero);

  SimMatrix s(n);
  auto stripe = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      s(i, i) = 1.0;
      for (std::size_t j = i + 1; j < n; ++j)
        s(i, j) = detail::clamp_unit(detail::dot(e.row(i), e.row(j)) / (norms[i] * norms[j]));
    }
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    stripe(0, n);
  } else {
    // Interleaved stripes balance the triangular workload.
    std::vector<std::jthread> pool;
    const std::size_t block = 16;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        for (std::size_t b = t * block; b < n; b += threads * block) stripe(b, std::min(n, b + block));
      });
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) s(j, i) = s(i, j);
  return s;
}

namespace detail {

inline constexpr std::array<char, 4> kEmbeddingMagic = {'C', 'A', 'E', 'M'};
inline constexpr std::uint32_t kEmbeddingVersion = 1;

template <typename UInt>
void put_le(std::ostream& out, UInt v) {
  std::array<char, sizeof(UInt)> bytes;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(bytes.data(), bytes.size());
}

template <typename UInt>
UInt get_le(std::istream& in, const std::string& source) {
  std::array<unsigned char, sizeof(UInt)> bytes;
  if (!in.read(reinterpret_cast<char*>(bytes.data()), bytes.size()))
    throw ParseError(source, 0, "truncated embedding file");
  UInt v = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) v |= static_cast<UInt>(bytes[i]) << (8 * i);
  return v;
}

inline std::string get_string(std::istream& in, const std::string& source) {
  const auto len = get_le<std::uint32_t>(in, source);
  std::string s(len, '\0');
  if (len && !in.read(s.data(), len)) throw ParseError(source, 0, "truncated embedding file");
  return s;
}

}  // namespace detail

inline void save_embeddings(const EmbeddingMatrix& e, const std::filesystem::path& path) {
  e.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(detail::kEmbeddingMagic.data(), 4);
  detail::put_le<std::uint32_t>(out, detail::kEmbeddingVersion);
  detail::put_le<std::uint64_t>(out, e.rows());
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.dim));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.model_name.size()));
  out.write(e.model_name.data(), static_cast<std::streamsize>(e.model_name.size()));
  for (const auto& id : e.post_ids) {
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(id.size()));
    out.write(id.data(), static_cast<std::streamsize>(id.size()));
  }
  for (float f : e.values) detail::put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(f));
  if (!out) throw Error("write failed for " + path.string());
}

/// Loads an embedding file; expected_dim = 0 accepts any dimension.
inline EmbeddingMatrix load_embeddings(const std::filesystem::path& path, std::size_t expected_dim = 0) {
  const std::string src = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open " + src);
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), 4) || magic != detail::kEmbeddingMagic)
    throw ParseError(src, 0, "not an embedding file (bad magic)");
  const auto version = detail::get_le<std::uint32_t>(in, src);
  if (version != detail::kEmbeddingVersion)
    throw ParseError(src, 0, "unsupported embedding format version " + std::to_string(version));
  const auto count = detail::get_le<std::uint64_t>(in, src);
  EmbeddingMatrix e;
  e.dim = detail::get_le<std::uint32_t>(in, src);
  if (expected_dim != 0 && e.dim != expected_dim)
    throw ValidationError(src + ": dim mismatch, expected " + std::to_string(expected_dim) + " got " +
                          std::to_string(e.dim));
  if (count > 0 && e.dim == 0) throw ParseError(src, 0, "zero dimension with non-empty matrix");
  e.model_name = detail::get_string(in, src);
  for (std::uint64_t i = 0; i < count; ++i) e.post_ids.push_back(detail::get_string(in, src));
  e.values.resize(count * e.dim);
  for (std::size_t i = 0; i < e.values.size(); ++i) {
    std::array<unsigned char, 4> b;
    if (!in.read(reinterpret_cast<char*>(b.data()), 4))
      throw ParseError(src, 0,
                       "truncated embedding file: header says " + std::to_string(count) + " rows, found " +
                           std::to_string(i / e.dim));
    const std::uint32_t bits = b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    e.values[i] = std::bit_cast<float>(bits);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw ParseError(src, 0, "trailing bytes after last row");
  e.validate();
  return e;
}

/// Asks the embedding sidecar (POST /embed) for one vector per text.
inline EmbeddingMatrix fetch_embeddings(std::span<const std::string> texts, std::span<const std::string> ids,
                                        const std::string& endpoint) {
  if (texts.size() != ids.size()) throw ValidationError("fetch_embeddings: texts/ids size mismatch");
  EmbeddingMatrix e;
  if (texts.empty()) return e;
  const json reply = post_json(endpoint, "/embed", json{{"texts", texts}});
  try {
    const auto& vectors = reply.at("vectors");
    if (!vectors.is_array() || vectors.size() != texts.size())
      throw ProtocolError("/embed returned " + std::to_string(vectors.size()) + " vectors for " +
                          std::to_string(texts.size()) + " texts");
    e.dim = reply.at("dim").get<std::size_t>();
    e.model_name = reply.value("model", std::string{});
    e.values.reserve(texts.size() * e.dim);
    for (const auto& v : vectors) {
      if (!v.is_array() || v.size() != e.dim) throw ProtocolError("/embed returned a vector of wrong dim");
      for (const auto& x : v) e.values.push_back(x.get<float>());
    }
  } catch (const json::exception& ex) {
    throw ProtocolError(std::string("/embed reply malformed: ") + ex.what());
  }
  e.post_ids.assign(ids.begin(), ids.end());
  e.validate();
  return e;
}

inline EmbeddingMatrix fetch_embeddings(std::span<const std::string> texts, const std::string& endpoint) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < texts.size(); ++i) ids.push_back(std::to_string(i));
  return fetch_embeddings(texts, ids, endpoint);
}

}  // namespace claimagg
