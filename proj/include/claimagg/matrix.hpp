#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace claimagg {

/// Dense row-major n x n matrix.
template <typename T>
class SquareMatrix {
 public:
  SquareMatrix() = default;
  explicit SquareMatrix(std::size_t n, T fill = T{}) : n_(n), values_(n * n, fill) {}

  std::size_t size() const noexcept { return n_; }
  bool empty() const noexcept { return n_ == 0; }

  T& operator()(std::size_t i, std::size_t j) noexcept { return values_[i * n_ + j]; }
  const T& operator()(std::size_t i, std::size_t j) const noexcept { return values_[i * n_ + j]; }

  std::span<T> row(std::size_t i) noexcept { return {values_.data() + i * n_, n_}; }
  std::span<const T> row(std::size_t i) const noexcept { return {values_.data() + i * n_, n_}; }

  const std::vector<T>& values() const noexcept { return values_; }

  /// Principal submatrix on the given indices, in the given order.
  SquareMatrix submatrix(std::span<const std::size_t> indices) const {
    SquareMatrix out(indices.size());
    for (std::size_t a = 0; a < indices.size(); ++a)
      for (std::size_t b = 0; b < indices.size(); ++b) out(a, b) = (*this)(indices[a], indices[b]);
    return out;
  }

  friend bool operator==(const SquareMatrix&, const SquareMatrix&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<T> values_;
};

using SimMatrix = SquareMatrix<double>;
using DissimilarityMatrix = SquareMatrix<double>;

inline DissimilarityMatrix dissimilarity_from_similarity(const SimMatrix& s) {
  DissimilarityMatrix d(s.size());
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j) d(i, j) = i == j ? 0.0 : 1.0 - s(i, j);
  return d;
}

}  // namespace claimagg
