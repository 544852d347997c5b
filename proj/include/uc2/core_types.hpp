#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "uc2/error.hpp"

namespace uc2 {

using TokenId = std::uint32_t;

// Dense row-major matrix. Zero rows is allowed; the embedding and codebook
// types below add their own invariants on top.
template <typename T>
class BasicMatrix {
 public:
  BasicMatrix() = default;
  BasicMatrix(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
  BasicMatrix(std::size_t rows, std::size_t cols, std::vector<T> values)
      : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows_ * cols_) {
      fail(ErrorCode::kShape, "matrix payload has " + std::to_string(values_.size()) +
                                  " values, expected " + std::to_string(rows_ * cols_));
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  std::span<T> row(std::size_t i) noexcept { return {values_.data() + i * cols_, cols_}; }
  std::span<const T> row(std::size_t i) const noexcept {
    return {values_.data() + i * cols_, cols_};
  }
  T& operator()(std::size_t i, std::size_t j) noexcept { return values_[i * cols_ + j]; }
  T operator()(std::size_t i, std::size_t j) const noexcept { return values_[i * cols_ + j]; }

  std::span<T> values() noexcept { return values_; }
  std::span<const T> values() const noexcept { return values_; }
  const T* data() const noexcept { return values_.data(); }
  T* data() noexcept { return values_.data(); }

  void append_row(std::span<const T> r) {
    if (rows_ == 0 && cols_ == 0) cols_ = r.size();
    if (r.size() != cols_) fail(ErrorCode::kShape, "append_row: width mismatch");
    values_.insert(values_.end(), r.begin(), r.end());
    ++rows_;
  }

  bool operator==(const BasicMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> values_;
};

using Matrix = BasicMatrix<float>;
using MatrixD = BasicMatrix<double>;

struct Position {
  std::size_t row;
  std::size_t col;
  bool operator==(const Position&) const = default;
};

// All non-finite entries in row-major order. Empty result means the matrix is clean.
std::vector<Position> validate(const Matrix& matrix);
bool row_is_finite(std::span<const float> row) noexcept;

// In-place L2 normalization of every row; zero rows are left untouched.
void l2_normalize_rows(Matrix& matrix);

// Corpus of N >= 1 embeddings of dimension d >= 1, all finite.
class EmbeddingMatrix {
 public:
  explicit EmbeddingMatrix(Matrix values);
  EmbeddingMatrix(std::size_t rows, std::size_t dim, std::vector<float> values)
      : EmbeddingMatrix(Matrix(rows, dim, std::move(values))) {}

  std::size_t rows() const noexcept { return values_.rows(); }
  std::size_t dim() const noexcept { return values_.cols(); }
  std::span<const float> row(std::size_t i) const noexcept { return values_.row(i); }
  const Matrix& matrix() const noexcept { return values_; }
  std::span<const float> values() const noexcept { return values_.values(); }

  // Copies the selected rows (in the given order) into a new corpus.
  EmbeddingMatrix gather(std::span<const std::size_t> row_ids) const;

  bool operator==(const EmbeddingMatrix&) const = default;

 private:
  Matrix values_;
};

struct CodebookMetadata {
  std::uint64_t seed = 0;
  std::string source_sha256;
  std::size_t k_requested = 0;
  std::size_t coarse_iters = 0;
  std::size_t fine_iters_total = 0;
};

// K x d centroid table; row index is the token id. Squared row norms are
// cached at construction for the expanded distance form.
class Codebook {
 public:
  // Rejects empty tables and any non-finite entry.
  explicit Codebook(Matrix centroids, CodebookMetadata metadata = {});

  // Raw clustering output that may still carry NaN/Inf rows. Only
  // filter_invalid_centroids should consume one of these.
  static Codebook unchecked(Matrix centroids, CodebookMetadata metadata = {});

  std::size_t k() const noexcept { return centroids_.rows(); }
  std::size_t dim() const noexcept { return centroids_.cols(); }
  std::span<const float> centroid(TokenId id) const noexcept { return centroids_.row(id); }
  const Matrix& centroids() const noexcept { return centroids_; }
  std::span<const double> squared_norms() const noexcept { return norms_; }
  const CodebookMetadata& metadata() const noexcept { return metadata_; }
  bool all_finite() const noexcept;

 private:
  Codebook(Matrix centroids, CodebookMetadata metadata, bool check);

  Matrix centroids_;
  std::vector<double> norms_;
  CodebookMetadata metadata_;
};

// Coarse cells over a fine codebook. parents[i] is the coarse cell that owns
// fine id i, so the buckets are an exact partition by construction.
class HierarchicalIndex {
 public:
  HierarchicalIndex(Matrix coarse_centroids, std::vector<TokenId> parents);
  static HierarchicalIndex from_buckets(Matrix coarse_centroids,
                                        const std::vector<std::vector<TokenId>>& buckets,
                                        std::size_t k_fine);

  std::size_t k1() const noexcept { return coarse_.rows(); }
  std::size_t k_fine() const noexcept { return parents_.size(); }
  std::size_t dim() const noexcept { return coarse_.cols(); }
  const Matrix& coarse_centroids() const noexcept { return coarse_; }
  std::span<const double> coarse_squared_norms() const noexcept { return coarse_norms_; }
  std::span<const TokenId> parents() const noexcept { return parents_; }
  std::span<const TokenId> bucket(std::size_t cell) const noexcept { return buckets_[cell]; }

  bool operator==(const HierarchicalIndex& other) const {
    return coarse_ == other.coarse_ && parents_ == other.parents_;
  }

 private:
  Matrix coarse_;
  std::vector<double> coarse_norms_;
  std::vector<TokenId> parents_;
  std::vector<std::vector<TokenId>> buckets_;
};

class AssignmentHistogram {
 public:
  explicit AssignmentHistogram(std::size_t k) : counts_(k, 0) {}
  static AssignmentHistogram from_ids(std::span<const TokenId> ids, std::size_t k);

  void add(TokenId id);
  void merge(const AssignmentHistogram& other);

  std::size_t k() const noexcept { return counts_.size(); }
  std::uint64_t total() const noexcept { return total_; }
  std::span<const std::uint64_t> counts() const noexcept { return counts_; }
  // q(k); zero for an empty histogram.
  double probability(std::size_t id) const noexcept {
    return total_ == 0 ? 0.0 : static_cast<double>(counts_[id]) / static_cast<double>(total_);
  }

  bool operator==(const AssignmentHistogram&) const = default;

 private:
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

class TokenSequence {
 public:
  TokenSequence() = default;
  TokenSequence(std::vector<TokenId> tokens, std::size_t codebook_k);

  std::span<const TokenId> tokens() const noexcept { return tokens_; }
  std::size_t size() const noexcept { return tokens_.size(); }
  std::size_t codebook_k() const noexcept { return k_; }

  bool operator==(const TokenSequence&) const = default;

 private:
  std::vector<TokenId> tokens_;
  std::size_t k_ = 0;
};

struct LabeledEmbeddings {
  LabeledEmbeddings(EmbeddingMatrix embeddings, std::vector<std::uint32_t> labels,
                    std::size_t num_labels);

  EmbeddingMatrix embeddings;
  std::vector<std::uint32_t> labels;
  std::size_t num_labels;
};

}  // namespace uc2
