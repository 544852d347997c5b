#include "uc2/core_types.hpp"

#include <algorithm>
#include <cmath>

#include "uc2/kernels.hpp"

namespace uc2 {

std::vector<Position> validate(const Matrix& matrix) {
  std::vector<Position> bad;
  for (std::size_t i = 0; i < matrix.rows(); ++i) {
    const auto r = matrix.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (!std::isfinite(r[j])) bad.push_back({i, j});
    }
  }
  return bad;
}

bool row_is_finite(std::span<const float> row) noexcept {
  return std::all_of(row.begin(), row.end(), [](float v) { return std::isfinite(v); });
}

void l2_normalize_rows(Matrix& matrix) {
  for (std::size_t i = 0; i < matrix.rows(); ++i) {
    auto r = matrix.row(i);
    const double n = std::sqrt(kernels::squared_norm(r));
    if (n == 0.0) continue;
    for (float& v : r) v = static_cast<float>(v / n);
  }
}

namespace {

std::string describe(const std::vector<Position>& bad) {
  std::string msg = std::to_string(bad.size()) + " non-finite value(s), first at (" +
                    std::to_string(bad.front().row) + "," + std::to_string(bad.front().col) + ")";
  return msg;
}

}  // namespace

EmbeddingMatrix::EmbeddingMatrix(Matrix values) : values_(std::move(values)) {
  if (values_.rows() < 1 || values_.cols() < 1) {
    fail(ErrorCode::kShape, "embedding matrix needs n_rows >= 1 and dim >= 1");
  }
  if (auto bad = validate(values_); !bad.empty()) {
    fail(ErrorCode::kValidation, "embedding matrix has " + describe(bad));
  }
}

EmbeddingMatrix EmbeddingMatrix::gather(std::span<const std::size_t> row_ids) const {
  std::vector<float> out;
  out.reserve(row_ids.size() * dim());
  for (std::size_t id : row_ids) {
    const auto r = row(id);
    out.insert(out.end(), r.begin(), r.end());
  }
  return EmbeddingMatrix(Matrix(row_ids.size(), dim(), std::move(out)));
}

Codebook::Codebook(Matrix centroids, CodebookMetadata metadata)
    : Codebook(std::move(centroids), std::move(metadata), true) {}

Codebook Codebook::unchecked(Matrix centroids, CodebookMetadata metadata) {
  return Codebook(std::move(centroids), std::move(metadata), false);
}

Codebook::Codebook(Matrix centroids, CodebookMetadata metadata, bool check)
    : centroids_(std::move(centroids)), metadata_(std::move(metadata)) {
  if (centroids_.rows() < 1 || centroids_.cols() < 1) {
    fail(ErrorCode::kEmptyCodebook, "codebook needs k >= 1 and dim >= 1");
  }
  if (check) {
    if (auto bad = validate(centroids_); !bad.empty()) {
      fail(ErrorCode::kValidation, "codebook has " + describe(bad));
    }
  }
  norms_.resize(k());
  for (std::size_t i = 0; i < k(); ++i) norms_[i] = kernels::squared_norm(centroids_.row(i));
}

bool Codebook::all_finite() const noexcept {
  return std::all_of(centroids_.values().begin(), centroids_.values().end(),
                     [](float v) { return std::isfinite(v); });
}

HierarchicalIndex::HierarchicalIndex(Matrix coarse_centroids, std::vector<TokenId> parents)
    : coarse_(std::move(coarse_centroids)), parents_(std::move(parents)) {
  if (coarse_.rows() < 1) fail(ErrorCode::kInvalidConfig, "hierarchical index needs k1 >= 1");
  if (coarse_.rows() > parents_.size()) {
    fail(ErrorCode::kInvalidConfig, "hierarchical index needs k1 <= K");
  }
  if (!validate(coarse_).empty()) {
    fail(ErrorCode::kValidation, "coarse centroids contain non-finite values");
  }
  buckets_.resize(coarse_.rows());
  for (std::size_t fine = 0; fine < parents_.size(); ++fine) {
    if (parents_[fine] >= coarse_.rows()) {
      fail(ErrorCode::kOutOfVocabulary, "fine id " + std::to_string(fine) +
                                            " points at coarse cell " +
                                            std::to_string(parents_[fine]));
    }
    buckets_[parents_[fine]].push_back(static_cast<TokenId>(fine));
  }
  coarse_norms_.resize(coarse_.rows());
  for (std::size_t c = 0; c < coarse_.rows(); ++c) {
    coarse_norms_[c] = kernels::squared_norm(coarse_.row(c));
  }
}

HierarchicalIndex HierarchicalIndex::from_buckets(Matrix coarse_centroids,
                                                  const std::vector<std::vector<TokenId>>& buckets,
                                                  std::size_t k_fine) {
  if (buckets.size() != coarse_centroids.rows()) {
    fail(ErrorCode::kShape, "bucket count differs from coarse centroid count");
  }
  constexpr TokenId kUnset = ~TokenId{0};
  std::vector<TokenId> parents(k_fine, kUnset);
  for (std::size_t cell = 0; cell < buckets.size(); ++cell) {
    for (TokenId fine : buckets[cell]) {
      if (fine >= k_fine) fail(ErrorCode::kOutOfVocabulary, "bucket id out of range");
      if (parents[fine] != kUnset) {
        fail(ErrorCode::kValidation, "fine id " + std::to_string(fine) + " in two buckets");
      }
      parents[fine] = static_cast<TokenId>(cell);
    }
  }
  if (std::find(parents.begin(), parents.end(), kUnset) != parents.end()) {
    fail(ErrorCode::kValidation, "buckets do not cover every fine id");
  }
  return HierarchicalIndex(std::move(coarse_centroids), std::move(parents));
}

AssignmentHistogram AssignmentHistogram::from_ids(std::span<const TokenId> ids, std::size_t k) {
  AssignmentHistogram h(k);
  for (TokenId id : ids) h.add(id);
  return h;
}

void AssignmentHistogram::add(TokenId id) {
  if (id >= counts_.size()) {
    fail(ErrorCode::kOutOfVocabulary, "token " + std::to_string(id) + " outside histogram of " +
                                          std::to_string(counts_.size()));
  }
  ++counts_[id];
  ++total_;
}

void AssignmentHistogram::merge(const AssignmentHistogram& other) {
  if (other.k() != k()) fail(ErrorCode::kShape, "histogram size mismatch");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  total_ += other.total_;
}

TokenSequence::TokenSequence(std::vector<TokenId> tokens, std::size_t codebook_k)
    : tokens_(std::move(tokens)), k_(codebook_k) {
  for (TokenId t : tokens_) {
    if (t >= k_) {
      fail(ErrorCode::kOutOfVocabulary,
           "token " + std::to_string(t) + " >= K = " + std::to_string(k_));
    }
  }
}

LabeledEmbeddings::LabeledEmbeddings(EmbeddingMatrix e, std::vector<std::uint32_t> l,
                                     std::size_t n)
    : embeddings(std::move(e)), labels(std::move(l)), num_labels(n) {
  if (labels.size() != embeddings.rows()) {
    fail(ErrorCode::kShape, "label count differs from embedding rows");
  }
  for (auto y : labels) {
    if (y >= num_labels) fail(ErrorCode::kOutOfVocabulary, "label outside [0, L)");
  }
}

}  // namespace uc2
