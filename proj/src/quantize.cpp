#include "uc2/quantize.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "uc2/kernels.hpp"
#include "uc2/nearest.hpp"
#include "uc2/parallel.hpp"
#include "uc2/sha256.hpp"

namespace uc2 {
namespace {

void check_dim(std::size_t got, std::size_t want) {
  if (got != want) {
    fail(ErrorCode::kShape, "vector has dim " + std::to_string(got) + ", codebook has dim " +
                                std::to_string(want));
  }
}

struct Best {
  double distance;
  TokenId id;
  bool found = false;

  void offer(double d, TokenId candidate) {
    if (!found || d < distance || (d == distance && candidate < id)) {
      distance = d;
      id = candidate;
      found = true;
    }
  }
};

// nprobe nearest coarse cells, ordered by (distance, cell id).
std::vector<std::size_t> probe_cells(std::span<const float> e, double qn,
                                     const HierarchicalIndex& index, std::size_t nprobe) {
  const std::size_t k1 = index.k1();
  std::vector<double> dots(k1);
  kernels::active().dot_block(e.data(), index.coarse_centroids().data(), k1, e.size(),
                              dots.data());
  std::vector<std::pair<double, std::size_t>> ranked(k1);
  for (std::size_t c = 0; c < k1; ++c) {
    ranked[c] = {kernels::expanded_distance(qn, index.coarse_squared_norms()[c], dots[c]), c};
  }
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(nprobe),
                    ranked.end());
  std::vector<std::size_t> cells(nprobe);
  for (std::size_t p = 0; p < nprobe; ++p) cells[p] = ranked[p].second;
  return cells;
}

}  // namespace

SearchMode SearchMode::automatic(std::size_t k, std::size_t k1) {
  if (k <= 65536 || k1 == 0) return exact();
  return hierarchical((k1 + 7) / 8);
}

TokenId quantize_exact(std::span<const float> e, const Codebook& codebook) {
  check_dim(e.size(), codebook.dim());
  std::vector<double> scratch(codebook.k());
  const double qn = kernels::squared_norm(e);
  return static_cast<TokenId>(kernels::nearest_in_block(e, qn, codebook.centroids().data(),
                                                        codebook.squared_norms().data(),
                                                        codebook.k(), scratch.data())
                                  .index);
}

HierarchicalHit quantize_hierarchical(std::span<const float> e, const Codebook& codebook,
                                      const HierarchicalIndex& index, std::size_t nprobe) {
  check_dim(e.size(), codebook.dim());
  check_dim(index.dim(), codebook.dim());
  if (index.k_fine() != codebook.k()) {
    fail(ErrorCode::kShape, "index covers " + std::to_string(index.k_fine()) +
                                " fine ids but codebook has " + std::to_string(codebook.k()));
  }
  if (nprobe < 1 || nprobe > index.k1()) {
    fail(ErrorCode::kInvalidConfig, "nprobe must lie in [1, k1 = " + std::to_string(index.k1()) +
                                        "]");
  }
  const auto& kt = kernels::active();
  const double qn = kt.dot(e.data(), e.data(), e.size());
  const auto norms = codebook.squared_norms();
  HierarchicalHit hit;
  Best best;
  std::vector<double> dots;
  for (std::size_t cell : probe_cells(e, qn, index, nprobe)) {
    const auto ids = index.bucket(cell);
    if (ids.empty()) continue;
    hit.candidates_scanned += ids.size();
    if (ids.back() - ids.front() + 1 == ids.size()) {
      // Contiguous id range: one block call.
      dots.resize(ids.size());
      kt.dot_block(e.data(), codebook.centroid(ids.front()).data(), ids.size(), e.size(),
                   dots.data());
      for (std::size_t j = 0; j < ids.size(); ++j) {
        best.offer(kernels::expanded_distance(qn, norms[ids[j]], dots[j]), ids[j]);
      }
    } else {
      for (TokenId id : ids) {
        const double dot = kt.dot(e.data(), codebook.centroid(id).data(), e.size());
        best.offer(kernels::expanded_distance(qn, norms[id], dot), id);
      }
    }
  }
  if (!best.found) {
    hit.fell_back = true;
    hit.id = quantize_exact(e, codebook);
    hit.candidates_scanned = codebook.k();
    hit.distance = kernels::squared_l2(e, codebook.centroid(hit.id));
    return hit;
  }
  hit.id = best.id;
  hit.distance = kernels::squared_l2(e, codebook.centroid(hit.id));
  return hit;
}

BatchQuantization quantize_batch(const Matrix& rows, const Codebook& codebook,
                                 const HierarchicalIndex* index, SearchMode mode,
                                 std::size_t group_size, std::size_t threads) {
  check_dim(rows.cols(), codebook.dim());
  BatchQuantization out{{}, {}, AssignmentHistogram(codebook.k()), 0};
  if (mode.kind == SearchMode::Kind::kHierarchical) {
    if (index == nullptr) fail(ErrorCode::kInvalidConfig, "hierarchical mode needs an index");
    out.ids.resize(rows.rows());
    std::vector<std::uint8_t> fell(rows.rows(), 0);
    for_each_chunk(rows.rows(), 256, threads, [&](std::size_t, std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) {
        const auto hit = quantize_hierarchical(rows.row(i), codebook, *index, mode.nprobe);
        out.ids[i] = hit.id;
        fell[i] = hit.fell_back ? 1 : 0;
      }
    });
    out.fallbacks = static_cast<std::size_t>(std::count(fell.begin(), fell.end(), 1));
  } else {
    out.ids = assign_rows(rows, codebook.centroids(), codebook.squared_norms(), threads).ids;
  }
  for (TokenId id : out.ids) out.histogram.add(id);
  const std::size_t group = group_size == 0 ? std::max<std::size_t>(rows.rows(), 1) : group_size;
  for (std::size_t start = 0; start < out.ids.size(); start += group) {
    const std::size_t stop = std::min(out.ids.size(), start + group);
    out.sequences.emplace_back(
        std::vector<TokenId>(out.ids.begin() + static_cast<std::ptrdiff_t>(start),
                             out.ids.begin() + static_cast<std::ptrdiff_t>(stop)),
        codebook.k());
  }
  return out;
}

namespace {

// d x d2 matrix whose columns (d2 <= d) or rows (d2 > d) are orthonormal.
MatrixD random_projection(std::size_t d, std::size_t d2, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixD r(d, d2);
  for (double& v : r.values()) v = normal(rng);
  const bool by_columns = d2 <= d;
  const std::size_t count = by_columns ? d2 : d;
  const std::size_t len = by_columns ? d : d2;
  auto at = [&](std::size_t vec, std::size_t i) -> double& {
    return by_columns ? r(i, vec) : r(vec, i);
  };
  // Modified Gram-Schmidt.
  for (std::size_t a = 0; a < count; ++a) {
    for (std::size_t b = 0; b < a; ++b) {
      double proj = 0.0;
      for (std::size_t i = 0; i < len; ++i) proj += at(a, i) * at(b, i);
      for (std::size_t i = 0; i < len; ++i) at(a, i) -= proj * at(b, i);
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < len; ++i) norm += at(a, i) * at(a, i);
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < len; ++i) at(a, i) /= norm;
  }
  return r;
}

}  // namespace

CascadedCodebook::CascadedCodebook(std::shared_ptr<const Codebook> frozen,
                                   std::shared_ptr<const HierarchicalIndex> index,
                                   std::size_t d2, std::uint64_t seed)
    : frozen_(std::move(frozen)), index_(std::move(index)) {
  if (!frozen_) fail(ErrorCode::kInvalidConfig, "cascade needs a frozen codebook");
  if (!frozen_->all_finite()) {
    fail(ErrorCode::kValidation, "frozen codebook must be filtered before use");
  }
  if (index_ && (index_->k_fine() != frozen_->k() || index_->dim() != frozen_->dim())) {
    fail(ErrorCode::kShape, "index does not match the frozen codebook");
  }
  const std::size_t d = frozen_->dim();
  if (d2 == 0) d2 = d;
  trainable_ = MatrixD(frozen_->k(), d2);
  if (d2 == d) {
    const auto src = frozen_->centroids().values();
    std::copy(src.begin(), src.end(), trainable_.values().begin());
    return;
  }
  const MatrixD proj = random_projection(d, d2, seed);
  for (std::size_t k = 0; k < frozen_->k(); ++k) {
    const auto c = frozen_->centroid(static_cast<TokenId>(k));
    auto out = trainable_.row(k);
    for (std::size_t j = 0; j < d2; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < d; ++i) acc += static_cast<double>(c[i]) * proj(i, j);
      out[j] = acc;
    }
  }
}

std::span<const double> CascadedCodebook::embedding(TokenId id) const {
  if (id >= k()) {
    fail(ErrorCode::kOutOfVocabulary,
         "token " + std::to_string(id) + " >= K = " + std::to_string(k()));
  }
  return trainable_.row(id);
}

std::span<double> CascadedCodebook::mutable_embedding(TokenId id) {
  if (id >= k()) {
    fail(ErrorCode::kOutOfVocabulary,
         "token " + std::to_string(id) + " >= K = " + std::to_string(k()));
  }
  return trainable_.row(id);
}

void CascadedCodebook::set_trainable(MatrixD table) {
  if (table.rows() != k()) fail(ErrorCode::kShape, "trainable table must have K rows");
  if (table.cols() < 1) fail(ErrorCode::kShape, "trainable table needs d2 >= 1");
  for (double v : table.values()) {
    if (!std::isfinite(v)) fail(ErrorCode::kValidation, "trainable table has non-finite values");
  }
  trainable_ = std::move(table);
}

std::string CascadedCodebook::frozen_checksum() const { return checksum(*frozen_); }

MatrixD cascade_lookup(const TokenSequence& tokens, const CascadedCodebook& cascade) {
  MatrixD out(tokens.size(), cascade.d2());
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const auto src = cascade.embedding(tokens.tokens()[t]);
    std::copy(src.begin(), src.end(), out.row(t).begin());
  }
  return out;
}

TokenizedSequence tokenize_sequence(const Matrix& z, const CascadedCodebook& cascade,
                                    SearchMode mode) {
  if (z.rows() == 0) return {TokenSequence({}, cascade.k()), MatrixD(0, cascade.d2())};
  check_dim(z.cols(), cascade.d());
  auto batch = quantize_batch(z, cascade.frozen(), cascade.index(), mode, 0, 1);
  TokenSequence seq(std::move(batch.ids), cascade.k());
  MatrixD emb = cascade_lookup(seq, cascade);
  return {std::move(seq), std::move(emb)};
}

}  // namespace uc2
