#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "uc2/core_types.hpp"

namespace uc2 {

struct SearchMode {
  enum class Kind { kExact, kHierarchical };
  Kind kind = Kind::kExact;
  std::size_t nprobe = 0;

  static SearchMode exact() { return {Kind::kExact, 0}; }
  static SearchMode hierarchical(std::size_t nprobe) { return {Kind::kHierarchical, nprobe}; }
  // Exact up to 65 536 codes, otherwise hierarchical with ceil(k1 / 8) probes
  // (exact when there is no index).
  static SearchMode automatic(std::size_t k, std::size_t k1);
};

// argmin_k ||e - c_k||^2, lowest id on ties.
TokenId quantize_exact(std::span<const float> e, const Codebook& codebook);

struct HierarchicalHit {
  TokenId id = 0;
  double distance = 0.0;
  // Every probed bucket was empty, so an exhaustive scan answered instead.
  bool fell_back = false;
  std::size_t candidates_scanned = 0;
};

// Scans only the buckets of the nprobe nearest coarse cells. With
// nprobe = k1 the answer equals quantize_exact.
HierarchicalHit quantize_hierarchical(std::span<const float> e, const Codebook& codebook,
                                      const HierarchicalIndex& index, std::size_t nprobe);

struct BatchQuantization {
  std::vector<TokenId> ids;
  // ids split into consecutive groups of group_size rows (the last may be short).
  std::vector<TokenSequence> sequences;
  AssignmentHistogram histogram;
  std::size_t fallbacks = 0;
};

// group_size = 0 puts every row into one sequence.
BatchQuantization quantize_batch(const Matrix& rows, const Codebook& codebook,
                                 const HierarchicalIndex* index = nullptr,
                                 SearchMode mode = SearchMode::exact(), std::size_t group_size = 0,
                                 std::size_t threads = 0);

inline BatchQuantization quantize_batch(const EmbeddingMatrix& data, const Codebook& codebook,
                                        const HierarchicalIndex* index = nullptr,
                                        SearchMode mode = SearchMode::exact(),
                                        std::size_t group_size = 0, std::size_t threads = 0) {
  return quantize_batch(data.matrix(), codebook, index, mode, group_size, threads);
}

// Frozen indexing codebook C1 (plus optional search index) paired with a
// trainable embedding table C2 of the same vocabulary. C1 is held through a
// pointer-to-const and is never written.
class CascadedCodebook {
 public:
  // d2 = 0 or d2 = d copies C1 into C2. Any other d2 projects C1 through a
  // seeded random matrix with orthonormal columns (d2 <= d) or rows (d2 > d).
  explicit CascadedCodebook(std::shared_ptr<const Codebook> frozen,
                            std::shared_ptr<const HierarchicalIndex> index = nullptr,
                            std::size_t d2 = 0, std::uint64_t seed = 0);

  const Codebook& frozen() const noexcept { return *frozen_; }
  std::shared_ptr<const Codebook> frozen_ptr() const noexcept { return frozen_; }
  const HierarchicalIndex* index() const noexcept { return index_.get(); }
  std::size_t k() const noexcept { return frozen_->k(); }
  std::size_t d() const noexcept { return frozen_->dim(); }
  std::size_t d2() const noexcept { return trainable_.cols(); }

  const MatrixD& trainable() const noexcept { return trainable_; }
  std::span<const double> embedding(TokenId id) const;
  // Single-writer access for the trainer.
  std::span<double> mutable_embedding(TokenId id);
  void set_trainable(MatrixD table);

  std::string frozen_checksum() const;

 private:
  std::shared_ptr<const Codebook> frozen_;
  std::shared_ptr<const HierarchicalIndex> index_;
  MatrixD trainable_;
};

// Row t is the C2 row of token t.
MatrixD cascade_lookup(const TokenSequence& tokens, const CascadedCodebook& cascade);

struct TokenizedSequence {
  TokenSequence tokens;
  MatrixD embeddings;
};

// Quantize each row of z against C1, then look the ids up in C2.
TokenizedSequence tokenize_sequence(const Matrix& z, const CascadedCodebook& cascade,
                                    SearchMode mode = SearchMode::exact());

}  // namespace uc2
