#pragma once

// On-disk formats. Every integer is little-endian and every float is IEEE-754
// binary32 little-endian, with no padding:
//
//   UC2E  "UC2E" u32 version=1 u64 n_rows u32 dim  f32[n_rows*dim]
//   UC2C  "UC2C" u32 version=1 u64 K u32 dim u8 has_index  f32[K*dim]
//         [u32 K1  f32[K1*dim]  u32 parent[K]]
//   UC2T  "UC2T" u32 version=1 u64 K u64 n_sequences  { u32 T  u32 id[T] }*

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uc2/cascade_train.hpp"
#include "uc2/contrastive.hpp"
#include "uc2/core_types.hpp"
#include "uc2/quantize.hpp"

namespace uc2::io {

inline constexpr std::uint32_t kVersion = 1;
inline constexpr std::size_t kEmbeddingHeaderBytes = 4 + 4 + 8 + 4;

// Writes go to a sibling temp file that is renamed into place.
void write_matrix(const std::filesystem::path& path, const Matrix& m);
void write_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& e);

// Streams a UC2E payload in fixed-size row chunks.
class EmbeddingReader {
 public:
  explicit EmbeddingReader(const std::filesystem::path& path, bool check_finite = true);

  std::uint64_t rows() const noexcept { return rows_; }
  std::uint32_t dim() const noexcept { return dim_; }
  std::uint64_t rows_remaining() const noexcept { return rows_ - consumed_; }
  // Appends up to max_rows rows to `out`; returns the number appended.
  std::size_t read_chunk(std::size_t max_rows, std::vector<float>& out);

 private:
  std::ifstream in_;
  std::filesystem::path path_;
  std::uint64_t rows_ = 0;
  std::uint32_t dim_ = 0;
  std::uint64_t consumed_ = 0;
  bool check_finite_;
};

// Raw matrix (may have zero rows, may hold non-finite values when
// check_finite is false).
Matrix read_matrix(const std::filesystem::path& path, bool check_finite = true);
EmbeddingMatrix read_embeddings(const std::filesystem::path& path);

struct StoredCodebook {
  Codebook codebook;
  std::optional<HierarchicalIndex> index;
};

// Refuses codebooks with non-finite rows.
void write_codebook(const std::filesystem::path& path, const Codebook& codebook,
                    const HierarchicalIndex* index = nullptr);
StoredCodebook read_codebook(const std::filesystem::path& path);

struct TokenStream {
  std::size_t k = 0;
  std::vector<TokenSequence> sequences;
};

// Refuses any id >= k.
void write_tokens(const std::filesystem::path& path, std::span<const TokenSequence> sequences,
                  std::size_t k);
TokenStream read_tokens(const std::filesystem::path& path);

// Labels are stored as a one-sequence UC2T whose K is the label count.
void write_labels(const std::filesystem::path& path, std::span<const std::uint32_t> labels,
                  std::size_t num_labels);
std::pair<std::vector<std::uint32_t>, std::size_t> read_labels(const std::filesystem::path& path);

// Paired training set: patches are n_items * seq_len rows of one UC2E, prompts
// one row per item in a second UC2E.
void write_paired(const std::filesystem::path& patches, const std::filesystem::path& prompts,
                  const PairedDataset& data);
PairedDataset read_paired(const std::filesystem::path& patches,
                          const std::filesystem::path& prompts, std::size_t seq_len);

// Trained cascade: C2 as a UC2C at `path` (float32), and the projection as a
// UC2E of d_out rows x (d_in + 1) columns (bias last) at projection_path(path).
std::filesystem::path projection_path(const std::filesystem::path& path);
void write_cascade(const std::filesystem::path& path, const CascadedCodebook& cascade,
                   const ProjectionMap& map);

// Bytes of a file, for checksums and reproducibility checks.
std::vector<std::byte> read_bytes(const std::filesystem::path& path);

}  // namespace uc2::io
