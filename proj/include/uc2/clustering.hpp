#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "uc2/core_types.hpp"

namespace uc2 {

enum class InitMethod { kKmeansPlusPlusOnSample, kRandomRows };
enum class EmptyClusterPolicy { kReseedFarthest };
enum class FineAllocation { kFixed, kProportional };

struct ClusterConfig {
  std::size_t k = 1;
  std::size_t max_iters = 50;
  // Stop once (previous SSE - SSE) <= tol * previous SSE.
  double tol = 1e-4;
  InitMethod init = InitMethod::kKmeansPlusPlusOnSample;
  std::uint64_t seed = 0;
  EmptyClusterPolicy empty_cluster_policy = EmptyClusterPolicy::kReseedFarthest;
  std::size_t threads = 0;

  void validate() const;
};

struct ClusterResult {
  Codebook codebook;
  std::vector<TokenId> assignments;
  // SSE of the assignment made against each successive set of centroids.
  // trace[0] is the initial seeding, trace.back() matches `assignments`.
  std::vector<double> distortion_trace;
  std::size_t iters_run = 0;
  std::size_t reseeded = 0;

  double sse() const { return distortion_trace.back(); }
};

// Seeding used by lloyd_kmeans, exposed so reference implementations can
// start from the same point. Returns k x d.
Matrix initial_centroids(const EmbeddingMatrix& data, const ClusterConfig& cfg);

ClusterResult lloyd_kmeans(const EmbeddingMatrix& data, const ClusterConfig& cfg);

struct TwoStageResult {
  Codebook codebook;
  HierarchicalIndex index;
  // Fine id per row, assigned within the row's coarse cell.
  std::vector<TokenId> assignments;
  double sse = 0.0;
  std::size_t k_requested = 0;
  std::size_t k_final = 0;
  std::vector<std::size_t> bucket_sizes;
  std::vector<std::size_t> quotas;
  // Under fixed allocation: k mod k1 extra centroids handed to the largest cells.
  std::size_t remainder_distributed = 0;
  // Cells holding fewer points than their quota (one centroid per point).
  std::size_t undersized_buckets = 0;
  std::size_t coarse_iters = 0;
  std::size_t fine_iters_total = 0;
};

// Coarse k1-way Lloyd, then an independent Lloyd inside every coarse cell.
// The fine seed of cell c is seed + c * 0x9E3779B97F4A7C15, so with k1 = 1 the
// result equals lloyd_kmeans(data, k) under the same seed.
TwoStageResult two_stage_cluster(const EmbeddingMatrix& data, std::size_t k, std::size_t k1,
                                 const ClusterConfig& cfg,
                                 FineAllocation allocation = FineAllocation::kFixed);

// Per-cell fine-centroid quotas for the given cell populations.
std::vector<std::size_t> fine_quotas(std::span<const std::size_t> bucket_sizes, std::size_t k,
                                     FineAllocation allocation,
                                     std::size_t* remainder_distributed = nullptr);

inline constexpr TokenId kRemoved = ~TokenId{0};

struct FilterResult {
  Codebook codebook;
  // Old id -> new id, or kRemoved.
  std::vector<TokenId> remap;
  std::size_t removed = 0;
};

// Drops every row holding a NaN/Inf and compacts the rest, order-preserving.
FilterResult filter_invalid_centroids(const Codebook& codebook);

// Re-expresses an index over the compacted ids; removed ids disappear from
// their buckets.
HierarchicalIndex remap_index(const HierarchicalIndex& index, std::span<const TokenId> remap);

}  // namespace uc2
