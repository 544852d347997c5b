#include "uc2/clustering.hpp"

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

constexpr std::uint64_t kSeedStride = 0x9E3779B97F4A7C15ULL;

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  return std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)));
}

// m distinct row ids drawn uniformly (partial Fisher-Yates), or all rows in
// order when m == n.
std::vector<std::size_t> sample_rows(std::size_t n, std::size_t m, std::mt19937_64& rng) {
  std::vector<std::size_t> ids(n);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  if (m >= n) return ids;
  for (std::size_t i = 0; i < m; ++i) {
    std::swap(ids[i], ids[i + uniform_index(rng, n - i)]);
  }
  ids.resize(m);
  return ids;
}

Matrix kmeanspp(const EmbeddingMatrix& data, std::size_t k, std::mt19937_64& rng) {
  const std::size_t m = std::min(data.rows(), 256 * k);
  const auto sample = sample_rows(data.rows(), m, rng);
  const std::size_t d = data.dim();
  Matrix centers(k, d);
  auto place = [&](std::size_t c, std::size_t sample_pos) {
    const auto src = data.row(sample[sample_pos]);
    std::copy(src.begin(), src.end(), centers.row(c).begin());
  };
  place(0, uniform_index(rng, m));
  std::vector<double> d2(m);
  for (std::size_t i = 0; i < m; ++i) {
    d2[i] = kernels::squared_l2(data.row(sample[i]), centers.row(0));
  }
  for (std::size_t c = 1; c < k; ++c) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t pick = 0;
    if (total > 0.0) {
      const double target = uniform01(rng) * total;
      double run = 0.0;
      pick = m - 1;
      for (std::size_t i = 0; i < m; ++i) {
        run += d2[i];
        if (run > target && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = uniform_index(rng, m);
    }
    place(c, pick);
    for (std::size_t i = 0; i < m; ++i) {
      d2[i] = std::min(d2[i], kernels::squared_l2(data.row(sample[i]), centers.row(c)));
    }
  }
  return centers;
}

// Means of assigned rows. Empty clusters are reseeded to the rows farthest
// from their (updated) centroid, one distinct row per empty cluster, and the
// number of reseeds is returned.
std::size_t update_centroids(const EmbeddingMatrix& data, std::span<const TokenId> ids,
                             Matrix& centroids) {
  const std::size_t k = centroids.rows();
  const std::size_t d = data.dim();
  std::vector<double> sums(k * d, 0.0);
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < data.rows(); ++i) {
    const auto r = data.row(i);
    double* s = sums.data() + static_cast<std::size_t>(ids[i]) * d;
    for (std::size_t j = 0; j < d; ++j) s[j] += r[j];
    ++counts[ids[i]];
  }
  std::vector<std::size_t> empty;
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] == 0) {
      empty.push_back(c);
      continue;
    }
    const double inv = 1.0 / static_cast<double>(counts[c]);
    auto row = centroids.row(c);
    for (std::size_t j = 0; j < d; ++j) row[j] = static_cast<float>(sums[c * d + j] * inv);
  }
  if (empty.empty()) return 0;

  std::vector<double> far(data.rows());
  for (std::size_t i = 0; i < data.rows(); ++i) {
    far[i] = kernels::squared_l2(data.row(i), centroids.row(ids[i]));
  }
  std::vector<std::size_t> order(data.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t take = std::min(empty.size(), order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return far[a] > far[b] || (far[a] == far[b] && a < b);
                    });
  for (std::size_t e = 0; e < take; ++e) {
    const auto src = data.row(order[e]);
    std::copy(src.begin(), src.end(), centroids.row(empty[e]).begin());
  }
  return empty.size();
}

}  // namespace

void ClusterConfig::validate() const {
  if (k < 1) fail(ErrorCode::kInvalidConfig, "k must be >= 1");
  if (max_iters < 1) fail(ErrorCode::kInvalidConfig, "max_iters must be >= 1");
  if (!(tol >= 0.0)) fail(ErrorCode::kInvalidConfig, "tol must be >= 0");
}

Matrix initial_centroids(const EmbeddingMatrix& data, const ClusterConfig& cfg) {
  cfg.validate();
  if (cfg.k > data.rows()) {
    fail(ErrorCode::kInvalidConfig, "k = " + std::to_string(cfg.k) + " exceeds n_rows = " +
                                        std::to_string(data.rows()));
  }
  std::mt19937_64 rng(cfg.seed);
  if (cfg.init == InitMethod::kKmeansPlusPlusOnSample) return kmeanspp(data, cfg.k, rng);
  const auto ids = sample_rows(data.rows(), cfg.k, rng);
  Matrix centers(cfg.k, data.dim());
  for (std::size_t c = 0; c < cfg.k; ++c) {
    const auto src = data.row(ids[c]);
    std::copy(src.begin(), src.end(), centers.row(c).begin());
  }
  return centers;
}

ClusterResult lloyd_kmeans(const EmbeddingMatrix& data, const ClusterConfig& cfg) {
  Matrix centroids = initial_centroids(data, cfg);
  auto assigned = assign_rows(data.matrix(), centroids, squared_row_norms(centroids), cfg.threads);
  std::vector<double> trace{assigned.sse};
  std::size_t iters = 0;
  std::size_t reseeded = 0;
  while (iters < cfg.max_iters) {
    reseeded += update_centroids(data, assigned.ids, centroids);
    ++iters;
    assigned = assign_rows(data.matrix(), centroids, squared_row_norms(centroids), cfg.threads);
    const double prev = trace.back();
    trace.push_back(assigned.sse);
    if (prev - assigned.sse <= cfg.tol * prev) break;
  }
  CodebookMetadata meta;
  meta.seed = cfg.seed;
  meta.k_requested = cfg.k;
  meta.coarse_iters = iters;
  return ClusterResult{Codebook(std::move(centroids), std::move(meta)), std::move(assigned.ids),
                       std::move(trace), iters, reseeded};
}

std::vector<std::size_t> fine_quotas(std::span<const std::size_t> bucket_sizes, std::size_t k,
                                     FineAllocation allocation,
                                     std::size_t* remainder_distributed) {
  const std::size_t k1 = bucket_sizes.size();
  std::vector<std::size_t> quotas(k1, 0);
  if (remainder_distributed) *remainder_distributed = 0;
  if (allocation == FineAllocation::kFixed) {
    std::fill(quotas.begin(), quotas.end(), k / k1);
    const std::size_t rem = k % k1;
    std::vector<std::size_t> order(k1);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return bucket_sizes[a] > bucket_sizes[b];
    });
    for (std::size_t r = 0; r < rem; ++r) ++quotas[order[r]];
    if (remainder_distributed) *remainder_distributed = rem;
  } else {
    const std::size_t n = std::accumulate(bucket_sizes.begin(), bucket_sizes.end(), std::size_t{0});
    for (std::size_t c = 0; c < k1; ++c) {
      // ceil(k * |bucket| / N) in integers.
      quotas[c] = n == 0 ? 0 : (k * bucket_sizes[c] + n - 1) / n;
    }
  }
  return quotas;
}

TwoStageResult two_stage_cluster(const EmbeddingMatrix& data, std::size_t k, std::size_t k1,
                                 const ClusterConfig& cfg, FineAllocation allocation) {
  if (k1 < 1 || k < 1) fail(ErrorCode::kInvalidConfig, "k and k1 must be >= 1");
  if (k1 > k) fail(ErrorCode::kInvalidConfig, "k1 must not exceed k");
  if (k1 > data.rows()) {
    fail(ErrorCode::kInvalidConfig, "k1 = " + std::to_string(k1) + " exceeds n_rows = " +
                                        std::to_string(data.rows()));
  }
  if (k > data.rows()) {
    fail(ErrorCode::kInvalidConfig, "k = " + std::to_string(k) + " exceeds n_rows = " +
                                        std::to_string(data.rows()));
  }
  ClusterConfig coarse_cfg = cfg;
  coarse_cfg.k = k1;
  const ClusterResult coarse = lloyd_kmeans(data, coarse_cfg);

  std::vector<std::vector<std::size_t>> members(k1);
  for (std::size_t i = 0; i < data.rows(); ++i) members[coarse.assignments[i]].push_back(i);

  TwoStageResult out{coarse.codebook, HierarchicalIndex(coarse.codebook.centroids(),
                                                        std::vector<TokenId>(k1)),
                     {}, 0.0, k, 0, {}, {}, 0, 0, coarse.iters_run, 0};
  out.bucket_sizes.resize(k1);
  for (std::size_t c = 0; c < k1; ++c) out.bucket_sizes[c] = members[c].size();
  out.quotas = fine_quotas(out.bucket_sizes, k, allocation, &out.remainder_distributed);

  struct CellOutput {
    Matrix centroids;
    std::vector<TokenId> local_ids;
    double sse = 0.0;
    std::size_t iters = 0;
  };
  std::vector<CellOutput> cells(k1);
  const std::size_t inner_threads = k1 == 1 ? cfg.threads : 1;
  for_each_chunk(k1, 1, k1 == 1 ? 1 : cfg.threads, [&](std::size_t c, std::size_t, std::size_t) {
    const auto& rows = members[c];
    CellOutput& cell = cells[c];
    const std::size_t quota = out.quotas[c];
    if (rows.empty() || quota == 0) return;
    const EmbeddingMatrix subset = data.gather(rows);
    if (rows.size() < quota) {
      // One centroid per point.
      cell.centroids = subset.matrix();
      cell.local_ids.resize(rows.size());
      std::iota(cell.local_ids.begin(), cell.local_ids.end(), TokenId{0});
      return;
    }
    ClusterConfig fine_cfg = cfg;
    fine_cfg.k = quota;
    fine_cfg.seed = cfg.seed + static_cast<std::uint64_t>(c) * kSeedStride;
    fine_cfg.threads = inner_threads;
    ClusterResult fine = lloyd_kmeans(subset, fine_cfg);
    cell.centroids = fine.codebook.centroids();
    cell.local_ids = std::move(fine.assignments);
    cell.sse = fine.sse();
    cell.iters = fine.iters_run;
  });

  Matrix all(0, data.dim());
  std::vector<TokenId> parents;
  out.assignments.assign(data.rows(), 0);
  for (std::size_t c = 0; c < k1; ++c) {
    const CellOutput& cell = cells[c];
    if (members[c].size() < out.quotas[c] && !members[c].empty()) ++out.undersized_buckets;
    const auto offset = static_cast<TokenId>(all.rows());
    for (std::size_t r = 0; r < cell.centroids.rows(); ++r) {
      all.append_row(cell.centroids.row(r));
      parents.push_back(static_cast<TokenId>(c));
    }
    for (std::size_t j = 0; j < cell.local_ids.size(); ++j) {
      out.assignments[members[c][j]] = offset + cell.local_ids[j];
    }
    out.sse += cell.sse;
    out.fine_iters_total += cell.iters;
  }
  out.k_final = all.rows();

  CodebookMetadata meta;
  meta.seed = cfg.seed;
  meta.source_sha256 = sha256_hex_of(data.values());
  meta.k_requested = k;
  meta.coarse_iters = out.coarse_iters;
  meta.fine_iters_total = out.fine_iters_total;
  out.codebook = Codebook::unchecked(std::move(all), std::move(meta));
  out.index = HierarchicalIndex(coarse.codebook.centroids(), std::move(parents));
  return out;
}

FilterResult filter_invalid_centroids(const Codebook& codebook) {
  FilterResult out{codebook, std::vector<TokenId>(codebook.k(), kRemoved), 0};
  Matrix kept(0, codebook.dim());
  for (std::size_t i = 0; i < codebook.k(); ++i) {
    const auto row = codebook.centroid(static_cast<TokenId>(i));
    if (!row_is_finite(row)) {
      ++out.removed;
      continue;
    }
    out.remap[i] = static_cast<TokenId>(kept.rows());
    kept.append_row(row);
  }
  if (kept.rows() == 0) fail(ErrorCode::kEmptyCodebook, "every centroid is non-finite");
  out.codebook = Codebook(std::move(kept), codebook.metadata());
  return out;
}

HierarchicalIndex remap_index(const HierarchicalIndex& index, std::span<const TokenId> remap) {
  if (remap.size() != index.k_fine()) fail(ErrorCode::kShape, "remap length differs from K");
  std::vector<TokenId> parents;
  for (std::size_t old = 0; old < remap.size(); ++old) {
    if (remap[old] == kRemoved) continue;
    if (remap[old] != parents.size()) {
      fail(ErrorCode::kValidation, "remap is not order-preserving");
    }
    parents.push_back(index.parents()[old]);
  }
  return HierarchicalIndex(index.coarse_centroids(), std::move(parents));
}

}  // namespace uc2
