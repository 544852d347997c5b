#include "uc2/nearest.hpp"

#include "uc2/kernels.hpp"
#include "uc2/parallel.hpp"

namespace uc2 {

std::vector<double> squared_row_norms(const Matrix& m) {
  std::vector<double> norms(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) norms[i] = kernels::squared_norm(m.row(i));
  return norms;
}

RowAssignment assign_rows(const Matrix& rows, const Matrix& centroids,
                          std::span<const double> centroid_norms, std::size_t threads) {
  if (rows.cols() != centroids.cols()) {
    fail(ErrorCode::kShape, "dimension mismatch: rows have " + std::to_string(rows.cols()) +
                                ", centroids have " + std::to_string(centroids.cols()));
  }
  const std::size_t n = rows.rows();
  RowAssignment out;
  out.ids.resize(n);
  out.distances.resize(n);
  if (n == 0) return out;
  constexpr std::size_t kChunk = 256;
  const auto& kt = kernels::active();
  for_each_chunk(n, kChunk, threads, [&](std::size_t, std::size_t begin, std::size_t end) {
    std::vector<double> scratch(centroids.rows());
    for (std::size_t i = begin; i < end; ++i) {
      const auto q = rows.row(i);
      const double qn = kt.dot(q.data(), q.data(), q.size());
      const auto best = kernels::nearest_in_block(q, qn, centroids.data(), centroid_norms.data(),
                                                  centroids.rows(), scratch.data());
      out.ids[i] = static_cast<TokenId>(best.index);
      out.distances[i] = kt.squared_l2(q.data(), centroids.row(best.index).data(), q.size());
    }
  });
  for (double d : out.distances) out.sse += d;
  return out;
}

}  // namespace uc2
