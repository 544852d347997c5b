#pragma once

// Bulk exact nearest-centroid assignment shared by clustering and quantize.

#include <cstddef>
#include <span>
#include <vector>

#include "uc2/core_types.hpp"

namespace uc2 {

struct RowAssignment {
  std::vector<TokenId> ids;
  // Squared distance to the chosen centroid, recomputed in the direct
  // (a - b)^2 form so it is never negative.
  std::vector<double> distances;
  double sse = 0.0;
};

std::vector<double> squared_row_norms(const Matrix& m);

// Exact argmin per row over all centroid rows; ties go to the lowest id.
// Parallel over rows; the result does not depend on `threads`.
RowAssignment assign_rows(const Matrix& rows, const Matrix& centroids,
                          std::span<const double> centroid_norms, std::size_t threads = 0);

inline RowAssignment assign_rows(const EmbeddingMatrix& data, const Codebook& codebook,
                                 std::size_t threads = 0) {
  return assign_rows(data.matrix(), codebook.centroids(), codebook.squared_norms(), threads);
}

}  // namespace uc2
