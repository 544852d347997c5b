#include "uc2/kernels.hpp"

namespace uc2::kernels {
namespace {

double dot_scalar(const float* a, const float* b, std::size_t dim) {
  double acc = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return acc;
}

double squared_l2_scalar(const float* a, const float* b, std::size_t dim) {
  double acc = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    const double diff = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += diff * diff;
  }
  return acc;
}

void dot_block_scalar(const float* query, const float* rows, std::size_t n_rows,
                      std::size_t dim, double* out) {
  for (std::size_t j = 0; j < n_rows; ++j) out[j] = dot_scalar(query, rows + j * dim, dim);
}

constexpr KernelTable kScalar{Isa::kScalar, "scalar", dot_scalar, squared_l2_scalar,
                              dot_block_scalar};

}  // namespace

const KernelTable& scalar_table() noexcept { return kScalar; }

}  // namespace uc2::kernels
