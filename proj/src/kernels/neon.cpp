// AArch64 variant. Same per-row operation order contract as avx2.cpp, with
// two float64 lanes per accumulator.

#include <arm_neon.h>

#include "uc2/kernels.hpp"

namespace uc2::kernels {
namespace {

inline double tail_dot(const float* a, const float* b, std::size_t from, std::size_t dim,
                       double acc) {
  for (std::size_t i = from; i < dim; ++i) {
    acc = __builtin_fma(static_cast<double>(a[i]), static_cast<double>(b[i]), acc);
  }
  return acc;
}

double dot_neon(const float* a, const float* b, std::size_t dim) {
  const std::size_t body = dim & ~std::size_t{1};
  float64x2_t acc = vdupq_n_f64(0.0);
  for (std::size_t i = 0; i < body; i += 2) {
    acc = vfmaq_f64(acc, vcvt_f64_f32(vld1_f32(a + i)), vcvt_f64_f32(vld1_f32(b + i)));
  }
  return tail_dot(a, b, body, dim, vaddvq_f64(acc));
}

double squared_l2_neon(const float* a, const float* b, std::size_t dim) {
  const std::size_t body = dim & ~std::size_t{1};
  float64x2_t acc = vdupq_n_f64(0.0);
  for (std::size_t i = 0; i < body; i += 2) {
    const float64x2_t diff =
        vsubq_f64(vcvt_f64_f32(vld1_f32(a + i)), vcvt_f64_f32(vld1_f32(b + i)));
    acc = vfmaq_f64(acc, diff, diff);
  }
  double s = vaddvq_f64(acc);
  for (std::size_t i = body; i < dim; ++i) {
    const double diff = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s = __builtin_fma(diff, diff, s);
  }
  return s;
}

void dot_block_neon(const float* query, const float* rows, std::size_t n_rows,
                    std::size_t dim, double* out) {
  const std::size_t body = dim & ~std::size_t{1};
  std::size_t j = 0;
  for (; j + 2 <= n_rows; j += 2) {
    const float* r0 = rows + j * dim;
    const float* r1 = r0 + dim;
    float64x2_t a0 = vdupq_n_f64(0.0);
    float64x2_t a1 = vdupq_n_f64(0.0);
    for (std::size_t i = 0; i < body; i += 2) {
      const float64x2_t q = vcvt_f64_f32(vld1_f32(query + i));
      a0 = vfmaq_f64(a0, q, vcvt_f64_f32(vld1_f32(r0 + i)));
      a1 = vfmaq_f64(a1, q, vcvt_f64_f32(vld1_f32(r1 + i)));
    }
    out[j] = tail_dot(query, r0, body, dim, vaddvq_f64(a0));
    out[j + 1] = tail_dot(query, r1, body, dim, vaddvq_f64(a1));
  }
  for (; j < n_rows; ++j) out[j] = dot_neon(query, rows + j * dim, dim);
}

constexpr KernelTable kNeon{Isa::kNeon, "neon", dot_neon, squared_l2_neon, dot_block_neon};

}  // namespace

const KernelTable* neon_table() noexcept { return &kNeon; }

}  // namespace uc2::kernels
