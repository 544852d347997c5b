// Compiled with -mavx2 -mfma; reached only through the runtime dispatcher.
// Keep this file free of std templates so no AVX-encoded inline copies leak
// into the rest of the link.

#include <immintrin.h>

#include "uc2/kernels.hpp"

namespace uc2::kernels {
namespace {

inline __m256d widen(const float* p) { return _mm256_cvtps_pd(_mm_loadu_ps(p)); }

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d pair = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(pair, _mm_unpackhi_pd(pair, pair)));
}

inline double tail_dot(const float* a, const float* b, std::size_t from, std::size_t dim,
                       double acc) {
  for (std::size_t i = from; i < dim; ++i) {
    acc = __builtin_fma(static_cast<double>(a[i]), static_cast<double>(b[i]), acc);
  }
  return acc;
}

double dot_avx2(const float* a, const float* b, std::size_t dim) {
  const std::size_t body = dim & ~std::size_t{3};
  __m256d acc = _mm256_setzero_pd();
  for (std::size_t i = 0; i < body; i += 4) {
    acc = _mm256_fmadd_pd(widen(a + i), widen(b + i), acc);
  }
  return tail_dot(a, b, body, dim, hsum(acc));
}

double squared_l2_avx2(const float* a, const float* b, std::size_t dim) {
  const std::size_t body = dim & ~std::size_t{3};
  __m256d acc = _mm256_setzero_pd();
  for (std::size_t i = 0; i < body; i += 4) {
    const __m256d diff = _mm256_sub_pd(widen(a + i), widen(b + i));
    acc = _mm256_fmadd_pd(diff, diff, acc);
  }
  double s = hsum(acc);
  for (std::size_t i = body; i < dim; ++i) {
    const double diff = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s = __builtin_fma(diff, diff, s);
  }
  return s;
}

// Four rows per pass share each widened query chunk. Per row the operation
// sequence is exactly the one in dot_avx2.
void dot_block_avx2(const float* query, const float* rows, std::size_t n_rows,
                    std::size_t dim, double* out) {
  const std::size_t body = dim & ~std::size_t{3};
  std::size_t j = 0;
  for (; j + 4 <= n_rows; j += 4) {
    const float* r0 = rows + (j + 0) * dim;
    const float* r1 = rows + (j + 1) * dim;
    const float* r2 = rows + (j + 2) * dim;
    const float* r3 = rows + (j + 3) * dim;
    __m256d a0 = _mm256_setzero_pd();
    __m256d a1 = _mm256_setzero_pd();
    __m256d a2 = _mm256_setzero_pd();
    __m256d a3 = _mm256_setzero_pd();
    for (std::size_t i = 0; i < body; i += 4) {
      const __m256d q = widen(query + i);
      a0 = _mm256_fmadd_pd(q, widen(r0 + i), a0);
      a1 = _mm256_fmadd_pd(q, widen(r1 + i), a1);
      a2 = _mm256_fmadd_pd(q, widen(r2 + i), a2);
      a3 = _mm256_fmadd_pd(q, widen(r3 + i), a3);
    }
    out[j + 0] = tail_dot(query, r0, body, dim, hsum(a0));
    out[j + 1] = tail_dot(query, r1, body, dim, hsum(a1));
    out[j + 2] = tail_dot(query, r2, body, dim, hsum(a2));
    out[j + 3] = tail_dot(query, r3, body, dim, hsum(a3));
  }
  for (; j < n_rows; ++j) out[j] = dot_avx2(query, rows + j * dim, dim);
}

constexpr KernelTable kAvx2{Isa::kAvx2, "avx2", dot_avx2, squared_l2_avx2, dot_block_avx2};

}  // namespace

const KernelTable* avx2_table() noexcept { return &kAvx2; }

}  // namespace uc2::kernels
