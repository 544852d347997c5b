#pragma once

// Distance kernels. Inputs are float32, every accumulation is float64.
//
// Each ISA variant must satisfy: dot_block(q, rows, n, d, out)[j] is
// bit-identical to dot(q, rows + j*d, d) within that variant, so batched and
// single-row searches agree exactly. Across variants results agree to within
// floating-point reassociation only.

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace uc2::kernels {

enum class Isa { kScalar, kAvx2, kNeon };

struct KernelTable {
  Isa isa;
  const char* name;
  double (*dot)(const float* a, const float* b, std::size_t dim);
  double (*squared_l2)(const float* a, const float* b, std::size_t dim);
  void (*dot_block)(const float* query, const float* rows, std::size_t n_rows,
                    std::size_t dim, double* out);
};

// Variant tables; the non-scalar ones exist only when compiled in.
const KernelTable& scalar_table() noexcept;
const KernelTable* avx2_table() noexcept;
const KernelTable* neon_table() noexcept;

bool isa_supported(Isa isa) noexcept;
std::optional<Isa> parse_isa(std::string_view name) noexcept;
std::vector<Isa> supported_isas();

// Best supported variant, overridable with UC2_ISA=scalar|avx2|neon.
const KernelTable& active() noexcept;
// Pins the active table (tests, benchmarks). Returns false when unsupported.
bool force_isa(Isa isa) noexcept;

inline double dot(std::span<const float> a, std::span<const float> b) noexcept {
  return active().dot(a.data(), b.data(), a.size());
}
inline double squared_norm(std::span<const float> a) noexcept {
  return active().dot(a.data(), a.data(), a.size());
}
inline double squared_l2(std::span<const float> a, std::span<const float> b) noexcept {
  return active().squared_l2(a.data(), b.data(), a.size());
}

// The expanded squared distance. Every search path evaluates it through this
// one expression so that exact and hierarchical scans agree bit for bit.
inline double expanded_distance(double query_norm, double row_norm, double dot) noexcept {
  return (query_norm + row_norm) - 2.0 * dot;
}

struct Nearest {
  std::size_t index;
  double distance;
};

// argmin_j ||q - r_j||^2 over a contiguous block of rows via the expanded
// form ||q||^2 - 2 q.r + ||r||^2. Ties go to the lowest index. scratch must
// hold at least n_rows doubles.
Nearest nearest_in_block(std::span<const float> query, double query_norm, const float* rows,
                         const double* row_norms, std::size_t n_rows, double* scratch) noexcept;

}  // namespace uc2::kernels
