#include <cstdlib>
#include <string>

#include "uc2/kernels.hpp"

namespace uc2::kernels {
namespace {

const KernelTable* table_for(Isa isa) noexcept {
  switch (isa) {
    case Isa::kScalar: return &scalar_table();
    case Isa::kAvx2: return isa_supported(Isa::kAvx2) ? avx2_table() : nullptr;
    case Isa::kNeon: return isa_supported(Isa::kNeon) ? neon_table() : nullptr;
  }
  return nullptr;
}

const KernelTable* detect() noexcept {
  if (const char* env = std::getenv("UC2_ISA")) {
    if (auto isa = parse_isa(env)) {
      if (const KernelTable* t = table_for(*isa)) return t;
    }
  }
  if (const KernelTable* t = table_for(Isa::kAvx2)) return t;
  if (const KernelTable* t = table_for(Isa::kNeon)) return t;
  return &scalar_table();
}

const KernelTable*& current() noexcept {
  static const KernelTable* table = detect();
  return table;
}

}  // namespace

bool isa_supported(Isa isa) noexcept {
  switch (isa) {
    case Isa::kScalar: return true;
    case Isa::kAvx2:
#if defined(UC2_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
      return avx2_table() != nullptr && __builtin_cpu_supports("avx2") &&
             __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::kNeon:
#if defined(UC2_HAVE_NEON)
      return neon_table() != nullptr;
#else
      return false;
#endif
  }
  return false;
}

std::optional<Isa> parse_isa(std::string_view name) noexcept {
  if (name == "scalar") return Isa::kScalar;
  if (name == "avx2") return Isa::kAvx2;
  if (name == "neon") return Isa::kNeon;
  return std::nullopt;
}

std::vector<Isa> supported_isas() {
  std::vector<Isa> out;
  for (Isa isa : {Isa::kScalar, Isa::kAvx2, Isa::kNeon}) {
    if (isa_supported(isa)) out.push_back(isa);
  }
  return out;
}

const KernelTable& active() noexcept { return *current(); }

bool force_isa(Isa isa) noexcept {
  const KernelTable* t = table_for(isa);
  if (t == nullptr) return false;
  current() = t;
  return true;
}

#if !defined(UC2_HAVE_AVX2)
const KernelTable* avx2_table() noexcept { return nullptr; }
#endif
#if !defined(UC2_HAVE_NEON)
const KernelTable* neon_table() noexcept { return nullptr; }
#endif

Nearest nearest_in_block(std::span<const float> query, double query_norm, const float* rows,
                         const double* row_norms, std::size_t n_rows, double* scratch) noexcept {
  active().dot_block(query.data(), rows, n_rows, query.size(), scratch);
  Nearest best{0, 0.0};
  bool have = false;
  for (std::size_t j = 0; j < n_rows; ++j) {
    const double d = expanded_distance(query_norm, row_norms[j], scratch[j]);
    if (!have || d < best.distance) {
      best = {j, d};
      have = true;
    }
  }
  return best;
}

}  // namespace uc2::kernels
