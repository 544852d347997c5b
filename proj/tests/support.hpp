#pragma once

// Test oracles and fixtures. Oracles here are deliberately naive and share no
// code with the library beyond its data types.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "uc2/core_types.hpp"

namespace uc2::test {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed,
                            double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  Matrix m(rows, cols);
  for (float& v : m.values()) v = static_cast<float>(normal(rng));
  return m;
}

inline EmbeddingMatrix random_embeddings(std::size_t rows, std::size_t cols, std::uint64_t seed,
                                         double scale = 1.0) {
  return EmbeddingMatrix(random_matrix(rows, cols, seed, scale));
}

inline double naive_sq_dist(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double diff = static_cast<double>(a[j]) - static_cast<double>(b[j]);
    s += diff * diff;
  }
  return s;
}

// Exhaustive subtract-square scan, lowest id on ties.
inline TokenId brute_nearest(std::span<const float> e, const Matrix& centroids) {
  TokenId best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < centroids.rows(); ++k) {
    const double d = naive_sq_dist(e, centroids.row(k));
    if (d < best_d) {
      best_d = d;
      best = static_cast<TokenId>(k);
    }
  }
  return best;
}

inline double rel_diff(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("uc2_test_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace uc2::test
