#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>

#include "support.hpp"
#include "uc2/cascade_train.hpp"
#include "uc2/contrastive.hpp"
#include "uc2/error.hpp"

using namespace uc2;

namespace {

template <typename Fn>
ErrorCode code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an uc2::Error");
  return ErrorCode::kIo;
}

MatrixD random_d(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  MatrixD m(rows, cols);
  for (double& v : m.values()) v = normal(rng);
  return m;
}

// Softmax cross-entropy written out term by term.
double naive_loss(const MatrixD& p, const MatrixD& z, double tau) {
  const std::size_t b = p.rows();
  auto cosine = [&](std::size_t i, std::size_t j) {
    double dot = 0, np = 0, nz = 0;
    for (std::size_t c = 0; c < p.cols(); ++c) {
      dot += p(i, c) * z(j, c);
      np += p(i, c) * p(i, c);
      nz += z(j, c) * z(j, c);
    }
    return dot / std::sqrt(np * nz);
  };
  double loss = 0;
  for (std::size_t i = 0; i < b; ++i) {
    double denom = 0;
    for (std::size_t j = 0; j < b; ++j) denom += std::exp(cosine(i, j) / tau);
    loss += -std::log(std::exp(cosine(i, i) / tau) / denom);
  }
  return loss / double(b);
}

CascadedCodebook small_cascade(std::size_t k, std::size_t d, std::size_t d2, std::uint64_t seed) {
  auto frozen = std::make_shared<const Codebook>(test::random_matrix(k, d, seed));
  return CascadedCodebook(frozen, nullptr, d2, seed + 1);
}

}  // namespace

TEST_CASE("projection") {
  const MatrixD x = random_d(4, 3, 71);
  CHECK(project_tokens(x, ProjectionMap::identity(3)) == x);

  ProjectionMap bias_only(MatrixD(2, 3), {0.5, -1.5});
  const auto y = project_tokens(x, bias_only);
  for (std::size_t t = 0; t < 4; ++t) {
    CHECK(y(t, 0) == 0.5);
    CHECK(y(t, 1) == -1.5);
  }

  const auto map = ProjectionMap::random(3, 5, 72);
  const auto out = project_tokens(x, map);
  for (std::size_t t = 0; t < 4; ++t) {
    for (std::size_t r = 0; r < 5; ++r) {
      double want = map.bias[r];
      for (std::size_t c = 0; c < 3; ++c) want += map.weights(r, c) * x(t, c);
      CHECK(std::abs(out(t, r) - want) <= 1e-6);
    }
  }
  CHECK(code_of([&] { project_tokens(random_d(2, 4, 1), map); }) == ErrorCode::kShape);
}

TEST_CASE("mean pooling") {
  const MatrixD one = random_d(1, 4, 73);
  const auto p1 = pool_sequence(one);
  CHECK(std::equal(p1.begin(), p1.end(), one.row(0).begin()));

  MatrixD pm(2, 3);
  for (std::size_t c = 0; c < 3; ++c) {
    pm(0, c) = double(c) + 0.25;
    pm(1, c) = -pm(0, c);
  }
  for (double v : pool_sequence(pm)) CHECK(v == 0.0);

  const MatrixD r = random_d(5, 3, 74);
  const auto pr = pool_sequence(r);
  for (std::size_t c = 0; c < 3; ++c) {
    double s = 0;
    for (std::size_t t = 0; t < 5; ++t) s += r(t, c);
    CHECK(std::abs(pr[c] - s / 5) <= 1e-15);
  }
  CHECK(code_of([] { pool_sequence(MatrixD(0, 3)); }) == ErrorCode::kEmptySequence);
}

TEST_CASE("contrastive loss values") {
  CHECK(contrastive_loss(random_d(1, 4, 75), random_d(1, 4, 76), 0.07) == 0.0);

  MatrixD same(3, 4);
  MatrixD prompts(3, 4);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t c = 0; c < 4; ++c) {
      same(i, c) = double(c) + 1.0;
      prompts(i, c) = 2.0 - double(c);
    }
  }
  CHECK(std::abs(contrastive_loss(same, prompts, 0.3) - std::log(3.0)) <= 1e-12);

  const auto p = random_d(3, 4, 77);
  const auto z = random_d(3, 4, 78);
  for (double tau : {0.07, 0.5, 3.0}) {
    CHECK(std::abs(contrastive_loss(p, z, tau) - naive_loss(p, z, tau)) <= 1e-9);
  }

  MatrixD zero_row = p;
  for (double& v : zero_row.row(1)) v = 0.0;
  CHECK(code_of([&] { contrastive_loss(zero_row, z, 1.0); }) == ErrorCode::kDegenerateSimilarity);
  CHECK(code_of([&] { contrastive_loss(p, z, 0.0); }) == ErrorCode::kInvalidConfig);
}

TEST_CASE("contrastive loss bounds") {
  std::mt19937_64 rng(79);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t b = 1 + rng() % 8;
    const double tau = 0.05 + (rng() % 1000) / 200.0;
    const double l = contrastive_loss(random_d(b, 5, rng()), random_d(b, 5, rng()), tau);
    CHECK(l >= 0.0);
    CHECK(l <= std::log(double(b)) + 2.0 / tau + 1e-12);
  }
}

TEST_CASE("gradient of a single-pair batch is exactly zero") {
  const auto cascade = small_cascade(5, 3, 3, 80);
  const auto map = ProjectionMap::random(3, 4, 81);
  ContrastiveBatch batch{{TokenSequence({1, 2}, 5)}, random_d(1, 4, 82)};
  const auto g = contrastive_grad(batch, cascade, map, 0.5);
  CHECK(g.loss == 0.0);
  for (double v : g.d_weights.values()) CHECK(v == 0.0);
  for (double v : g.d_bias) CHECK(v == 0.0);
  for (const auto& [id, row] : g.d_rows) {
    for (double v : row) CHECK(v == 0.0);
  }
}

TEST_CASE("gradients scale as 1/tau at large tau") {
  const auto cascade = small_cascade(6, 4, 4, 83);
  const auto map = ProjectionMap::random(4, 4, 84);
  ContrastiveBatch batch{{TokenSequence({0, 1}, 6), TokenSequence({2, 3, 4}, 6), TokenSequence({5}, 6)},
                         random_d(3, 4, 85)};
  const auto a = contrastive_grad(batch, cascade, map, 1e6);
  const auto b = contrastive_grad(batch, cascade, map, 2e6);
  // Components can cancel to near zero, so compare against the largest magnitude.
  double scale = 0.0, worst = 0.0;
  auto visit = [&](double x, double y) {
    scale = std::max(scale, std::abs(x));
    worst = std::max(worst, std::abs(x - 2.0 * y));
  };
  for (std::size_t i = 0; i < a.d_weights.size(); ++i) visit(a.d_weights.values()[i], b.d_weights.values()[i]);
  for (std::size_t i = 0; i < a.d_bias.size(); ++i) visit(a.d_bias[i], b.d_bias[i]);
  for (const auto& [id, row] : a.d_rows) {
    for (std::size_t c = 0; c < row.size(); ++c) visit(row[c], b.d_rows.at(id)[c]);
  }
  REQUIRE(scale > 0.0);
  CHECK(worst <= 1e-6 * scale);
}

TEST_CASE("only referenced C2 rows receive gradient") {
  const auto cascade = small_cascade(10, 3, 3, 86);
  const auto map = ProjectionMap::random(3, 3, 87);
  ContrastiveBatch batch{{TokenSequence({1, 4}, 10), TokenSequence({4, 8}, 10)}, random_d(2, 3, 88)};
  const auto g = contrastive_grad(batch, cascade, map, 0.2);
  std::vector<TokenId> keys;
  for (const auto& [id, row] : g.d_rows) keys.push_back(id);
  CHECK(keys == std::vector<TokenId>{1, 4, 8});
  CHECK(std::abs(g.loss - batch_loss(batch, cascade, map, 0.2)) <= 1e-15);
}

TEST_CASE("finite differences on the B=2 T=3 instance") {
  auto cascade = small_cascade(6, 4, 4, 89);
  const auto map = ProjectionMap::random(4, 4, 90);
  GradCheckInstance inst{cascade, map,
                         {{TokenSequence({0, 2, 5}, 6), TokenSequence({1, 2, 3}, 6)}, random_d(2, 4, 91)},
                         0.5};
  REQUIRE(min_similarity_norm(inst) > 0.0);
  const auto r = finite_difference_check(inst, 1e-4);
  CHECK(r.components == 16 + 4 + 24);
  CHECK(r.max_rel_error <= 1e-4);
}

TEST_CASE("finite differences on random instances") {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto inst = random_grad_instance(seed);
    CHECK(inst.batch.sequences.size() <= 4);
    CHECK(inst.map.d_in() <= 8);
    CHECK(inst.map.d_out() <= 8);
    CHECK(inst.cascade.d() <= 8);
    for (const auto& s : inst.batch.sequences) CHECK(s.size() <= 4);
    CHECK(min_similarity_norm(inst) >= kMinGradCheckNorm);
    worst = std::max(worst, finite_difference_check(inst, 1e-4).max_rel_error);
  }
  MESSAGE("max relative error over 40 instances: " << worst);
  CHECK(worst <= 1e-4);
}

TEST_CASE("residual finite-difference error is truncation, shrinking as eps^2") {
  // The two instances over seeds 0..999 whose error at eps = 1e-4 exceeds 1e-4.
  for (std::uint64_t seed : {191u, 882u}) {
    const auto inst = random_grad_instance(seed);
    const double coarse = finite_difference_check(inst, 1e-4).max_rel_error;
    const double fine = finite_difference_check(inst, 3e-5).max_rel_error;
    CAPTURE(seed);
    CAPTURE(coarse);
    CAPTURE(fine);
    // (1e-4 / 3e-5)^2 = 11.1; allow slack for roundoff.
    CHECK(fine <= coarse / 8.0);
    CHECK(fine <= 1e-4);
  }
}
