#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "support.hpp"
#include "uc2/core_types.hpp"
#include "uc2/error.hpp"

using namespace uc2;

namespace {

constexpr float kNaN = std::numeric_limits<float>::quiet_NaN();
constexpr float kInf = std::numeric_limits<float>::infinity();

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

}  // namespace

TEST_CASE("validate reports every non-finite position") {
  CHECK(validate(Matrix(2, 2)).empty());

  Matrix one(2, 2);
  one(1, 0) = kNaN;
  CHECK(validate(one) == std::vector<Position>{{1, 0}});

  Matrix two(3, 4);
  two(0, 3) = kInf;
  two(2, 2) = kNaN;
  CHECK(validate(two) == std::vector<Position>{{0, 3}, {2, 2}});
}

TEST_CASE("embedding matrix invariants") {
  CHECK(code_of([] { EmbeddingMatrix(Matrix(0, 3)); }) == ErrorCode::kShape);
  CHECK(code_of([] { EmbeddingMatrix(Matrix(3, 0)); }) == ErrorCode::kShape);
  Matrix bad(2, 2);
  bad(1, 1) = -kInf;
  CHECK(code_of([&] { EmbeddingMatrix{bad}; }) == ErrorCode::kValidation);

  const auto e = test::random_embeddings(5, 3, 1);
  const std::vector<std::size_t> pick{4, 0};
  const auto g = e.gather(pick);
  REQUIRE(g.rows() == 2);
  CHECK(std::equal(g.row(0).begin(), g.row(0).end(), e.row(4).begin()));
  CHECK(std::equal(g.row(1).begin(), g.row(1).end(), e.row(0).begin()));
}

TEST_CASE("matrix shape checks") {
  CHECK(code_of([] { Matrix(2, 2, std::vector<float>(3)); }) == ErrorCode::kShape);
  Matrix m;
  m.append_row(std::vector<float>{1, 2});
  m.append_row(std::vector<float>{3, 4});
  CHECK(m.rows() == 2);
  CHECK(m(1, 0) == 3.0f);
  CHECK(code_of([&] { m.append_row(std::vector<float>{1}); }) == ErrorCode::kShape);
}

TEST_CASE("codebook rejects non-finite and empty tables") {
  CHECK(code_of([] { Codebook(Matrix(0, 2)); }) == ErrorCode::kEmptyCodebook);
  Matrix bad(3, 2);
  bad(2, 0) = kNaN;
  CHECK(code_of([&] { Codebook{bad}; }) == ErrorCode::kValidation);
  const auto raw = Codebook::unchecked(bad);
  CHECK_FALSE(raw.all_finite());

  const Codebook cb(test::random_matrix(4, 3, 2));
  CHECK(cb.all_finite());
  for (std::size_t k = 0; k < cb.k(); ++k) {
    double n = 0;
    for (float v : cb.centroid(static_cast<TokenId>(k))) n += double(v) * v;
    CHECK(cb.squared_norms()[k] == doctest::Approx(n).epsilon(1e-12));
  }
}

TEST_CASE("hierarchical index buckets partition the fine ids") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k1 = 1 + rng() % 6;
    const std::size_t k = k1 + rng() % 40;
    std::vector<TokenId> parents(k);
    for (std::size_t i = 0; i < k; ++i) parents[i] = static_cast<TokenId>(i < k1 ? i : rng() % k1);
    std::shuffle(parents.begin(), parents.end(), rng);
    const HierarchicalIndex index(test::random_matrix(k1, 2, trial), parents);
    std::vector<TokenId> all;
    for (std::size_t c = 0; c < k1; ++c) {
      const auto b = index.bucket(c);
      CHECK(std::is_sorted(b.begin(), b.end()));
      for (TokenId id : b) CHECK(parents[id] == c);
      all.insert(all.end(), b.begin(), b.end());
    }
    std::sort(all.begin(), all.end());
    std::vector<TokenId> expect(k);
    std::iota(expect.begin(), expect.end(), TokenId{0});
    CHECK(all == expect);
  }
}

TEST_CASE("hierarchical index rejects broken partitions") {
  const auto coarse = test::random_matrix(2, 2, 4);
  CHECK(code_of([&] { HierarchicalIndex(coarse, {0, 5}); }) == ErrorCode::kOutOfVocabulary);
  CHECK(code_of([&] { HierarchicalIndex(test::random_matrix(3, 2, 4), {0, 1}); }) ==
        ErrorCode::kInvalidConfig);
  CHECK(code_of([&] { HierarchicalIndex::from_buckets(coarse, {{0, 1}, {1}}, 2); }) ==
        ErrorCode::kValidation);
  CHECK(code_of([&] { HierarchicalIndex::from_buckets(coarse, {{0}, {2}}, 3); }) ==
        ErrorCode::kValidation);
  const auto ok = HierarchicalIndex::from_buckets(coarse, {{2, 0}, {1}}, 3);
  CHECK(ok.parents()[0] == 0);
  CHECK(ok.parents()[1] == 1);
  CHECK(ok.parents()[2] == 0);
}

TEST_CASE("assignment histogram") {
  auto h = AssignmentHistogram::from_ids(std::vector<TokenId>{0, 2, 2, 3}, 4);
  CHECK(h.total() == 4);
  CHECK(h.counts()[2] == 2);
  CHECK(code_of([&] { h.add(4); }) == ErrorCode::kOutOfVocabulary);

  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t k = 1 + rng() % 50;
    AssignmentHistogram r(k);
    const std::size_t n = 1 + rng() % 1000;
    for (std::size_t i = 0; i < n; ++i) r.add(static_cast<TokenId>(rng() % k));
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) sum += r.probability(i);
    CHECK(std::abs(sum - 1.0) <= 1e-12);
    CHECK(std::accumulate(r.counts().begin(), r.counts().end(), std::uint64_t{0}) == r.total());
  }

  AssignmentHistogram a(3), b(3);
  a.add(0);
  b.add(0);
  b.add(2);
  a.merge(b);
  CHECK(a.total() == 3);
  CHECK(a.counts()[0] == 2);
  CHECK(code_of([&] { a.merge(AssignmentHistogram(2)); }) == ErrorCode::kShape);
}

TEST_CASE("token sequence validates ids") {
  const TokenSequence s({0, 1, 2}, 3);
  CHECK(s.size() == 3);
  CHECK(code_of([] { TokenSequence({0, 3}, 3); }) == ErrorCode::kOutOfVocabulary);
}

TEST_CASE("labeled embeddings need one label per row") {
  const auto e = test::random_embeddings(3, 2, 6);
  CHECK(code_of([&] { LabeledEmbeddings(e, {0, 1}, 2); }) == ErrorCode::kShape);
  CHECK(code_of([&] { LabeledEmbeddings(e, {0, 1, 2}, 2); }) == ErrorCode::kOutOfVocabulary);
  const LabeledEmbeddings ok(e, {0, 1, 1}, 2);
  CHECK(ok.num_labels == 2);
}

TEST_CASE("l2 normalization is opt-in and skips zero rows") {
  Matrix m(2, 2);
  m(0, 0) = 3;
  m(0, 1) = 4;
  l2_normalize_rows(m);
  CHECK(m(0, 0) == doctest::Approx(0.6));
  CHECK(m(0, 1) == doctest::Approx(0.8));
  CHECK(m(1, 0) == 0.0f);
}

TEST_CASE("exit status mapping") {
  CHECK(exit_status_for(ErrorCode::kInvalidConfig) == 1);
  CHECK(exit_status_for(ErrorCode::kIo) == 2);
  CHECK(exit_status_for(ErrorCode::kBadMagic) == 2);
  CHECK(exit_status_for(ErrorCode::kTruncated) == 2);
  CHECK(exit_status_for(ErrorCode::kDivergence) == 3);
  CHECK(error_code_name(ErrorCode::kBadVersion) == "bad_version");
}
