// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "support.hpp"
#include "uc2/cascade_train.hpp"
#include "uc2/clustering.hpp"
#include "uc2/error.hpp"
#include "uc2/io.hpp"
#include "uc2/metrics.hpp"
#include "uc2/quantize.hpp"
#include "uc2/sha256.hpp"
#include "uc2/synth.hpp"

using namespace uc2;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

int failures = 0;

void criterion(int id, const char* name, double limit_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  bool pass = o.pass;
  if (limit_s > 0 && secs >= limit_s) pass = false;
  if (!pass) ++failures;
  std::printf("%s %2d %s: %s; runtime %.2fs", pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs);
  if (limit_s > 0) std::printf(" (limit %.0fs)", limit_s);
  std::printf("\n");
  std::fflush(stdout);
}

template <typename Fn>
ErrorCode code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kInvalidConfig;
}

// ---------------------------------------------------------------------------

Outcome quantizer_exactness() {
  const auto train = test::random_embeddings(20000, 16, 101);
  ClusterConfig cfg;
  cfg.max_iters = 8;
  cfg.seed = 102;
  const auto built = two_stage_cluster(train, 4096, 64, cfg);
  const Codebook& cb = built.codebook;
  const auto queries = test::random_matrix(10000, 16, 103);
  std::size_t exact_ok = 0, hier_ok = 0;
  for (std::size_t i = 0; i < queries.rows(); ++i) {
    const auto q = queries.row(i);
    const TokenId want = test::brute_nearest(q, cb.centroids());
    exact_ok += quantize_exact(q, cb) == want;
    hier_ok += quantize_hierarchical(q, cb, built.index, built.index.k1()).id == want;
  }
  const auto batch = quantize_batch(queries, cb, &built.index, SearchMode::hierarchical(built.index.k1()));
  std::size_t batch_ok = 0;
  for (std::size_t i = 0; i < queries.rows(); ++i) {
    batch_ok += batch.ids[i] == test::brute_nearest(queries.row(i), cb.centroids());
  }
  const bool pass = cb.k() == 4096 && exact_ok == 10000 && hier_ok == 10000 && batch_ok == 10000;
  return {pass, "K=" + std::to_string(cb.k()) + " exact " + std::to_string(exact_ok) + "/10000, hier(nprobe=K1) " +
                    std::to_string(hier_ok) + "/10000, batched " + std::to_string(batch_ok) +
                    "/10000 (need 100%)"};
}

Outcome gradient_gate() {
  double worst = 0.0;
  std::size_t components = 0;
  const std::size_t n = 100;
  for (std::uint64_t seed = 0; seed < n; ++seed) {
    const auto r = finite_difference_check(random_grad_instance(seed), 1e-4, 1e-6);
    worst = std::max(worst, r.max_rel_error);
    components += r.components;
  }
  return {worst <= 1e-4, std::to_string(n) + " instances, " + std::to_string(components) +
                             " components, max rel error " + fmt("%.3g", worst) + " (tol 1e-4)"};
}

Outcome decomposition_identity() {
  std::mt19937_64 rng(301);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 50 + rng() % 2000;
    const std::size_t d = 1 + rng() % 24;
    const std::size_t k = 1 + rng() % 64;
    const auto data = test::random_embeddings(n, d, rng());
    const Codebook cb(test::random_matrix(k, d, rng()));
    std::vector<TokenId> ids(n);
    if (trial % 2 == 0) {
      for (std::size_t i = 0; i < n; ++i) ids[i] = quantize_exact(data.row(i), cb);
    } else {
      for (auto& id : ids) id = TokenId(rng() % k);
    }
    const auto rep = quantization_distortion(data, cb, ids);
    worst = std::max(worst, test::rel_diff(rep.total, rep.decomposed_total()));
  }
  return {worst <= 1e-9, "50 instances, max relative gap " + fmt("%.3g", worst) + " (tol 1e-9)"};
}

Outcome entropy_analytics() {
  double worst_uniform = 0.0;
  for (std::size_t k : {1u, 2u, 7u, 256u, 8192u}) {
    AssignmentHistogram h(k);
    for (std::size_t rep = 0; rep < 3; ++rep) {
      for (std::size_t id = 0; id < k; ++id) h.add(TokenId(id));
    }
    worst_uniform = std::max(worst_uniform, std::abs(assignment_entropy(h) - std::log(double(k))));
  }
  AssignmentHistogram delta(64);
  for (int i = 0; i < 1000; ++i) delta.add(17);
  const double h_delta = assignment_entropy(delta);

  SynthSpec spec;
  spec.n = 5000;
  spec.dim = 8;
  spec.components = 16;
  spec.seed = 401;
  const auto data = gen_synth(spec).embeddings;
  ClusterConfig cfg;
  cfg.k = 256;
  cfg.seed = 402;
  const auto lloyd = lloyd_kmeans(data, cfg);
  const double u_lloyd =
      utilization(quantize_batch(data, lloyd.codebook).histogram);
  const auto two = two_stage_cluster(data, 256, 16, cfg);
  const double u_two = utilization(AssignmentHistogram::from_ids(two.assignments, two.codebook.k()));

  const bool pass = worst_uniform <= 1e-12 && h_delta == 0.0 && u_lloyd == 1.0 && u_two == 1.0;
  return {pass, "uniform |H - ln K| max " + fmt("%.3g", worst_uniform) + " (tol 1e-12), delta H " +
                    fmt("%.3g", h_delta) + ", Lloyd utilization " + fmt("%.4f", u_lloyd) +
                    ", two-stage utilization " + fmt("%.4f", u_two) + " (need 1.0)"};
}

Outcome collapse_trend();

Outcome two_stage_quality() {
  SynthSpec spec;
  spec.n = 10000;
  spec.dim = 8;
  spec.components = 32;
  spec.seed = 601;
  const auto data = gen_synth(spec).embeddings;
  ClusterConfig cfg;
  cfg.k = 256;
  cfg.max_iters = 25;
  cfg.seed = 602;
  const double lloyd = lloyd_kmeans(data, cfg).sse();
  const double two = two_stage_cluster(data, 256, 16, cfg).sse;
  const double ratio = two / lloyd;
  return {ratio <= 1.15, "two-stage SSE " + fmt("%.6g", two) + " / Lloyd SSE " + fmt("%.6g", lloyd) + " = " +
                             fmt("%.4f", ratio) + " (max 1.15, 25 iterations each)"};
}

Outcome rate_distortion_law() {
  SynthSpec spec;
  spec.distribution = SynthDistribution::kUniform;
  spec.n = 20000;
  spec.dim = 1;
  spec.seed = 701;
  ClusterConfig cfg;
  cfg.max_iters = 200;
  cfg.tol = 1e-7;
  cfg.seed = 702;
  const std::vector<std::size_t> ks1{4, 16, 64};
  const auto one = rate_distortion_scan(gen_synth(spec).embeddings, ks1, cfg);
  double worst = 0.0;
  std::string detail = "d=1";
  for (const auto& p : one.points) {
    const double want = 1.0 / (12.0 * double(p.k) * double(p.k));
    const double rel = std::abs(p.distortion - want) / want;
    worst = std::max(worst, rel);
    detail += " K=" + std::to_string(p.k) + " rel " + fmt("%.4f", rel);
  }
  spec.dim = 2;
  spec.seed = 703;
  cfg.max_iters = 50;
  cfg.tol = 1e-5;
  const std::vector<std::size_t> ks2{16, 64, 256};
  const auto two = rate_distortion_scan(gen_synth(spec).embeddings, ks2, cfg);
  const double slope = two.slope.value_or(0.0);
  detail += " (tol 0.05); d=2 slope " + fmt("%.4f", slope) + " (need [-1.2, -0.8])";
  return {worst <= 0.05 && two.slope && slope >= -1.2 && slope <= -0.8, detail};
}

Outcome mi_bound() {
  std::mt19937_64 rng(801);
  std::size_t violations = 0;
  const std::size_t trials = 200;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t n = 1 + rng() % 3000;
    const std::size_t k = 1 + rng() % 100;
    const std::size_t c = 1 + rng() % 20;
    std::vector<TokenId> v(n);
    std::vector<std::uint32_t> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      v[i] = TokenId(rng() % k);
      // Mix of independent, correlated and deterministic labels.
      y[i] = t % 3 == 0 ? std::uint32_t(rng() % c) : t % 3 == 1 ? std::uint32_t((v[i] + rng() % 2) % c)
                                                                 : std::uint32_t(v[i] % c);
    }
    const auto mi = mutual_information_estimate(v, y);
    if (!(mi.i_hat >= 0.0 && mi.i_hat <= mi.h_v + 1e-9)) ++violations;
  }
  // Bijective relabel: labels carry exactly the token information.
  std::vector<TokenId> v(5000);
  std::vector<std::uint32_t> y(5000);
  std::vector<std::uint32_t> perm(50);
  for (std::uint32_t i = 0; i < 50; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = TokenId(rng() % 50);
    y[i] = perm[v[i]] + 1000;
  }
  const auto mi = mutual_information_estimate(v, y);
  const double gap = std::abs(mi.i_hat - mi.h_v);
  return {violations == 0 && gap <= 1e-9, std::to_string(trials) + " trials, " + std::to_string(violations) +
                                              " bound violations; relabel |I - H(v)| " + fmt("%.3g", gap) +
                                              " (tol 1e-9)"};
}

Outcome frozen_anchor() {
  PairedSpec ps;
  ps.items = 256;
  ps.seed = 901;
  const auto paired = gen_paired(ps);
  Matrix patches(0, ps.dim);
  for (const auto& p : paired.dataset.patches) {
    for (std::size_t r = 0; r < p.rows(); ++r) patches.append_row(p.row(r));
  }
  ClusterConfig cfg;
  cfg.seed = 902;
  const auto built = two_stage_cluster(EmbeddingMatrix(patches), 64, 4, cfg);
  auto frozen = std::make_shared<const Codebook>(built.codebook);
  auto index = std::make_shared<const HierarchicalIndex>(built.index);
  const std::string before = checksum(*frozen);

  // The training suite: every update target, two C2 widths, both search modes.
  std::size_t runs = 0;
  bool inner_ok = true;
  for (std::size_t d2 : {std::size_t{0}, std::size_t{5}}) {
    for (int targets = 0; targets < 3; ++targets) {
      CascadedCodebook cascade(frozen, index, d2, 903);
      TrainConfig tc;
      tc.lr = 0.05;
      tc.tau_temp = 0.2;
      tc.steps = 200;
      tc.seed = 904 + runs;
      tc.update_targets = {targets != 1, targets != 2};
      const auto mode = runs % 2 == 0 ? SearchMode::exact() : SearchMode::hierarchical(2);
      const auto r = train_cascade(cascade, ProjectionMap::random(cascade.d2(), ps.prompt_dim, 905), paired.dataset,
                                   tc, nullptr, mode);
      inner_ok = inner_ok && r.frozen_checksum_before == before && r.frozen_checksum_after == before;
      ++runs;
    }
  }
  const std::string after = checksum(*frozen);
  return {inner_ok && before == after, std::to_string(runs) + " training runs, sha256 " + before.substr(0, 16) +
                                           "... before, " + after.substr(0, 16) + "... after"};
}

Outcome filtering() {
  const auto data = test::random_embeddings(4000, 8, 1001);
  ClusterConfig cfg;
  cfg.seed = 1002;
  const auto built = two_stage_cluster(data, 256, 8, cfg);
  Matrix raw = built.codebook.centroids();
  std::mt19937_64 rng(1003);
  const std::size_t injected = 9;
  std::set<std::size_t> rows;
  while (rows.size() < injected) rows.insert(rng() % raw.rows());
  int which = 0;
  for (std::size_t r : rows) {
    const float bad = which++ % 3 == 0 ? std::numeric_limits<float>::quiet_NaN()
                                       : (which % 2 ? 1.0f : -1.0f) * std::numeric_limits<float>::infinity();
    raw(r, rng() % raw.cols()) = bad;
  }
  const auto dirty = Codebook::unchecked(raw);
  const auto f = filter_invalid_centroids(dirty);
  const std::size_t k_prime = f.codebook.k();
  const auto index = remap_index(built.index, f.remap);
  const auto q = quantize_batch(data, f.codebook, &index, SearchMode::hierarchical(4));
  const auto qe = quantize_batch(data, f.codebook);
  TokenId max_id = 0;
  for (TokenId id : q.ids) max_id = std::max(max_id, id);
  for (TokenId id : qe.ids) max_id = std::max(max_id, id);
  const auto again = filter_invalid_centroids(f.codebook);
  const bool idempotent = again.removed == 0 && again.codebook.centroids() == f.codebook.centroids();
  const bool pass = k_prime == 256 - injected && f.removed == injected && max_id < k_prime && idempotent &&
                    f.codebook.all_finite();
  return {pass, "K=256, injected " + std::to_string(injected) + ", K'=" + std::to_string(k_prime) + ", max id " +
                    std::to_string(max_id) + ", re-filter removed " + std::to_string(again.removed)};
}

float random_float(std::mt19937_64& rng) {
  switch (rng() % 6) {
    case 0: return -0.0f;
    case 1: return std::numeric_limits<float>::denorm_min() * float(1 + rng() % 1000);
    case 2: return std::numeric_limits<float>::max();
    default: {
      float f;
      do {
        const std::uint32_t bits = std::uint32_t(rng());
        std::memcpy(&f, &bits, sizeof f);
      } while (!std::isfinite(f));
      return f;
    }
  }
}

Matrix random_bits_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  Matrix m(rows, cols);
  for (float& v : m.values()) v = random_float(rng);
  return m;
}

bool same_bits(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.values().data(), b.values().data(), a.size() * sizeof(float)) == 0;
}

void corrupt(const std::filesystem::path& src, const std::filesystem::path& dst, int kind) {
  auto bytes = io::read_bytes(src);
  if (kind == 0) bytes[0] = std::byte{'X'};
  if (kind == 1) bytes.resize(bytes.size() - 3);
  if (kind == 2) bytes[4] = std::byte{7};
  std::ofstream(dst, std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
}

Outcome format_round_trips() {
  test::TempDir dir;
  std::mt19937_64 rng(1101);
  std::size_t ok = 0;
  const std::size_t n = 1000;
  for (std::size_t t = 0; t < n; ++t) {
    const auto a = dir / "a.bin";
    const auto b = dir / "b.bin";
    bool good = false;
    if (t % 3 == 0) {
      const auto m = random_bits_matrix(rng() % 64, 1 + rng() % 32, rng);
      io::write_matrix(a, m);
      const auto back = io::read_matrix(a);
      io::write_matrix(b, back);
      good = same_bits(m, back) && io::read_bytes(a) == io::read_bytes(b);
    } else if (t % 3 == 1) {
      const std::size_t k = 1 + rng() % 64, d = 1 + rng() % 16;
      const Codebook cb(random_bits_matrix(k, d, rng));
      std::optional<HierarchicalIndex> index;
      if (rng() % 2) {
        const std::size_t k1 = 1 + rng() % k;
        std::vector<TokenId> parents(k);
        for (auto& p : parents) p = TokenId(rng() % k1);
        index.emplace(random_bits_matrix(k1, d, rng), parents);
      }
      io::write_codebook(a, cb, index ? &*index : nullptr);
      const auto back = io::read_codebook(a);
      io::write_codebook(b, back.codebook, back.index ? &*back.index : nullptr);
      good = same_bits(cb.centroids(), back.codebook.centroids()) && back.index.has_value() == index.has_value() &&
             io::read_bytes(a) == io::read_bytes(b);
      if (good && index) {
        good = same_bits(index->coarse_centroids(), back.index->coarse_centroids()) &&
               std::equal(index->parents().begin(), index->parents().end(), back.index->parents().begin(),
                          back.index->parents().end());
      }
    } else {
      const std::size_t k = 1 + rng() % 100000;
      std::vector<TokenSequence> seqs(rng() % 20);
      for (auto& s : seqs) {
        std::vector<TokenId> ids(rng() % 50);
        for (auto& id : ids) id = TokenId(rng() % k);
        s = TokenSequence(std::move(ids), k);
      }
      io::write_tokens(a, seqs, k);
      const auto back = io::read_tokens(a);
      io::write_tokens(b, back.sequences, back.k);
      good = back.k == k && back.sequences == seqs && io::read_bytes(a) == io::read_bytes(b);
    }
    ok += good;
  }

  // Each corruption class on each format.
  io::write_matrix(dir / "e", test::random_matrix(5, 3, 1102));
  io::write_codebook(dir / "c", Codebook(test::random_matrix(5, 3, 1103)));
  io::write_tokens(dir / "t", std::vector<TokenSequence>{TokenSequence({1, 2, 3}, 5)}, 5);
  const ErrorCode want[3] = {ErrorCode::kBadMagic, ErrorCode::kTruncated, ErrorCode::kBadVersion};
  std::size_t classified = 0;
  for (int kind = 0; kind < 3; ++kind) {
    corrupt(dir / "e", dir / "x", kind);
    classified += code_of([&] { io::read_matrix(dir / "x"); }) == want[kind];
    corrupt(dir / "c", dir / "x", kind);
    classified += code_of([&] { io::read_codebook(dir / "x"); }) == want[kind];
    corrupt(dir / "t", dir / "x", kind);
    classified += code_of([&] { io::read_tokens(dir / "x"); }) == want[kind];
  }
  return {ok == n && classified == 9, std::to_string(ok) + "/" + std::to_string(n) + " bit-exact round trips, " +
                                          std::to_string(classified) + "/9 corruptions raised their own code"};
}

// ---------------------------------------------------------------------------
// Collapse benchmark.

// 64-component mixture (sigma 1, separation 4) in d = 16. Random codes are
// N(0, 1). Utilization is measured on the training corpus, the same footing
// as the clustering-output check in criterion 4.
Outcome collapse_trend() {
  SynthSpec spec;
  spec.n = 20000;
  spec.dim = 16;
  spec.components = 64;
  spec.seed = 2024;
  const auto train = gen_synth(spec).embeddings;
  CollapseSimConfig cfg;
  cfg.k = 8192;
  cfg.epochs = 30;
  cfg.lr = 0.1;
  cfg.commit_weight = 0.25;
  cfg.batch_size = 256;
  cfg.init_scale = 1.0;
  cfg.init = CodebookInit::kClustered;
  const auto clustered = vq_baseline_train(cfg, train);
  cfg.init = CodebookInit::kRandomGaussian;
  const auto random = vq_baseline_train(cfg, train);
  const double uc = clustered.utilization.back();
  const double ur = random.utilization.back();
  return {uc - ur >= 0.3 && uc >= 0.9,
          "clustered " + fmt("%.4f", uc) + " (need >= 0.9), random " + fmt("%.4f", ur) + " (initial " +
              fmt("%.4f", random.initial_utilization) + "), gap " + fmt("%.4f", uc - ur) + " (need >= 0.3)"};
}

}  // namespace

int main() {
  criterion(1, "quantizer exactness", 30, quantizer_exactness);
  criterion(2, "gradient gate", 10, gradient_gate);
  criterion(3, "distortion decomposition", 0, decomposition_identity);
  criterion(4, "entropy and utilization analytics", 0, entropy_analytics);
  criterion(5, "collapse trend", 300, collapse_trend);
  criterion(6, "two-stage quality", 120, two_stage_quality);
  criterion(7, "rate-distortion law", 120, rate_distortion_law);
  criterion(8, "mutual information bound", 0, mi_bound);
  criterion(9, "frozen anchor", 0, frozen_anchor);
  criterion(10, "invalid-centroid filtering", 0, filtering);
  criterion(11, "format round trips", 0, format_round_trips);
  std::printf("summary: %d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
