#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "uc2/cascade_train.hpp"
#include "uc2/clustering.hpp"
#include "uc2/metrics.hpp"
#include "uc2/nearest.hpp"

namespace uc2 {
namespace {

Matrix initial_codes(const CollapseSimConfig& cfg, const EmbeddingMatrix& train) {
  if (cfg.init == CodebookInit::kRandomGaussian) {
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<float> normal(0.0f, static_cast<float>(cfg.init_scale));
    Matrix codes(cfg.k, train.dim());
    for (float& v : codes.values()) v = normal(rng);
    return codes;
  }
  const std::size_t k1 = cfg.k1 != 0 ? cfg.k1
                                     : std::max<std::size_t>(
                                           1, static_cast<std::size_t>(std::sqrt(double(cfg.k))));
  ClusterConfig cc;
  cc.max_iters = cfg.cluster_iters;
  cc.seed = cfg.seed;
  auto built = two_stage_cluster(train, cfg.k, std::min(k1, cfg.k), cc);
  return filter_invalid_centroids(built.codebook).codebook.centroids();
}

double eval_utilization(const Matrix& codes, const EmbeddingMatrix& eval) {
  const auto ids = assign_rows(eval.matrix(), codes, squared_row_norms(codes)).ids;
  return utilization(AssignmentHistogram::from_ids(ids, codes.rows()));
}

}  // namespace

void CollapseSimConfig::validate() const {
  if (k < 1) fail(ErrorCode::kInvalidConfig, "collapse-sim needs k >= 1");
  if (epochs < 1) fail(ErrorCode::kInvalidConfig, "collapse-sim needs at least one epoch");
  if (batch_size < 1) fail(ErrorCode::kInvalidConfig, "batch size must be >= 1");
  if (!(lr >= 0.0)) fail(ErrorCode::kInvalidConfig, "lr must be >= 0");
  if (!(commit_weight >= 0.0)) fail(ErrorCode::kInvalidConfig, "commit weight must be >= 0");
  if (!(init_scale > 0.0)) fail(ErrorCode::kInvalidConfig, "init scale must be > 0");
}

CollapseResult vq_baseline_train(const CollapseSimConfig& cfg, const EmbeddingMatrix& train_set) {
  cfg.validate();
  if (cfg.init == CodebookInit::kClustered && cfg.k > train_set.rows()) {
    fail(ErrorCode::kInvalidConfig, "clustered init needs k <= n_rows");
  }
  const EmbeddingMatrix& eval = cfg.eval_set ? *cfg.eval_set : train_set;
  if (eval.dim() != train_set.dim()) fail(ErrorCode::kShape, "eval set dim != train set dim");

  Matrix codes = initial_codes(cfg, train_set);
  const std::size_t k = codes.rows();
  const std::size_t d = codes.cols();
  CollapseResult out{eval_utilization(codes, eval), {}, Codebook(codes)};

  Matrix inputs = train_set.matrix();
  std::mt19937_64 rng(cfg.seed ^ 0xC0FFEEULL);
  std::vector<std::size_t> order(inputs.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});

  Matrix batch(0, d);
  std::vector<double> sums(k * d);
  std::vector<std::size_t> counts(k);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      batch = Matrix(stop - start, d);
      for (std::size_t i = start; i < stop; ++i) {
        const auto src = inputs.row(order[i]);
        std::copy(src.begin(), src.end(), batch.row(i - start).begin());
      }
      const auto ids = assign_rows(batch, codes, squared_row_norms(codes), 1).ids;

      std::fill(sums.begin(), sums.end(), 0.0);
      std::fill(counts.begin(), counts.end(), std::size_t{0});
      for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto r = batch.row(i);
        double* s = sums.data() + static_cast<std::size_t>(ids[i]) * d;
        for (std::size_t j = 0; j < d; ++j) s[j] += r[j];
        ++counts[ids[i]];
      }
      // Only the active codes move.
      for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] == 0) continue;
        auto code = codes.row(c);
        const double inv = 1.0 / static_cast<double>(counts[c]);
        for (std::size_t j = 0; j < d; ++j) {
          const double target = sums[c * d + j] * inv;
          code[j] = static_cast<float>(code[j] + cfg.lr * (target - code[j]));
        }
      }
      // Commitment pull of the inputs toward their (updated) codes.
      if (cfg.commit_weight > 0.0) {
        const double step = cfg.lr * cfg.commit_weight;
        for (std::size_t i = start; i < stop; ++i) {
          auto x = inputs.row(order[i]);
          const auto code = codes.row(ids[i - start]);
          for (std::size_t j = 0; j < d; ++j) {
            x[j] = static_cast<float>(x[j] + step * (code[j] - x[j]));
          }
        }
      }
    }
    out.utilization.push_back(eval_utilization(codes, eval));
  }
  out.codebook = Codebook(std::move(codes));
  return out;
}

}  // namespace uc2
