#include "uc2/cascade_train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "uc2/metrics.hpp"

namespace uc2 {
namespace {

bool finite_span(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

double heldout_utilization(const Matrix& rows, const CascadedCodebook& cascade, SearchMode mode) {
  if (rows.rows() == 0) return 0.0;
  return utilization(quantize_batch(rows, cascade.frozen(), cascade.index(), mode).histogram);
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) fail(ErrorCode::kInvalidConfig, "lr must be >= 0");
  if (!(tau_temp > 0.0)) fail(ErrorCode::kInvalidConfig, "tau must be > 0");
  if (batch_size < 1) fail(ErrorCode::kInvalidConfig, "batch size must be >= 1");
  if (eval_every < 1) fail(ErrorCode::kInvalidConfig, "eval_every must be >= 1");
}

void PairedDataset::validate(std::size_t d, std::size_t d_out) const {
  if (patches.empty()) fail(ErrorCode::kInvalidConfig, "paired dataset is empty");
  if (prompts.rows() != patches.size()) {
    fail(ErrorCode::kShape, "paired dataset has " + std::to_string(patches.size()) +
                                " patch sets but " + std::to_string(prompts.rows()) + " prompts");
  }
  if (prompts.cols() != d_out) fail(ErrorCode::kShape, "prompt dim != projection d_out");
  for (const auto& p : patches) {
    if (p.rows() == 0) fail(ErrorCode::kEmptySequence, "paired item with no patches");
    if (p.cols() != d) fail(ErrorCode::kShape, "patch dim != codebook dim");
  }
}

double trailing_mean(const std::vector<TraceRow>& trace, std::size_t end, std::size_t window) {
  end = std::min(end, trace.size());
  const std::size_t begin = end > window ? end - window : 0;
  if (begin == end) return 0.0;
  double s = 0.0;
  for (std::size_t i = begin; i < end; ++i) s += trace[i].loss;
  return s / static_cast<double>(end - begin);
}

TrainResult train_cascade(CascadedCodebook cascade, ProjectionMap map,
                          const PairedDataset& dataset, const TrainConfig& cfg,
                          const Matrix* heldout, SearchMode mode,
                          const std::function<void(const TraceRow&)>& on_step) {
  cfg.validate();
  dataset.validate(cascade.d(), map.d_out());
  if (map.d_in() != cascade.d2()) fail(ErrorCode::kShape, "projection d_in != d2");

  TrainResult out{cascade, map, {}, {}, cascade.frozen_checksum(), {}};

  std::vector<TokenSequence> tokens;
  tokens.reserve(dataset.size());
  for (const auto& p : dataset.patches) {
    tokens.push_back(
        TokenSequence(quantize_batch(p, cascade.frozen(), cascade.index(), mode, 0, 1).ids,
                      cascade.k()));
  }
  Matrix train_rows(0, cascade.d());
  if (heldout == nullptr) {
    for (const auto& p : dataset.patches) {
      for (std::size_t r = 0; r < p.rows(); ++r) train_rows.append_row(p.row(r));
    }
    heldout = &train_rows;
  }

  const std::size_t b = std::min(cfg.batch_size, dataset.size());
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t cursor = 0;

  double util = heldout_utilization(*heldout, out.cascade, mode);
  out.utilization_trace.emplace_back(0, util);
  const auto start = std::chrono::steady_clock::now();

  ContrastiveBatch batch;
  batch.prompts = MatrixD(b, map.d_out());
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    batch.sequences.clear();
    for (std::size_t i = 0; i < b; ++i) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      const std::size_t item = order[cursor++];
      batch.sequences.push_back(tokens[item]);
      const auto src = dataset.prompts.row(item);
      std::copy(src.begin(), src.end(), batch.prompts.row(i).begin());
    }

    const ContrastiveGradients g =
        contrastive_grad(batch, out.cascade, out.map, cfg.tau_temp);
    if (!std::isfinite(g.loss)) {
      fail(ErrorCode::kDivergence, "loss became non-finite at step " + std::to_string(step));
    }
    if (cfg.lr != 0.0) {
      if (cfg.update_targets.projection) {
        auto w = out.map.weights.values();
        const auto gw = g.d_weights.values();
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= cfg.lr * gw[i];
        for (std::size_t i = 0; i < out.map.bias.size(); ++i) {
          out.map.bias[i] -= cfg.lr * g.d_bias[i];
        }
        if (!out.map.all_finite()) {
          fail(ErrorCode::kDivergence,
               "projection became non-finite at step " + std::to_string(step));
        }
      }
      if (cfg.update_targets.c2_table) {
        for (const auto& [id, grad] : g.d_rows) {
          auto row = out.cascade.mutable_embedding(id);
          for (std::size_t c = 0; c < row.size(); ++c) row[c] -= cfg.lr * grad[c];
          if (!finite_span(row)) {
            fail(ErrorCode::kDivergence, "C2 row " + std::to_string(id) +
                                             " became non-finite at step " +
                                             std::to_string(step));
          }
        }
      }
    }

    if ((step + 1) % cfg.eval_every == 0) {
      util = heldout_utilization(*heldout, out.cascade, mode);
      out.utilization_trace.emplace_back(step + 1, util);
    }
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count();
    out.trace.push_back({step, g.loss, util, ms});
    if (on_step) on_step(out.trace.back());
  }
  out.frozen_checksum_after = out.cascade.frozen_checksum();
  return out;
}

}  // namespace uc2
