#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "uc2/contrastive.hpp"
#include "uc2/core_types.hpp"
#include "uc2/quantize.hpp"

namespace uc2 {

struct UpdateTargets {
  bool c2_table = true;
  bool projection = true;
};

struct TrainConfig {
  double lr = 1e-2;
  double tau_temp = 0.07;
  std::size_t batch_size = 32;
  std::size_t steps = 500;
  std::uint64_t seed = 0;
  Pooling pooling = Pooling::kMean;
  UpdateTargets update_targets;
  // Held-out utilization is recorded at step 0 and every eval_every steps.
  std::size_t eval_every = 50;

  void validate() const;
};

// Paired training data: one T_i x d patch matrix and one prompt vector per item.
struct PairedDataset {
  std::vector<Matrix> patches;
  MatrixD prompts;  // n_items x d_out

  std::size_t size() const noexcept { return patches.size(); }
  void validate(std::size_t d, std::size_t d_out) const;
};

struct TraceRow {
  std::size_t step = 0;
  double loss = 0.0;
  double utilization = 0.0;  // most recent held-out measurement
  double wall_ms = 0.0;
};

struct TrainResult {
  CascadedCodebook cascade;
  ProjectionMap map;
  std::vector<TraceRow> trace;
  std::vector<std::pair<std::size_t, double>> utilization_trace;
  std::string frozen_checksum_before;
  std::string frozen_checksum_after;
};

// Plain SGD on the contrastive loss over shuffled batches. Patch tokens come
// from the frozen codebook, so they are computed once up front. Throws
// kDivergence (with the step index) when the loss or any parameter becomes
// non-finite. `heldout` defaults to the training patches.
TrainResult train_cascade(CascadedCodebook cascade, ProjectionMap map,
                          const PairedDataset& dataset, const TrainConfig& cfg,
                          const Matrix* heldout = nullptr,
                          SearchMode mode = SearchMode::exact(),
                          const std::function<void(const TraceRow&)>& on_step = {});

// Mean loss over trace[end - window, end), clipped at the front.
double trailing_mean(const std::vector<TraceRow>& trace, std::size_t end, std::size_t window);

// ---------------------------------------------------------------------------
// Finite-difference audit of contrastive_grad.

struct GradCheckInstance {
  CascadedCodebook cascade;
  ProjectionMap map;
  ContrastiveBatch batch;
  double tau;
};

// Random instance with B <= 4, T <= 4 and all dims <= 8. Draws are repeated
// until every pooled sequence and prompt has norm >= kMinGradCheckNorm: cosine
// similarity is singular at the origin, and next to it the third derivative
// grows like 1/|u|^3, which swamps a central difference at fixed step.
inline constexpr double kMinGradCheckNorm = 0.25;
GradCheckInstance random_grad_instance(std::uint64_t seed);

// Smallest norm among the instance's pooled sequences and prompts.
double min_similarity_norm(const GradCheckInstance& inst);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t components = 0;
};

// Central differences with step eps over every weight, bias and C2 entry.
// Relative error is |a - f| / max(|a|, |f|, floor).
GradCheckResult finite_difference_check(const GradCheckInstance& inst, double eps = 1e-4,
                                        double floor = 1e-6);

// ---------------------------------------------------------------------------
// Straight-through / partial-update VQ baseline.

enum class CodebookInit { kClustered, kRandomGaussian };

struct CollapseSimConfig {
  std::size_t k = 16;
  CodebookInit init = CodebookInit::kClustered;
  double commit_weight = 0.25;
  std::size_t epochs = 30;
  double lr = 0.1;
  std::size_t batch_size = 256;
  std::uint64_t seed = 0;
  // Standard deviation of N(0, s^2) codes under kRandomGaussian.
  double init_scale = 1.0;
  // Two-stage construction for kClustered; k1 = 0 picks floor(sqrt(k)).
  std::size_t k1 = 0;
  std::size_t cluster_iters = 20;
  // Utilization is measured here; the training set when null.
  std::shared_ptr<const EmbeddingMatrix> eval_set;

  void validate() const;
};

struct CollapseResult {
  double initial_utilization = 0.0;
  std::vector<double> utilization;  // after each epoch
  Codebook codebook;
};

// Per batch: assign each (working copy of an) input to its nearest code,
// move only the assigned codes toward their batch means by lr, and pull the
// inputs toward their codes by lr * commit_weight. Unassigned codes never move.
CollapseResult vq_baseline_train(const CollapseSimConfig& cfg, const EmbeddingMatrix& train_set);

}  // namespace uc2
