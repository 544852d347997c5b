#pragma once

// Contrastive alignment of pooled, projected token embeddings with prompt
// embeddings, with closed-form gradients.
//
// Forward path for batch item i with tokens v_i1..v_iT:
//   x_it = C2[v_it]                 (cascade lookup)
//   y_it = W x_it + b               (projection)
//   p_i  = mean_t y_it              (pooling)
//   s_ij = cos(p_i, z_j) / tau
//   L    = (1/B) sum_i [ logsumexp_j s_ij - s_ii ]
//
// Backward:
//   dL/ds_ij = (softmax_j(s_i.) - [i == j]) / B
//   dL/dp_i  = sum_j dL/ds_ij / tau * (z_j / (|p_i||z_j|) - cos_ij p_i / |p_i|^2)
//   dL/db    = sum_i dL/dp_i
//   dL/dW    = sum_i dL/dp_i (mean_t x_it)^T
//   dL/dC2[k] = sum_i sum_{t : v_it = k} W^T dL/dp_i / T_i

#include <cstddef>
#include <cstdint>
#include <map>
#include <vector>

#include "uc2/core_types.hpp"
#include "uc2/quantize.hpp"

namespace uc2 {

// z~ = W e + b, W is d_out x d_in.
struct ProjectionMap {
  MatrixD weights;
  std::vector<double> bias;

  ProjectionMap(MatrixD weights, std::vector<double> bias);
  static ProjectionMap identity(std::size_t dim);
  // Gaussian weights with standard deviation scale / sqrt(d_in), zero bias.
  static ProjectionMap random(std::size_t d_in, std::size_t d_out, std::uint64_t seed,
                              double scale = 1.0);

  std::size_t d_in() const noexcept { return weights.cols(); }
  std::size_t d_out() const noexcept { return weights.rows(); }
  bool all_finite() const noexcept;
};

enum class Pooling { kMean };

MatrixD project_tokens(const MatrixD& embeds, const ProjectionMap& map);
std::vector<double> pool_sequence(const MatrixD& z_tilde, Pooling pooling = Pooling::kMean);

// Batch-mean InfoNCE over cosine similarities; row i of `prompts` is the
// positive for row i of `pooled`, the other rows are its negatives.
double contrastive_loss(const MatrixD& pooled, const MatrixD& prompts, double tau);

struct ContrastiveBatch {
  std::vector<TokenSequence> sequences;  // B sequences, each T_i >= 1
  MatrixD prompts;                       // B x d_out
};

struct ContrastiveGradients {
  double loss = 0.0;
  MatrixD d_weights;
  std::vector<double> d_bias;
  // Only C2 rows referenced by the batch; every other row has zero gradient.
  std::map<TokenId, std::vector<double>> d_rows;
};

// Loss of a batch through lookup -> projection -> pooling -> contrastive loss.
double batch_loss(const ContrastiveBatch& batch, const CascadedCodebook& cascade,
                  const ProjectionMap& map, double tau);

ContrastiveGradients contrastive_grad(const ContrastiveBatch& batch,
                                      const CascadedCodebook& cascade, const ProjectionMap& map,
                                      double tau);

}  // namespace uc2
