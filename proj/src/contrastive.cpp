#include "uc2/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace uc2 {
namespace {

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

void check_tau(double tau) {
  if (!(tau > 0.0)) fail(ErrorCode::kInvalidConfig, "temperature must be > 0");
}

void check_batch(const ContrastiveBatch& batch, const CascadedCodebook& cascade,
                 const ProjectionMap& map) {
  if (batch.sequences.empty()) fail(ErrorCode::kEmptySequence, "empty contrastive batch");
  if (batch.prompts.rows() != batch.sequences.size()) {
    fail(ErrorCode::kShape, "prompt count differs from batch size");
  }
  if (batch.prompts.cols() != map.d_out()) fail(ErrorCode::kShape, "prompt dim != d_out");
  if (map.d_in() != cascade.d2()) fail(ErrorCode::kShape, "projection d_in != d2");
  for (const auto& s : batch.sequences) {
    if (s.size() == 0) fail(ErrorCode::kEmptySequence, "batch sequence with no tokens");
  }
}

struct Similarities {
  std::vector<double> pooled_norm;
  std::vector<double> prompt_norm;
  MatrixD cosine;  // B x B
};

Similarities similarities(const MatrixD& pooled, const MatrixD& prompts) {
  if (pooled.rows() != prompts.rows() || pooled.cols() != prompts.cols()) {
    fail(ErrorCode::kShape, "pooled and prompt matrices differ in shape");
  }
  if (pooled.rows() == 0) fail(ErrorCode::kEmptySequence, "contrastive loss needs B >= 1");
  const std::size_t b = pooled.rows();
  Similarities s{std::vector<double>(b), std::vector<double>(b), MatrixD(b, b)};
  for (std::size_t i = 0; i < b; ++i) {
    s.pooled_norm[i] = norm(pooled.row(i));
    s.prompt_norm[i] = norm(prompts.row(i));
    if (s.pooled_norm[i] == 0.0 || s.prompt_norm[i] == 0.0) {
      fail(ErrorCode::kDegenerateSimilarity,
           "zero-norm row " + std::to_string(i) + "; cosine similarity undefined");
    }
  }
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < b; ++j) {
      double dot = 0.0;
      const auto p = pooled.row(i);
      const auto z = prompts.row(j);
      for (std::size_t c = 0; c < p.size(); ++c) dot += p[c] * z[c];
      s.cosine(i, j) = dot / (s.pooled_norm[i] * s.prompt_norm[j]);
    }
  }
  return s;
}

// Row-wise softmax of cosine/tau and the batch-mean loss.
double softmax_loss(const MatrixD& cosine, double tau, MatrixD* probs) {
  const std::size_t b = cosine.rows();
  double loss = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    double top = cosine(i, 0) / tau;
    for (std::size_t j = 1; j < b; ++j) top = std::max(top, cosine(i, j) / tau);
    double denom = 0.0;
    for (std::size_t j = 0; j < b; ++j) denom += std::exp(cosine(i, j) / tau - top);
    const double lse = top + std::log(denom);
    loss += lse - cosine(i, i) / tau;
    if (probs) {
      for (std::size_t j = 0; j < b; ++j) (*probs)(i, j) = std::exp(cosine(i, j) / tau - lse);
    }
  }
  return loss / static_cast<double>(b);
}

MatrixD pooled_batch(const ContrastiveBatch& batch, const CascadedCodebook& cascade,
                     const ProjectionMap& map) {
  MatrixD pooled(batch.sequences.size(), map.d_out());
  for (std::size_t i = 0; i < batch.sequences.size(); ++i) {
    const auto p = pool_sequence(project_tokens(cascade_lookup(batch.sequences[i], cascade), map));
    std::copy(p.begin(), p.end(), pooled.row(i).begin());
  }
  return pooled;
}

}  // namespace

ProjectionMap::ProjectionMap(MatrixD w, std::vector<double> b)
    : weights(std::move(w)), bias(std::move(b)) {
  if (weights.rows() < 1 || weights.cols() < 1) fail(ErrorCode::kShape, "empty projection");
  if (bias.size() != weights.rows()) fail(ErrorCode::kShape, "bias length != d_out");
  if (!all_finite()) fail(ErrorCode::kValidation, "projection has non-finite values");
}

ProjectionMap ProjectionMap::identity(std::size_t dim) {
  MatrixD w(dim, dim);
  for (std::size_t i = 0; i < dim; ++i) w(i, i) = 1.0;
  return ProjectionMap(std::move(w), std::vector<double>(dim, 0.0));
}

ProjectionMap ProjectionMap::random(std::size_t d_in, std::size_t d_out, std::uint64_t seed,
                                    double scale) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale / std::sqrt(static_cast<double>(d_in)));
  MatrixD w(d_out, d_in);
  for (double& v : w.values()) v = normal(rng);
  return ProjectionMap(std::move(w), std::vector<double>(d_out, 0.0));
}

bool ProjectionMap::all_finite() const noexcept {
  auto finite = [](double v) { return std::isfinite(v); };
  return std::all_of(weights.values().begin(), weights.values().end(), finite) &&
         std::all_of(bias.begin(), bias.end(), finite);
}

MatrixD project_tokens(const MatrixD& embeds, const ProjectionMap& map) {
  if (embeds.cols() != map.d_in()) {
    fail(ErrorCode::kShape, "embedding dim " + std::to_string(embeds.cols()) +
                                " != projection d_in " + std::to_string(map.d_in()));
  }
  MatrixD out(embeds.rows(), map.d_out());
  for (std::size_t t = 0; t < embeds.rows(); ++t) {
    const auto e = embeds.row(t);
    auto o = out.row(t);
    for (std::size_t r = 0; r < map.d_out(); ++r) {
      const auto w = map.weights.row(r);
      double acc = 0.0;
      for (std::size_t c = 0; c < e.size(); ++c) acc += w[c] * e[c];
      o[r] = acc + map.bias[r];
    }
  }
  return out;
}

std::vector<double> pool_sequence(const MatrixD& z_tilde, Pooling) {
  if (z_tilde.rows() == 0) fail(ErrorCode::kEmptySequence, "cannot pool an empty sequence");
  std::vector<double> out(z_tilde.cols(), 0.0);
  for (std::size_t t = 0; t < z_tilde.rows(); ++t) {
    const auto r = z_tilde.row(t);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += r[c];
  }
  for (double& v : out) v /= static_cast<double>(z_tilde.rows());
  return out;
}

double contrastive_loss(const MatrixD& pooled, const MatrixD& prompts, double tau) {
  check_tau(tau);
  const auto s = similarities(pooled, prompts);
  return softmax_loss(s.cosine, tau, nullptr);
}

double batch_loss(const ContrastiveBatch& batch, const CascadedCodebook& cascade,
                  const ProjectionMap& map, double tau) {
  check_batch(batch, cascade, map);
  return contrastive_loss(pooled_batch(batch, cascade, map), batch.prompts, tau);
}

ContrastiveGradients contrastive_grad(const ContrastiveBatch& batch,
                                      const CascadedCodebook& cascade, const ProjectionMap& map,
                                      double tau) {
  check_tau(tau);
  check_batch(batch, cascade, map);
  const std::size_t b = batch.sequences.size();
  const std::size_t d_out = map.d_out();
  const std::size_t d_in = map.d_in();

  const MatrixD pooled = pooled_batch(batch, cascade, map);
  const auto sim = similarities(pooled, batch.prompts);
  MatrixD probs(b, b);
  ContrastiveGradients g;
  g.loss = softmax_loss(sim.cosine, tau, &probs);
  g.d_weights = MatrixD(d_out, d_in);
  g.d_bias.assign(d_out, 0.0);

  const double inv_b = 1.0 / static_cast<double>(b);
  std::vector<double> grad_p(d_out);
  std::vector<double> mean_x(d_in);
  std::vector<double> back(d_in);
  for (std::size_t i = 0; i < b; ++i) {
    const auto p = pooled.row(i);
    const double pn = sim.pooled_norm[i];
    std::fill(grad_p.begin(), grad_p.end(), 0.0);
    for (std::size_t j = 0; j < b; ++j) {
      const double dcos = (probs(i, j) - (i == j ? 1.0 : 0.0)) * inv_b / tau;
      if (dcos == 0.0) continue;
      const auto z = batch.prompts.row(j);
      const double zn = sim.prompt_norm[j];
      const double cij = sim.cosine(i, j);
      for (std::size_t c = 0; c < d_out; ++c) {
        grad_p[c] += dcos * (z[c] / (pn * zn) - cij * p[c] / (pn * pn));
      }
    }

    const auto& seq = batch.sequences[i];
    std::fill(mean_x.begin(), mean_x.end(), 0.0);
    for (TokenId v : seq.tokens()) {
      const auto x = cascade.embedding(v);
      for (std::size_t c = 0; c < d_in; ++c) mean_x[c] += x[c];
    }
    const double inv_t = 1.0 / static_cast<double>(seq.size());
    for (double& v : mean_x) v *= inv_t;

    for (std::size_t r = 0; r < d_out; ++r) {
      g.d_bias[r] += grad_p[r];
      auto gw = g.d_weights.row(r);
      for (std::size_t c = 0; c < d_in; ++c) gw[c] += grad_p[r] * mean_x[c];
    }

    std::fill(back.begin(), back.end(), 0.0);
    for (std::size_t r = 0; r < d_out; ++r) {
      const auto w = map.weights.row(r);
      for (std::size_t c = 0; c < d_in; ++c) back[c] += w[c] * grad_p[r];
    }
    for (TokenId v : seq.tokens()) {
      auto& row = g.d_rows[v];
      if (row.empty()) row.assign(d_in, 0.0);
      for (std::size_t c = 0; c < d_in; ++c) row[c] += back[c] * inv_t;
    }
  }
  return g;
}

}  // namespace uc2
