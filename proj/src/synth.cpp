#include "uc2/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace uc2 {
namespace {

Matrix place_means(std::size_t count, std::size_t dim, double min_dist, std::mt19937_64& rng) {
  Matrix means(count, dim);
  // Half-width of the box the means are drawn from; grows when crowded.
  double half = std::max(1.0, 0.5 * min_dist *
                                  std::pow(static_cast<double>(count), 1.0 / double(dim)));
  std::size_t placed = 0;
  std::size_t misses = 0;
  std::vector<double> cand(dim);
  while (placed < count) {
    std::uniform_real_distribution<double> box(-half, half);
    for (double& v : cand) v = box(rng);
    bool ok = true;
    for (std::size_t p = 0; p < placed && ok; ++p) {
      double d2 = 0.0;
      const auto m = means.row(p);
      for (std::size_t j = 0; j < dim; ++j) d2 += (cand[j] - m[j]) * (cand[j] - m[j]);
      ok = d2 >= min_dist * min_dist;
    }
    if (!ok) {
      if (++misses > 200) {
        half *= 1.25;
        misses = 0;
      }
      continue;
    }
    for (std::size_t j = 0; j < dim; ++j) means(placed, j) = static_cast<float>(cand[j]);
    ++placed;
    misses = 0;
  }
  return means;
}

}  // namespace

void SynthSpec::validate() const {
  if (n < 1 || dim < 1) fail(ErrorCode::kInvalidConfig, "synthetic data needs n, dim >= 1");
  if (distribution == SynthDistribution::kMixture) {
    if (components < 1) fail(ErrorCode::kInvalidConfig, "components must be >= 1");
    if (components > n) fail(ErrorCode::kInvalidConfig, "components must not exceed n");
    if (!(separation >= 0.0)) fail(ErrorCode::kInvalidConfig, "separation must be >= 0");
    if (!(sigma > 0.0)) fail(ErrorCode::kInvalidConfig, "sigma must be > 0");
  }
}

SynthData gen_synth(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::vector<float> values(spec.n * spec.dim);
  std::vector<std::uint32_t> labels;
  Matrix means;
  if (spec.distribution == SynthDistribution::kUniform) {
    std::uniform_real_distribution<float> unit(0.0f, 1.0f);
    for (float& v : values) v = unit(rng);
  } else {
    means = place_means(spec.components, spec.dim, spec.separation * spec.sigma, rng);
    std::uniform_int_distribution<std::uint32_t> comp(
        0, static_cast<std::uint32_t>(spec.components - 1));
    std::normal_distribution<double> noise(0.0, spec.sigma);
    labels.resize(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) {
      const std::uint32_t c = comp(rng);
      labels[i] = c;
      const auto mu = means.row(c);
      for (std::size_t j = 0; j < spec.dim; ++j) {
        values[i * spec.dim + j] = static_cast<float>(mu[j] + noise(rng));
      }
    }
    if (!spec.labeled) labels.clear();
  }
  return {EmbeddingMatrix(Matrix(spec.n, spec.dim, std::move(values))), std::move(labels),
          std::move(means)};
}

void PairedSpec::validate() const {
  if (items < 1 || seq_len < 1 || dim < 1 || prompt_dim < 1) {
    fail(ErrorCode::kInvalidConfig, "paired data needs items, seq_len, dim, prompt_dim >= 1");
  }
  if (components < 1 || components_per_item < 1 || components_per_item > components) {
    fail(ErrorCode::kInvalidConfig, "need 1 <= components_per_item <= components");
  }
}

PairedData gen_paired(const PairedSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  PairedData out;
  out.means = place_means(spec.components, spec.dim, spec.separation, rng);
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixD mixing(spec.prompt_dim, spec.components);
  for (double& v : mixing.values()) v = normal(rng);

  out.dataset.prompts = MatrixD(spec.items, spec.prompt_dim);
  std::vector<std::uint32_t> pool(spec.components);
  for (std::uint32_t c = 0; c < spec.components; ++c) pool[c] = c;
  std::vector<double> signature(spec.components);
  for (std::size_t item = 0; item < spec.items; ++item) {
    std::shuffle(pool.begin(), pool.end(), rng);
    std::fill(signature.begin(), signature.end(), 0.0);
    Matrix patches(spec.seq_len, spec.dim);
    for (std::size_t t = 0; t < spec.seq_len; ++t) {
      const std::uint32_t c = pool[t % spec.components_per_item];
      signature[c] += 1.0 / static_cast<double>(spec.seq_len);
      const auto mu = out.means.row(c);
      for (std::size_t j = 0; j < spec.dim; ++j) {
        patches(t, j) = static_cast<float>(mu[j] + normal(rng));
      }
    }
    out.labels.push_back(pool[0]);
    out.dataset.patches.push_back(std::move(patches));
    auto z = out.dataset.prompts.row(item);
    for (std::size_t r = 0; r < spec.prompt_dim; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < spec.components; ++c) acc += mixing(r, c) * signature[c];
      z[r] = acc + spec.prompt_noise * normal(rng);
    }
  }
  return out;
}

}  // namespace uc2
