#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "uc2/cascade_train.hpp"

namespace uc2 {
namespace {

std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

double rel_error(double a, double f, double floor) {
  const double scale = std::max({std::abs(a), std::abs(f), floor});
  return std::abs(a - f) / scale;
}

}  // namespace

GradCheckInstance random_grad_instance(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  for (;;) {
    const std::size_t b = pick(rng, 2, 4);
    const std::size_t k = pick(rng, 3, 8);
    const std::size_t d = pick(rng, 2, 8);
    const std::size_t d2 = pick(rng, 2, 8);
    const std::size_t d_out = pick(rng, 2, 8);

    Matrix c1(k, d);
    for (float& v : c1.values()) v = normal(rng);
    auto frozen = std::make_shared<const Codebook>(std::move(c1));
    CascadedCodebook cascade(frozen, nullptr, d2, rng());

    ContrastiveBatch batch;
    batch.prompts = MatrixD(b, d_out);
    for (std::size_t i = 0; i < b; ++i) {
      const std::size_t t = pick(rng, 1, 4);
      std::vector<TokenId> ids(t);
      for (auto& id : ids) id = static_cast<TokenId>(pick(rng, 0, k - 1));
      batch.sequences.emplace_back(std::move(ids), k);
      for (double& v : batch.prompts.row(i)) v = normal(rng);
    }
    ProjectionMap map = ProjectionMap::random(d2, d_out, rng(), 1.0);
    for (double& v : map.bias) v = 0.1 * normal(rng);
    const double tau = std::uniform_real_distribution<double>(0.2, 2.0)(rng);
    GradCheckInstance inst{std::move(cascade), std::move(map), std::move(batch), tau};
    if (min_similarity_norm(inst) >= kMinGradCheckNorm) return inst;
  }
}

double min_similarity_norm(const GradCheckInstance& inst) {
  double least = std::numeric_limits<double>::infinity();
  auto norm = [](std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
  };
  for (const auto& seq : inst.batch.sequences) {
    const auto pooled = pool_sequence(project_tokens(cascade_lookup(seq, inst.cascade), inst.map));
    least = std::min(least, norm(pooled));
  }
  for (std::size_t i = 0; i < inst.batch.prompts.rows(); ++i) {
    least = std::min(least, norm(inst.batch.prompts.row(i)));
  }
  return least;
}

GradCheckResult finite_difference_check(const GradCheckInstance& inst, double eps,
                                        double floor) {
  const ContrastiveGradients g = contrastive_grad(inst.batch, inst.cascade, inst.map, inst.tau);
  GradCheckResult res;
  auto record = [&](double analytic, double numeric) {
    res.max_rel_error = std::max(res.max_rel_error, rel_error(analytic, numeric, floor));
    ++res.components;
  };

  ProjectionMap map = inst.map;
  auto loss_of_map = [&] { return batch_loss(inst.batch, inst.cascade, map, inst.tau); };
  for (std::size_t i = 0; i < map.weights.size(); ++i) {
    double& w = map.weights.values()[i];
    const double saved = w;
    w = saved + eps;
    const double up = loss_of_map();
    w = saved - eps;
    const double down = loss_of_map();
    w = saved;
    record(g.d_weights.values()[i], (up - down) / (2.0 * eps));
  }
  for (std::size_t i = 0; i < map.bias.size(); ++i) {
    double& v = map.bias[i];
    const double saved = v;
    v = saved + eps;
    const double up = loss_of_map();
    v = saved - eps;
    const double down = loss_of_map();
    v = saved;
    record(g.d_bias[i], (up - down) / (2.0 * eps));
  }

  CascadedCodebook cascade = inst.cascade;
  for (std::size_t k = 0; k < cascade.k(); ++k) {
    const auto id = static_cast<TokenId>(k);
    const auto it = g.d_rows.find(id);
    for (std::size_t c = 0; c < cascade.d2(); ++c) {
      double& v = cascade.mutable_embedding(id)[c];
      const double saved = v;
      v = saved + eps;
      const double up = batch_loss(inst.batch, cascade, inst.map, inst.tau);
      v = saved - eps;
      const double down = batch_loss(inst.batch, cascade, inst.map, inst.tau);
      v = saved;
      record(it == g.d_rows.end() ? 0.0 : it->second[c], (up - down) / (2.0 * eps));
    }
  }
  return res;
}

}  // namespace uc2
