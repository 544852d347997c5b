#include "uc2/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "uc2/kernels.hpp"

namespace uc2 {
namespace {

void check_assignments(const EmbeddingMatrix& data, const Codebook& codebook,
                       std::span<const TokenId> assignments) {
  if (assignments.size() != data.rows()) {
    fail(ErrorCode::kShape, "assignment count " + std::to_string(assignments.size()) +
                                " differs from n_rows " + std::to_string(data.rows()));
  }
  if (data.dim() != codebook.dim()) fail(ErrorCode::kShape, "dimension mismatch");
  for (TokenId id : assignments) {
    if (id >= codebook.k()) {
      fail(ErrorCode::kOutOfVocabulary, "assignment " + std::to_string(id) + " >= K = " +
                                            std::to_string(codebook.k()));
    }
  }
}

// -sum p ln p over counts, visited in the order given.
double entropy_of_counts(std::span<const std::uint64_t> counts, std::uint64_t total) {
  double h = 0.0;
  const double n = static_cast<double>(total);
  for (std::uint64_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log(p);
  }
  return h;
}

}  // namespace

void ObjectiveParams::validate() const {
  if (!(lambda >= 0.0)) fail(ErrorCode::kInvalidConfig, "lambda must be >= 0");
  if (!(beta >= 0.0)) fail(ErrorCode::kInvalidConfig, "beta must be >= 0");
  if (!(tau_temp > 0.0)) fail(ErrorCode::kInvalidConfig, "tau must be > 0");
}

double utilization(const AssignmentHistogram& h) {
  if (h.k() == 0) fail(ErrorCode::kValidation, "utilization of an empty vocabulary");
  const auto used = std::count_if(h.counts().begin(), h.counts().end(),
                                  [](std::uint64_t c) { return c > 0; });
  return static_cast<double>(used) / static_cast<double>(h.k());
}

double assignment_entropy(const AssignmentHistogram& h) {
  if (h.total() == 0) fail(ErrorCode::kUndefinedEntropy, "entropy of an empty histogram");
  return entropy_of_counts(h.counts(), h.total());
}

double DistortionReport::decomposed_total() const {
  double s = 0.0;
  for (const auto& c : per_cluster) s += c.q * c.mse;
  return s;
}

DistortionReport quantization_distortion(const EmbeddingMatrix& data, const Codebook& codebook,
                                         std::span<const TokenId> assignments) {
  check_assignments(data, codebook, assignments);
  const std::size_t k = codebook.k();
  const std::size_t d = data.dim();
  std::vector<double> err(k, 0.0);
  std::vector<double> sums(k * d, 0.0);
  std::vector<std::size_t> counts(k, 0);
  double total = 0.0;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    const TokenId id = assignments[i];
    const auto r = data.row(i);
    const double e = kernels::squared_l2(r, codebook.centroid(id));
    err[id] += e;
    total += e;
    ++counts[id];
    double* s = sums.data() + static_cast<std::size_t>(id) * d;
    for (std::size_t j = 0; j < d; ++j) s[j] += r[j];
  }
  // Second pass: spread of members about their own mean.
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] == 0) continue;
    for (std::size_t j = 0; j < d; ++j) sums[c * d + j] /= static_cast<double>(counts[c]);
  }
  std::vector<double> spread(k, 0.0);
  for (std::size_t i = 0; i < data.rows(); ++i) {
    const TokenId id = assignments[i];
    const auto r = data.row(i);
    const double* mu = sums.data() + static_cast<std::size_t>(id) * d;
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = r[j] - mu[j];
      spread[id] += diff * diff;
    }
  }
  DistortionReport rep;
  const double n = static_cast<double>(data.rows());
  rep.total = total / n;
  rep.per_cluster.resize(k);
  double var_sum = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    ClusterStat& st = rep.per_cluster[c];
    st.count = counts[c];
    if (counts[c] == 0) continue;
    const double m = static_cast<double>(counts[c]);
    st.q = m / n;
    st.mse = err[c] / m;
    st.variance = spread[c] / m;
    var_sum += st.variance;
  }
  rep.variance_bound = var_sum / static_cast<double>(k);
  rep.bound_holds = rep.total >= rep.variance_bound;
  return rep;
}

ObjectiveTerms codebook_objective(const EmbeddingMatrix& data, const Codebook& codebook,
                                  std::span<const TokenId> assignments, double lambda) {
  check_assignments(data, codebook, assignments);
  ObjectiveTerms t;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    t.alignment += kernels::squared_l2(data.row(i), codebook.centroid(assignments[i]));
  }
  const std::size_t d = codebook.dim();
  std::vector<double> mean(d, 0.0);
  for (std::size_t c = 0; c < codebook.k(); ++c) {
    const auto row = codebook.centroid(static_cast<TokenId>(c));
    for (std::size_t j = 0; j < d; ++j) mean[j] += row[j];
  }
  for (double& m : mean) m /= static_cast<double>(codebook.k());
  for (std::size_t c = 0; c < codebook.k(); ++c) {
    const auto row = codebook.centroid(static_cast<TokenId>(c));
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = row[j] - mean[j];
      t.utilization += diff * diff;
    }
  }
  t.total = t.alignment + lambda * t.utilization;
  return t;
}

double regularized_loss(double distortion, double entropy, double beta) {
  if (!(beta >= 0.0)) fail(ErrorCode::kInvalidConfig, "beta must be >= 0");
  return distortion - beta * entropy;
}

MutualInformation mutual_information_estimate(std::span<const TokenId> tokens,
                                              std::span<const std::uint32_t> labels) {
  if (tokens.size() != labels.size()) {
    fail(ErrorCode::kShape, "token and label sequences differ in length");
  }
  if (tokens.empty()) fail(ErrorCode::kUndefinedEntropy, "mutual information of empty input");
  const std::uint64_t n = tokens.size();

  // Joint counts in (token, label) order; marginals in ascending id order.
  std::vector<std::pair<TokenId, std::uint32_t>> pairs(n);
  for (std::size_t i = 0; i < n; ++i) pairs[i] = {tokens[i], labels[i]};
  std::sort(pairs.begin(), pairs.end());
  std::vector<std::uint64_t> joint;
  std::vector<std::uint64_t> token_counts;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && pairs[j] == pairs[i]) ++j;
    joint.push_back(j - i);
    if (i == 0 || pairs[i].first != pairs[i - 1].first) {
      token_counts.push_back(0);
    }
    token_counts.back() += j - i;
    i = j;
  }
  std::vector<std::uint32_t> sorted_labels(labels.begin(), labels.end());
  std::sort(sorted_labels.begin(), sorted_labels.end());
  std::vector<std::uint64_t> label_counts;
  for (std::size_t i = 0; i < n; ++i) {
    if (i == 0 || sorted_labels[i] != sorted_labels[i - 1]) label_counts.push_back(0);
    ++label_counts.back();
  }

  MutualInformation mi;
  mi.h_v = entropy_of_counts(token_counts, n);
  mi.h_y = entropy_of_counts(label_counts, n);
  mi.h_joint = entropy_of_counts(joint, n);
  mi.i_hat = std::max(0.0, mi.h_v + mi.h_y - mi.h_joint);
  return mi;
}

double fit_loglog_slope(std::span<const RatePoint> points) {
  const double m = static_cast<double>(points.size());
  double sx = 0.0, sy = 0.0;
  for (const auto& p : points) {
    sx += std::log(static_cast<double>(p.k));
    sy += std::log(p.distortion);
  }
  const double mx = sx / m, my = sy / m;
  double num = 0.0, den = 0.0;
  for (const auto& p : points) {
    const double dx = std::log(static_cast<double>(p.k)) - mx;
    num += dx * (std::log(p.distortion) - my);
    den += dx * dx;
  }
  return num / den;
}

RateDistortionScan rate_distortion_scan(const EmbeddingMatrix& data,
                                        std::span<const std::size_t> k_values,
                                        const ClusterConfig& cfg, std::size_t max_retries) {
  if (k_values.empty()) fail(ErrorCode::kInvalidConfig, "rate-distortion scan needs K values");
  for (std::size_t i = 0; i < k_values.size(); ++i) {
    if (k_values[i] < 1 || k_values[i] > data.rows()) {
      fail(ErrorCode::kInvalidConfig, "K = " + std::to_string(k_values[i]) +
                                          " outside [1, n_rows]");
    }
    if (i > 0 && k_values[i] <= k_values[i - 1]) {
      fail(ErrorCode::kInvalidConfig, "K values must be strictly increasing");
    }
  }
  RateDistortionScan scan;
  const double n = static_cast<double>(data.rows());
  for (std::size_t k : k_values) {
    ClusterConfig c = cfg;
    c.k = k;
    RatePoint pt{k, lloyd_kmeans(data, c).sse() / n, 1};
    const double ceiling =
        scan.points.empty() ? -1.0 : scan.points.back().distortion * (1.0 + 1e-6);
    for (std::size_t retry = 1; ceiling >= 0.0 && pt.distortion > ceiling && retry <= max_retries;
         ++retry) {
      c.seed = cfg.seed + retry * 0x9E3779B97F4A7C15ULL;
      pt.distortion = std::min(pt.distortion, lloyd_kmeans(data, c).sse() / n);
      ++pt.attempts;
    }
    scan.points.push_back(pt);
  }
  scan.degenerate = std::any_of(scan.points.begin(), scan.points.end(),
                                [](const RatePoint& p) { return !(p.distortion > 0.0); }) ||
                    scan.points.size() < 2;
  if (!scan.degenerate) scan.slope = fit_loglog_slope(scan.points);
  return scan;
}

}  // namespace uc2
