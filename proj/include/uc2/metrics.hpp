#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "uc2/clustering.hpp"
#include "uc2/core_types.hpp"

namespace uc2 {

struct ObjectiveParams {
  double lambda = 1.0;
  double beta = 1.0;
  double tau_temp = 0.07;

  void validate() const;
};

// Fraction of codewords with at least one assignment.
double utilization(const AssignmentHistogram& h);

// Shannon entropy of q(k) in nats.
double assignment_entropy(const AssignmentHistogram& h);

inline double nats_to_bits(double nats) noexcept { return nats / 0.69314718055994530942; }

struct ClusterStat {
  double q = 0.0;    // usage probability
  double mse = 0.0;  // mean ||e - c_k||^2 over members
  double variance = 0.0;  // mean ||e - mean_k||^2 over members
  std::size_t count = 0;
};

struct DistortionReport {
  double total = 0.0;  // (1/N) sum_i ||e_i - c_{v_i}||^2
  std::vector<ClusterStat> per_cluster;
  // (1/K) sum_k Var_k, reported next to `total`; not a guaranteed bound.
  double variance_bound = 0.0;
  bool bound_holds = true;

  // sum_k q(k) * mse_k
  double decomposed_total() const;
};

DistortionReport quantization_distortion(const EmbeddingMatrix& data, const Codebook& codebook,
                                         std::span<const TokenId> assignments);

struct ObjectiveTerms {
  double total = 0.0;
  double alignment = 0.0;    // unnormalized SSE
  double utilization = 0.0;  // sum_k ||c_k - mean(c)||^2
};

ObjectiveTerms codebook_objective(const EmbeddingMatrix& data, const Codebook& codebook,
                                  std::span<const TokenId> assignments, double lambda);

// distortion - beta * entropy
double regularized_loss(double distortion, double entropy, double beta);

struct MutualInformation {
  double i_hat = 0.0;  // H(v) + H(y) - H(v, y), clamped at 0
  double h_v = 0.0;
  double h_y = 0.0;
  double h_joint = 0.0;
};

MutualInformation mutual_information_estimate(std::span<const TokenId> tokens,
                                              std::span<const std::uint32_t> labels);

struct RatePoint {
  std::size_t k = 0;
  double distortion = 0.0;  // mean squared distortion
  std::size_t attempts = 1;
};

struct RateDistortionScan {
  std::vector<RatePoint> points;
  // Least-squares slope of ln D against ln K; empty when any D is zero.
  std::optional<double> slope;
  bool degenerate = false;
};

// Clusters at every K and fits the log-log slope. If D rises with K by more
// than 1e-6 relative, that K is re-run with fresh seeds (up to
// `max_retries`) and the lowest distortion kept.
RateDistortionScan rate_distortion_scan(const EmbeddingMatrix& data,
                                        std::span<const std::size_t> k_values,
                                        const ClusterConfig& cfg, std::size_t max_retries = 4);

double fit_loglog_slope(std::span<const RatePoint> points);

}  // namespace uc2
