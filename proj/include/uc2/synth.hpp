#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "uc2/cascade_train.hpp"
#include "uc2/core_types.hpp"

namespace uc2 {

enum class SynthDistribution { kMixture, kUniform };

struct SynthSpec {
  std::size_t n = 1000;
  std::size_t dim = 8;
  std::size_t components = 4;
  // Minimum pairwise distance between component means, in units of sigma.
  double separation = 4.0;
  std::uint64_t seed = 0;
  bool labeled = false;
  SynthDistribution distribution = SynthDistribution::kMixture;
  double sigma = 1.0;

  void validate() const;
};

struct SynthData {
  EmbeddingMatrix embeddings;
  std::vector<std::uint32_t> labels;  // component ids, filled when labeled
  Matrix means;                       // components x dim (mixture only)
};

// Equal-weight isotropic Gaussian mixture (or U[0,1)^d), fully determined by
// the seed.
SynthData gen_synth(const SynthSpec& spec);

struct PairedSpec {
  std::size_t items = 256;
  std::size_t seq_len = 4;
  std::size_t dim = 8;
  std::size_t components = 8;
  double separation = 6.0;
  std::size_t prompt_dim = 8;
  // Each item draws its patches from this many distinct components.
  std::size_t components_per_item = 1;
  double prompt_noise = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct PairedData {
  PairedDataset dataset;
  std::vector<std::uint32_t> labels;  // first component of each item
  Matrix means;
};

// Prompts are noisy linear images A s + noise of each item's component
// signature s (fraction of its patches drawn from each component).
PairedData gen_paired(const PairedSpec& spec);

}  // namespace uc2
