#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "uc2/core_types.hpp"

namespace uc2 {

std::string sha256_hex(std::span<const std::byte> bytes);

template <typename T>
std::string sha256_hex_of(std::span<const T> values) {
  return sha256_hex(std::as_bytes(values));
}

// Digest of the raw centroid bytes of a codebook.
inline std::string checksum(const Codebook& codebook) {
  return sha256_hex_of(codebook.centroids().values());
}

}  // namespace uc2
