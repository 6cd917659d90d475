#pragma once

#include <cstdint>

namespace darkflash {

std::uint64_t splitmix64(std::uint64_t x);

// Counter-based Gaussian field: the draw at (x, y, channel) depends only on
// (seed, x, y, channel), never on evaluation order, so renders are
// bit-identical across runs and thread counts.
class GaussianField {
 public:
  explicit GaussianField(std::uint64_t seed) : seed_(seed) {}

  // Standard normal draw for the given pixel/channel key.
  double sample(int x, int y, int channel) const;

 private:
  std::uint64_t seed_;
};

// Deterministic per-frame seed derivation for capture sessions.
std::uint64_t derive_seed(std::uint64_t session_seed, std::uint64_t index);

}  // namespace darkflash
