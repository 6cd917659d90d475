#include "darkflash/rng.hpp"

#include <cmath>
#include <numbers>

namespace darkflash {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

double GaussianField::sample(int x, int y, int channel) const {
  std::uint64_t h = splitmix64(seed_ ^ 0xA0761D6478BD642FULL);
  h = splitmix64(h ^ static_cast<std::uint32_t>(x));
  h = splitmix64(h ^ static_cast<std::uint32_t>(y));
  h = splitmix64(h ^ static_cast<std::uint32_t>(channel));
  const std::uint64_t a = splitmix64(h);
  const std::uint64_t b = splitmix64(a);
  // u1 in (0, 1] keeps the log finite; u2 in [0, 1).
  const double u1 = (static_cast<double>(a >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t derive_seed(std::uint64_t session_seed, std::uint64_t index) {
  return splitmix64(session_seed ^ splitmix64(index));
}

}  // namespace darkflash
