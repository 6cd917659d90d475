#include "darkflash/raw.hpp"

#include <string>

#include "darkflash/error.hpp"

namespace darkflash {

std::uint16_t RawFrame::max_code() const {
  const int shift = 16 - adc_bits;
  return static_cast<std::uint16_t>(((1u << adc_bits) - 1u) << shift);
}

void RawFrame::validate() const {
  if (width <= 0 || height <= 0) {
    throw dimension_error("RawFrame: dimensions must be positive");
  }
  if (width % 2 != 0 || height % 2 != 0) {
    throw dimension_error("RawFrame: dimensions must be even (full CFA quads)");
  }
  if (data.size() != static_cast<std::size_t>(width) * height) {
    throw dimension_error("RawFrame: data size does not match dimensions");
  }
  if (adc_bits < 1 || adc_bits > 16) {
    throw domain_error("RawFrame: adc_bits must lie in [1, 16]");
  }
  const std::uint16_t maxc = max_code();
  for (std::uint16_t v : data) {
    if (v > maxc) {
      throw domain_error("RawFrame: sample " + std::to_string(v) +
                         " above max code " + std::to_string(maxc));
    }
  }
}

}  // namespace darkflash
