#pragma once

#include <cstdint>
#include <vector>

#include "darkflash/camera.hpp"
#include "darkflash/image.hpp"

namespace darkflash {

// Bayer mosaic as captured: ADC codes left-shifted into the 16-bit container
// (12-bit codes occupy the top bits, low 16 - adc_bits bits are zero).
struct RawFrame {
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> data;  // row-major
  CfaPattern cfa = CfaPattern::rggb;
  int adc_bits = 12;
  std::uint16_t black_level = 0;
  CameraId camera_id = CameraId::cam1;
  ExposureSettings settings;

  std::uint16_t at(int x, int y) const {
    return data[static_cast<std::size_t>(y) * width + x];
  }
  std::uint16_t& at(int x, int y) {
    return data[static_cast<std::size_t>(y) * width + x];
  }

  // Largest representable sample: (2^adc_bits - 1) << (16 - adc_bits).
  std::uint16_t max_code() const;

  // Throws dimension_error / domain_error on violated structural invariants
  // (odd dimensions, size mismatch, samples above max_code).
  void validate() const;
};

}  // namespace darkflash
