#include "darkflash/image.hpp"

#include <cmath>

namespace darkflash {

LinearImage::LinearImage(int width, int height, int channels, float fill)
    : width_(width), height_(height), channels_(channels) {
  if (width <= 0 || height <= 0 || channels <= 0) {
    throw dimension_error("LinearImage: dimensions must be positive");
  }
  data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

CfaSite cfa_site_at(CfaPattern pattern, int x, int y) {
  // Quad layout per pattern, indexed by (x & 1) + 2 * (y & 1).
  static constexpr CfaSite kQuads[4][4] = {
      // rggb: R G / G B
      {CfaSite::r, CfaSite::g_r, CfaSite::g_b, CfaSite::b},
      // bggr: B G / G R
      {CfaSite::b, CfaSite::g_b, CfaSite::g_r, CfaSite::r},
      // grbg: G R / B G
      {CfaSite::g_r, CfaSite::r, CfaSite::b, CfaSite::g_b},
      // gbrg: G B / R G
      {CfaSite::g_b, CfaSite::b, CfaSite::r, CfaSite::g_r},
  };
  return kQuads[static_cast<int>(pattern)][(x & 1) + 2 * (y & 1)];
}

int cfa_channel(CfaSite site) {
  switch (site) {
    case CfaSite::r:
      return 0;
    case CfaSite::g_r:
    case CfaSite::g_b:
      return 1;
    case CfaSite::b:
      return 2;
  }
  return 1;
}

std::string to_string(CfaPattern pattern) {
  switch (pattern) {
    case CfaPattern::rggb:
      return "RGGB";
    case CfaPattern::bggr:
      return "BGGR";
    case CfaPattern::grbg:
      return "GRBG";
    case CfaPattern::gbrg:
      return "GBRG";
  }
  return "RGGB";
}

CfaPattern cfa_pattern_from_string(const std::string& s) {
  if (s == "RGGB") return CfaPattern::rggb;
  if (s == "BGGR") return CfaPattern::bggr;
  if (s == "GRBG") return CfaPattern::grbg;
  if (s == "GBRG") return CfaPattern::gbrg;
  throw format_error("unknown CFA pattern: " + s);
}

LinearImage extract_channel(const LinearImage& img, int channel) {
  if (channel < 0 || channel >= img.channels()) {
    throw dimension_error("extract_channel: channel out of range");
  }
  LinearImage out(img.width(), img.height(), 1);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      out.at(x, y) = img.at(x, y, channel);
    }
  }
  return out;
}

bool all_finite(const LinearImage& img) {
  for (float v : img.data()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

LinearImage luma(const LinearImage& rgb) {
  if (rgb.channels() == 1) return rgb;
  if (rgb.channels() != 3) {
    throw dimension_error("luma: expected 1 or 3 channels");
  }
  LinearImage out(rgb.width(), rgb.height(), 1);
  for (int y = 0; y < rgb.height(); ++y) {
    for (int x = 0; x < rgb.width(); ++x) {
      out.at(x, y) = static_cast<float>(0.299 * rgb.at(x, y, 0) +
                                        0.587 * rgb.at(x, y, 1) +
                                        0.114 * rgb.at(x, y, 2));
    }
  }
  return out;
}

}  // namespace darkflash
