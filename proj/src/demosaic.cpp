#include "darkflash/demosaic.hpp"

#include <cmath>

#include "darkflash/error.hpp"

namespace darkflash {

namespace {

// 5x5 gradient-corrected interpolation kernels, stored pre-divided by 8.
// Every weight is an exact binary fraction, so accumulation order is the only
// thing that matters for bit-reproducibility; all users of these tables loop
// the window in the same (dy, dx) order.
constexpr double kGreenAtChroma[25] = {
    0,      0,     -0.125, 0,     0,       //
    0,      0,     0.25,   0,     0,       //
    -0.125, 0.25,  0.5,    0.25,  -0.125,  //
    0,      0,     0.25,   0,     0,       //
    0,      0,     -0.125, 0,     0,
};

// Chroma at a green site whose same-row neighbors carry that chroma.
constexpr double kChromaRowNeighbors[25] = {
    0,      0,      0.0625, 0,      0,       //
    0,      -0.125, 0,      -0.125, 0,       //
    -0.125, 0.5,    0.625,  0.5,    -0.125,  //
    0,      -0.125, 0,      -0.125, 0,       //
    0,      0,      0.0625, 0,      0,
};

// Chroma at a green site whose same-column neighbors carry that chroma.
constexpr double kChromaColumnNeighbors[25] = {
    0,      0,      -0.125, 0,      0,       //
    0,      -0.125, 0.5,    -0.125, 0,       //
    0.0625, 0,      0.625,  0,      0.0625,  //
    0,      -0.125, 0.5,    -0.125, 0,       //
    0,      0,      -0.125, 0,      0,
};

// Chroma at the opposite chroma site (diagonal neighbors carry it).
constexpr double kChromaAtChroma[25] = {
    0,       0, -0.1875, 0, 0,        //
    0,       0.25, 0,    0.25, 0,     //
    -0.1875, 0, 0.75,    0, -0.1875,  //
    0,       0.25, 0,    0.25, 0,     //
    0,       0, -0.1875, 0, 0,
};

int reflect(int i, int n) {
  // Mirror reflection about the border pixel centers (edge not repeated).
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

double apply_kernel(const LinearImage& plane, int x, int y,
                    const double* kernel) {
  const int w = plane.width();
  const int h = plane.height();
  double acc = 0.0;
  for (int dy = -2; dy <= 2; ++dy) {
    const int yy = reflect(y + dy, h);
    for (int dx = -2; dx <= 2; ++dx) {
      const int xx = reflect(x + dx, w);
      acc += kernel[(dy + 2) * 5 + (dx + 2)] * plane.at(xx, yy);
    }
  }
  return acc;
}

std::uint16_t quantize(float v, int adc_bits) {
  const double max_level = static_cast<double>((1u << adc_bits) - 1u);
  double code = std::floor(static_cast<double>(v) * max_level + 0.5);
  if (code < 0.0) code = 0.0;
  if (code > max_level) code = max_level;
  return static_cast<std::uint16_t>(static_cast<unsigned>(code)
                                    << (16 - adc_bits));
}

}  // namespace

RawFrame mosaic(const LinearImage& img, CfaPattern pattern, int adc_bits) {
  if (img.channels() != 3) {
    throw dimension_error("mosaic: input must have 3 channels");
  }
  if (img.width() % 2 != 0 || img.height() % 2 != 0) {
    throw dimension_error("mosaic: dimensions must be even");
  }
  if (adc_bits < 1 || adc_bits > 16) {
    throw domain_error("mosaic: adc_bits must lie in [1, 16]");
  }
  RawFrame raw;
  raw.width = img.width();
  raw.height = img.height();
  raw.cfa = pattern;
  raw.adc_bits = adc_bits;
  raw.data.resize(static_cast<std::size_t>(raw.width) * raw.height);
  for (int y = 0; y < raw.height; ++y) {
    for (int x = 0; x < raw.width; ++x) {
      const int c = cfa_channel(cfa_site_at(pattern, x, y));
      raw.at(x, y) = quantize(img.at(x, y, c), adc_bits);
    }
  }
  return raw;
}

LinearImage normalize_raw(const RawFrame& raw) {
  raw.validate();
  LinearImage plane(raw.width, raw.height, 1);
  const float scale =
      1.0f / static_cast<float>(raw.max_code() - raw.black_level);
  for (int y = 0; y < raw.height; ++y) {
    for (int x = 0; x < raw.width; ++x) {
      const int v = raw.at(x, y) - raw.black_level;
      plane.at(x, y) = v > 0 ? static_cast<float>(v) * scale : 0.0f;
    }
  }
  return plane;
}

LinearImage demosaic_malvar(const RawFrame& raw) {
  const LinearImage plane = normalize_raw(raw);
  const int w = plane.width();
  const int h = plane.height();
  LinearImage out(w, h, 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const CfaSite site = cfa_site_at(raw.cfa, x, y);
      const float observed = plane.at(x, y);
      float r, g, b;
      switch (site) {
        case CfaSite::r:
          r = observed;
          g = static_cast<float>(apply_kernel(plane, x, y, kGreenAtChroma));
          b = static_cast<float>(apply_kernel(plane, x, y, kChromaAtChroma));
          break;
        case CfaSite::b:
          b = observed;
          g = static_cast<float>(apply_kernel(plane, x, y, kGreenAtChroma));
          r = static_cast<float>(apply_kernel(plane, x, y, kChromaAtChroma));
          break;
        case CfaSite::g_r:
          // Red lives on this row, blue on this column.
          g = observed;
          r = static_cast<float>(
              apply_kernel(plane, x, y, kChromaRowNeighbors));
          b = static_cast<float>(
              apply_kernel(plane, x, y, kChromaColumnNeighbors));
          break;
        case CfaSite::g_b:
        default:
          g = observed;
          b = static_cast<float>(
              apply_kernel(plane, x, y, kChromaRowNeighbors));
          r = static_cast<float>(
              apply_kernel(plane, x, y, kChromaColumnNeighbors));
          break;
      }
      out.at(x, y, 0) = r;
      out.at(x, y, 1) = g;
      out.at(x, y, 2) = b;
    }
  }
  return out;
}

}  // namespace darkflash
