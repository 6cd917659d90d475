#include "darkflash/resample.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace darkflash {

LinearImage downsample_area(const LinearImage& img, int out_width,
                            int out_height) {
  if (out_width <= 0 || out_height <= 0) {
    throw dimension_error("downsample_area: output dimensions must be positive");
  }
  if (out_width > img.width() || out_height > img.height()) {
    throw dimension_error("downsample_area: output must not exceed input");
  }
  const int ch = img.channels();
  const double sx = static_cast<double>(img.width()) / out_width;
  const double sy = static_cast<double>(img.height()) / out_height;
  LinearImage out(out_width, out_height, ch);
  std::vector<double> acc(ch);
  for (int oy = 0; oy < out_height; ++oy) {
    const double y0 = oy * sy;
    const double y1 = (oy + 1) * sy;
    const int iy0 = static_cast<int>(std::floor(y0));
    const int iy1 = std::min(img.height(), static_cast<int>(std::ceil(y1)));
    for (int ox = 0; ox < out_width; ++ox) {
      const double x0 = ox * sx;
      const double x1 = (ox + 1) * sx;
      const int ix0 = static_cast<int>(std::floor(x0));
      const int ix1 = std::min(img.width(), static_cast<int>(std::ceil(x1)));
      std::fill(acc.begin(), acc.end(), 0.0);
      double total = 0.0;
      for (int iy = iy0; iy < iy1; ++iy) {
        const double wy =
            std::min(y1, static_cast<double>(iy) + 1.0) - std::max(y0, static_cast<double>(iy));
        if (wy <= 0.0) continue;
        for (int ix = ix0; ix < ix1; ++ix) {
          const double wx = std::min(x1, static_cast<double>(ix) + 1.0) -
                            std::max(x0, static_cast<double>(ix));
          if (wx <= 0.0) continue;
          const double wgt = wx * wy;
          total += wgt;
          for (int c = 0; c < ch; ++c) {
            acc[c] += wgt * img.at(ix, iy, c);
          }
        }
      }
      // Normalizing by the accumulated weight keeps each output a true convex
      // combination of its footprint even under floating-point footprints.
      for (int c = 0; c < ch; ++c) {
        out.at(ox, oy, c) = static_cast<float>(acc[c] / total);
      }
    }
  }
  return out;
}

namespace {

int reflect(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

}  // namespace

LinearImage gaussian_blur(const LinearImage& img, double sigma) {
  if (sigma <= 0.0) return img;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += kernel[i + radius];
  }
  for (double& k : kernel) k /= sum;

  const int w = img.width();
  const int h = img.height();
  const int ch = img.channels();
  LinearImage tmp(w, h, ch);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          acc += kernel[i + radius] * img.at(reflect(x + i, w), y, c);
        }
        tmp.at(x, y, c) = static_cast<float>(acc);
      }
    }
  }
  LinearImage out(w, h, ch);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          acc += kernel[i + radius] * tmp.at(x, reflect(y + i, h), c);
        }
        out.at(x, y, c) = static_cast<float>(acc);
      }
    }
  }
  return out;
}

}  // namespace darkflash
