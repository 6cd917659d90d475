#include "darkflash/metrics.hpp"

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "darkflash/error.hpp"
#include "darkflash/parallel.hpp"

namespace darkflash {

namespace {

double sample_mean(const LinearImage& img) {
  double acc = 0.0;
  for (const float v : img.data()) acc += v;
  return acc / static_cast<double>(img.size());
}

void require_same_shape(const LinearImage& a, const LinearImage& b,
                        const char* what) {
  if (!a.same_shape(b)) {
    throw dimension_error(std::string(what) + ": shape mismatch");
  }
}

}  // namespace

std::pair<LinearImage, double> normalize_brightness(const LinearImage& test,
                                                    const LinearImage& ref) {
  require_same_shape(test, ref, "normalize_brightness");
  const double mean_test = sample_mean(test);
  const double mean_ref = sample_mean(ref);
  if (mean_test == 0.0) {
    throw domain_error("normalize_brightness: test image has zero mean");
  }
  const double scale = mean_ref / mean_test;
  LinearImage out(test.width(), test.height(), test.channels());
  for (std::size_t i = 0; i < test.size(); ++i) {
    out.data()[i] = static_cast<float>(test.data()[i] * scale);
  }
  return {std::move(out), scale};
}

double psnr(const LinearImage& test, const LinearImage& ref, double peak) {
  require_same_shape(test, ref, "psnr");
  if (!(peak > 0.0)) {
    throw domain_error("psnr: peak must be > 0");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const double d =
        static_cast<double>(test.data()[i]) - static_cast<double>(ref.data()[i]);
    acc += d * d;
  }
  const double mse = acc / static_cast<double>(test.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

double ssim(const LinearImage& test, const LinearImage& ref) {
  require_same_shape(test, ref, "ssim");
  constexpr int kRadius = 5;  // 11x11 window
  constexpr double kSigma = 1.5;
  constexpr double kC1 = 0.01 * 0.01;  // (K1 * L)^2, L = 1
  constexpr double kC2 = 0.03 * 0.03;
  const int w = test.width();
  const int h = test.height();
  if (w < 2 * kRadius + 1 || h < 2 * kRadius + 1) {
    throw dimension_error("ssim: image smaller than the 11x11 window");
  }

  const LinearImage lt = test.channels() == 1 ? test : luma(test);
  const LinearImage lr = ref.channels() == 1 ? ref : luma(ref);

  std::vector<double> weights;
  weights.reserve((2 * kRadius + 1) * (2 * kRadius + 1));
  double wsum = 0.0;
  for (int dy = -kRadius; dy <= kRadius; ++dy) {
    for (int dx = -kRadius; dx <= kRadius; ++dx) {
      const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * kSigma * kSigma));
      weights.push_back(v);
      wsum += v;
    }
  }
  for (double& v : weights) v /= wsum;

  const int valid_w = w - 2 * kRadius;
  const int valid_h = h - 2 * kRadius;
  std::vector<double> row_sums(static_cast<std::size_t>(valid_h), 0.0);
  parallel_ranges(valid_h, [&](int row_begin, int row_end) {
    for (int ry = row_begin; ry < row_end; ++ry) {
      const int y = ry + kRadius;
      double acc = 0.0;
      for (int x = kRadius; x < w - kRadius; ++x) {
        double mx = 0.0, my = 0.0, xx = 0.0, yy = 0.0, xy = 0.0;
        int wi = 0;
        for (int dy = -kRadius; dy <= kRadius; ++dy) {
          for (int dx = -kRadius; dx <= kRadius; ++dx, ++wi) {
            const double wv = weights[static_cast<std::size_t>(wi)];
            const double a = lt.at(x + dx, y + dy, 0);
            const double b = lr.at(x + dx, y + dy, 0);
            mx += wv * a;
            my += wv * b;
            xx += wv * a * a;
            yy += wv * b * b;
            xy += wv * a * b;
          }
        }
        const double var_x = xx - mx * mx;
        const double var_y = yy - my * my;
        const double cov = xy - mx * my;
        acc += ((2.0 * mx * my + kC1) * (2.0 * cov + kC2)) /
               ((mx * mx + my * my + kC1) * (var_x + var_y + kC2));
      }
      row_sums[static_cast<std::size_t>(ry)] = acc;
    }
  });
  double total = 0.0;
  for (const double v : row_sums) total += v;
  return total / (static_cast<double>(valid_w) * valid_h);
}

MetricReport evaluate(const LinearImage& test, const LinearImage& ref) {
  auto [normalized, scale] = normalize_brightness(test, ref);
  MetricReport r;
  r.brightness_scale = scale;
  r.psnr_db = psnr(normalized, ref);
  r.ssim = ssim(normalized, ref);
  return r;
}

Json report_to_json(const MetricReport& r) {
  Json j;
  if (std::isinf(r.psnr_db)) {
    j["psnr_db"] = "inf";
  } else {
    j["psnr_db"] = r.psnr_db;
  }
  j["ssim"] = r.ssim;
  j["brightness_scale"] = r.brightness_scale;
  return j;
}

}  // namespace darkflash
