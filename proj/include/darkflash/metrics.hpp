#pragma once

#include <utility>

#include "darkflash/image.hpp"
#include "darkflash/json.hpp"

namespace darkflash {

struct MetricReport {
  double psnr_db = 0.0;  // +inf when images are identical
  double ssim = 0.0;
  double brightness_scale = 1.0;
};

// Scales test so its global mean matches ref's: scale = mean(ref)/mean(test).
// Throws domain_error when mean(test) is zero.
std::pair<LinearImage, double> normalize_brightness(const LinearImage& test,
                                                    const LinearImage& ref);

// 10 log10(peak^2 / MSE) over all channels; +inf for identical inputs.
double psnr(const LinearImage& test, const LinearImage& ref,
            double peak = 1.0);

// Mean SSIM on luma, 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
// K2 = 0.03, dynamic range 1.0; windows fully inside the image only.
double ssim(const LinearImage& test, const LinearImage& ref);

// Brightness-normalized PSNR + SSIM.
MetricReport evaluate(const LinearImage& test, const LinearImage& ref);

Json report_to_json(const MetricReport& r);

}  // namespace darkflash
