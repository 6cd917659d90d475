#pragma once

#include "darkflash/image.hpp"

namespace darkflash {

// Area-weighted downsampling with exact fractional footprints; each output
// pixel is a convex combination of the source pixels it covers.
LinearImage downsample_area(const LinearImage& img, int out_width,
                            int out_height);

// Separable Gaussian blur, mirror-reflected borders, radius = ceil(3 sigma).
// sigma <= 0 returns the input unchanged.
LinearImage gaussian_blur(const LinearImage& img, double sigma);

}  // namespace darkflash
