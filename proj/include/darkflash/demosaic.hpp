#pragma once

#include "darkflash/image.hpp"
#include "darkflash/raw.hpp"

namespace darkflash {

// Samples a 3-channel linear image (values in [0, 1]) through a Bayer CFA and
// quantizes to ADC codes shifted into the 16-bit container. Quantization
// rounds half up; dimensions must be even.
RawFrame mosaic(const LinearImage& img, CfaPattern pattern, int adc_bits = 12);

// Black-level-subtracted mosaic plane normalized to [0, 1].
LinearImage normalize_raw(const RawFrame& raw);

// Gradient-corrected 5x5 linear demosaicking. Observed CFA samples pass
// through unchanged; borders use mirror reflection (no zero padding).
LinearImage demosaic_malvar(const RawFrame& raw);

}  // namespace darkflash
