#pragma once

#include "darkflash/camera.hpp"
#include "darkflash/raw.hpp"
#include "darkflash/scene.hpp"

namespace darkflash {

// Pinhole disparity in pixels: baseline_focal / depth. depth must be > 0.
double disparity_from_depth(double depth_m, const CameraModel& cam);

struct RenderOptions {
  bool with_noise = true;
  bool clip = true;
};

// Per-channel signal before mosaicking:
//   s = T * g * sum_b response[ch][b] * reflectance[b] * (ambient[b] +
//       flash_fraction * emission[b])
// cam2 renders the scene in place; cameras with nonzero baseline_focal gather
// the scene at x + disparity(depth) with bilinear interpolation (border
// clamped), so the ground-truth gather flow back to the reference view is
// exactly -disparity. Noise is Gaussian with variance
// read_sigma^2 + shot_scale * s, keyed on (seed, x, y, channel).
LinearImage render_linear(const SpectralScene& scene, const CameraModel& cam,
                          const ExposureSettings& settings,
                          const RenderOptions& opts = {});

// Full sensor path: render, clip to [0, 1], mosaic, quantize.
RawFrame render_frame(const SpectralScene& scene, const CameraModel& cam,
                      const ExposureSettings& settings);

}  // namespace darkflash
