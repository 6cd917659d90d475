#include "darkflash/render.hpp"

#include <algorithm>
#include <cmath>

#include "darkflash/demosaic.hpp"
#include "darkflash/error.hpp"
#include "darkflash/parallel.hpp"
#include "darkflash/rng.hpp"

namespace darkflash {

double disparity_from_depth(double depth_m, const CameraModel& cam) {
  if (!(depth_m > 0.0)) {
    throw domain_error("disparity_from_depth: depth must be positive");
  }
  return cam.baseline_focal / depth_m;
}

LinearImage render_linear(const SpectralScene& scene, const CameraModel& cam,
                          const ExposureSettings& settings,
                          const RenderOptions& opts) {
  scene.validate();
  cam.validate_settings(settings);
  const std::size_t bands = scene.bands.size();
  for (const auto& row : cam.response) {
    if (row.size() != bands) {
      throw dimension_error("render: camera response does not cover the scene bands");
    }
  }
  const FlashModel flash = make_flash(settings.flash, scene.preset);
  std::vector<double> light(bands);
  for (std::size_t b = 0; b < bands; ++b) {
    light[b] = scene.ambient[b] + settings.flash_fraction * flash.emission[b];
  }
  const double tg = settings.exposure_s * db_to_linear(settings.gain_db);
  const GaussianField field(settings.noise.seed);
  const bool noisy = opts.with_noise && settings.noise.enabled();
  const bool shifted = cam.baseline_focal != 0.0;

  LinearImage out(scene.width, scene.height, 3);
  parallel_ranges(scene.height, [&](int y_begin, int y_end) {
    for (int y = y_begin; y < y_end; ++y) {
      for (int x = 0; x < scene.width; ++x) {
        double sx = x;
        if (shifted) {
          // View synthesis gathers the reference-view scene at +disparity so
          // the gather flow back to the reference view is exactly -disparity.
          sx += disparity_from_depth(scene.depth.at(x, y), cam);
        }
        for (int k = 0; k < 3; ++k) {
          double s = 0.0;
          for (std::size_t b = 0; b < bands; ++b) {
            const double resp = cam.response[k][b];
            if (resp == 0.0) continue;
            const double refl =
                shifted ? scene.reflectance_at(sx, y, static_cast<int>(b))
                        : scene.reflectance[b].at(x, y);
            s += resp * refl * light[b];
          }
          s *= tg;
          if (noisy) {
            const double var = settings.noise.read_sigma * settings.noise.read_sigma +
                               settings.noise.shot_scale * std::max(s, 0.0);
            s += std::sqrt(var) * field.sample(x, y, k);
          }
          if (opts.clip) s = std::clamp(s, 0.0, 1.0);
          out.at(x, y, k) = static_cast<float>(s);
        }
      }
    }
  });
  return out;
}

RawFrame render_frame(const SpectralScene& scene, const CameraModel& cam,
                      const ExposureSettings& settings) {
  if (scene.width % 2 != 0 || scene.height % 2 != 0) {
    throw dimension_error("render_frame: scene dimensions must be even");
  }
  const LinearImage img = render_linear(scene, cam, settings);
  RawFrame raw = mosaic(img, cam.cfa, cam.adc_bits);
  raw.camera_id = cam.id;
  raw.settings = settings;
  return raw;
}

}  // namespace darkflash
