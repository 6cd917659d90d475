#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "darkflash/camera.hpp"
#include "darkflash/image.hpp"

namespace darkflash {

// Band-sampled scene description at the reference (cam2) viewpoint.
struct SpectralScene {
  int width = 0;
  int height = 0;
  std::vector<std::string> bands;         // labels, band order fixed
  std::vector<LinearImage> reflectance;   // one 1-channel plane per band
  LinearImage depth;                      // 1 channel, meters, > 0
  std::vector<double> ambient;            // per-band ambient radiance
  LinearImage clean_rgb;                  // optional 3-channel fusion target
  CameraPreset preset = CameraPreset::ideal;
  double baseline_focal = 48.0;           // cam1 rig constant, pixel*meters
  NoiseParams noise;

  void validate() const;

  // Bilinear reflectance lookup with border clamping.
  double reflectance_at(double x, double y, int band) const;
};

// Procedural low-light test scene: piecewise colored regions with texture,
// constant depth, and an NIR band that shares every visible edge.
SpectralScene make_demo_scene(int width, int height, std::uint64_t seed = 7);

// On disk: <dir>/scene.json plus PFM payloads referenced by it.
void save_scene(const std::filesystem::path& dir, const SpectralScene& scene);
SpectralScene load_scene(const std::filesystem::path& json_path);

}  // namespace darkflash
