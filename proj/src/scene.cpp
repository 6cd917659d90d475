#include "darkflash/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "darkflash/error.hpp"
#include "darkflash/image_io.hpp"
#include "darkflash/resample.hpp"
#include "darkflash/rng.hpp"

namespace darkflash {

namespace fs = std::filesystem;

void SpectralScene::validate() const {
  if (width <= 0 || height <= 0) {
    throw dimension_error("scene: dimensions must be positive");
  }
  if (bands.empty() || reflectance.size() != bands.size() ||
      ambient.size() != bands.size()) {
    throw dimension_error("scene: bands, reflectance and ambient must agree");
  }
  for (const auto& plane : reflectance) {
    if (plane.width() != width || plane.height() != height ||
        plane.channels() != 1) {
      throw dimension_error("scene: reflectance plane shape mismatch");
    }
    for (float v : plane.data()) {
      if (!(v >= 0.0f && v <= 1.0f)) {
        throw domain_error("scene: reflectance outside [0, 1]");
      }
    }
  }
  if (depth.width() != width || depth.height() != height ||
      depth.channels() != 1) {
    throw dimension_error("scene: depth shape mismatch");
  }
  for (float v : depth.data()) {
    if (!(v > 0.0f) || !std::isfinite(v)) {
      throw domain_error("scene: depth must be positive and finite");
    }
  }
  for (double a : ambient) {
    if (!(a >= 0.0) || !std::isfinite(a)) {
      throw domain_error("scene: ambient must be non-negative and finite");
    }
  }
  if (!clean_rgb.empty() &&
      (clean_rgb.width() != width || clean_rgb.height() != height ||
       clean_rgb.channels() != 3)) {
    throw dimension_error("scene: clean_rgb shape mismatch");
  }
}

double SpectralScene::reflectance_at(double x, double y, int band) const {
  const LinearImage& plane = reflectance[band];
  const int w = plane.width();
  const int h = plane.height();
  const double cx = std::clamp(x, 0.0, static_cast<double>(w - 1));
  const double cy = std::clamp(y, 0.0, static_cast<double>(h - 1));
  const int x0 = static_cast<int>(std::floor(cx));
  const int y0 = static_cast<int>(std::floor(cy));
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double fx = cx - x0;
  const double fy = cy - y0;
  const double top = (1.0 - fx) * plane.at(x0, y0) + fx * plane.at(x1, y0);
  const double bot = (1.0 - fx) * plane.at(x0, y1) + fx * plane.at(x1, y1);
  return (1.0 - fy) * top + fy * bot;
}

namespace {

struct Rgb {
  double r, g, b;
};

// Deterministic palette entry with spread-out luma so neighboring regions
// always differ in the guide channel.
Rgb palette_color(std::uint64_t seed, std::uint64_t id) {
  const std::uint64_t h1 = splitmix64(seed ^ splitmix64(id * 3 + 1));
  const std::uint64_t h2 = splitmix64(h1);
  const std::uint64_t h3 = splitmix64(h2);
  auto unit = [](std::uint64_t u) {
    return static_cast<double>(u >> 11) * 0x1.0p-53;
  };
  Rgb c;
  c.r = 0.15 + 0.75 * unit(h1);
  c.g = 0.15 + 0.75 * unit(h2);
  c.b = 0.15 + 0.75 * unit(h3);
  // Bias luma by region id so chroma-only boundaries cannot occur.
  const double target = 0.25 + 0.55 * unit(splitmix64(h3));
  const double l = 0.299 * c.r + 0.587 * c.g + 0.114 * c.b;
  const double k = target / l;
  c.r = std::clamp(c.r * k, 0.05, 0.95);
  c.g = std::clamp(c.g * k, 0.05, 0.95);
  c.b = std::clamp(c.b * k, 0.05, 0.95);
  return c;
}

}  // namespace

SpectralScene make_demo_scene(int width, int height, std::uint64_t seed) {
  if (width < 32 || height < 32 || width % 2 != 0 || height % 2 != 0) {
    throw dimension_error("make_demo_scene: need even dimensions >= 32");
  }
  SpectralScene scene;
  scene.width = width;
  scene.height = height;
  scene.bands = default_band_labels();
  scene.ambient = {0.010, 0.070, 0.070, 0.070, 0.030};
  scene.preset = CameraPreset::ideal;
  scene.baseline_focal = 48.0;
  scene.noise.read_sigma = 0.02;
  scene.noise.shot_scale = 5e-4;
  scene.noise.seed = seed;
  scene.reflectance.assign(kNumBands, LinearImage(width, height, 1));
  scene.depth = LinearImage(width, height, 1, 2.0f);
  scene.clean_rgb = LinearImage(width, height, 3);

  const double cell = std::max(32.0, width / 8.0);
  const double r0 = 0.22 * std::min(width, height);
  const double r1 = 0.13 * std::min(width, height);
  const double cx0 = 0.32 * width, cy0 = 0.38 * height;
  const double cx1 = 0.70 * width, cy1 = 0.66 * height;
  constexpr double tau = 2.0 * std::numbers::pi;

  // Region albedo field. Band-limited below (soft painted edges): step
  // discontinuities in per-channel color ratio are not representative of
  // real reflectance and alias badly once mosaicked.
  LinearImage colors(width, height, 3);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      std::uint64_t region =
          static_cast<std::uint64_t>(x / static_cast<int>(cell)) * 131 +
          static_cast<std::uint64_t>(y / static_cast<int>(cell));
      const double d0 = std::hypot(x - cx0, y - cy0);
      const double d1 = std::hypot(x - cx1, y - cy1);
      if (d0 < r0) region = 7001;
      if (d1 < r1) region = 7002;
      const Rgb c = palette_color(seed, region);
      colors.at(x, y, 0) = static_cast<float>(c.r);
      colors.at(x, y, 1) = static_cast<float>(c.g);
      colors.at(x, y, 2) = static_cast<float>(c.b);
    }
  }
  colors = gaussian_blur(colors, 2.0);

  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      // Two incommensurate texture components so tile matching locks on
      // without aliasing inside the search window.
      const double m = 0.80 +
                       0.10 * std::sin(tau * x / 29.0 + 1.7) *
                           std::sin(tau * y / 23.0 + 0.6) +
                       0.10 * std::sin(tau * (x + 0.6 * y) / 53.5 + 0.9);

      const double r = std::clamp(colors.at(x, y, 0) * m, 0.0, 1.0);
      const double g = std::clamp(colors.at(x, y, 1) * m, 0.0, 1.0);
      const double b = std::clamp(colors.at(x, y, 2) * m, 0.0, 1.0);
      const double l = 0.299 * r + 0.587 * g + 0.114 * b;
      scene.reflectance[kBandRed].at(x, y) = static_cast<float>(r);
      scene.reflectance[kBandGreen].at(x, y) = static_cast<float>(g);
      scene.reflectance[kBandBlue].at(x, y) = static_cast<float>(b);
      // NIR and NUV share every visible edge (monotone in luma), so the
      // dark-flash guide sees all structure the RGB channels carry.
      scene.reflectance[kBandNir].at(x, y) =
          static_cast<float>(std::clamp(0.15 + 0.75 * l, 0.0, 1.0));
      scene.reflectance[kBandNuv].at(x, y) =
          static_cast<float>(std::clamp(0.10 + 0.45 * l + 0.25 * b, 0.0, 1.0));
      scene.clean_rgb.at(x, y, 0) = static_cast<float>(r);
      scene.clean_rgb.at(x, y, 1) = static_cast<float>(g);
      scene.clean_rgb.at(x, y, 2) = static_cast<float>(b);
    }
  }
  scene.validate();
  return scene;
}

void save_scene(const fs::path& dir, const SpectralScene& scene) {
  scene.validate();
  fs::create_directories(dir);
  Json j;
  j["width"] = scene.width;
  j["height"] = scene.height;
  j["bands"] = scene.bands;
  j["ambient"] = scene.ambient;
  j["preset"] = to_string(scene.preset);
  j["baseline_focal"] = scene.baseline_focal;
  j["noise"] = Json{{"read_sigma", scene.noise.read_sigma},
                    {"shot_scale", scene.noise.shot_scale},
                    {"seed", scene.noise.seed}};
  Json refl = Json::array();
  for (std::size_t b = 0; b < scene.bands.size(); ++b) {
    const std::string name = "reflectance_" + scene.bands[b] + ".pfm";
    write_pfm(dir / name, scene.reflectance[b]);
    refl.push_back(name);
  }
  j["reflectance"] = refl;
  write_pfm(dir / "depth.pfm", scene.depth);
  j["depth"] = "depth.pfm";
  if (!scene.clean_rgb.empty()) {
    write_pfm(dir / "clean_rgb.pfm", scene.clean_rgb);
    j["clean_rgb"] = "clean_rgb.pfm";
  } else {
    j["clean_rgb"] = nullptr;
  }
  write_json_file(dir / "scene.json", j);
}

SpectralScene load_scene(const fs::path& json_path) {
  const fs::path dir = json_path.parent_path();
  const Json j = read_json_file(json_path);
  SpectralScene scene;
  try {
    scene.width = j.at("width").get<int>();
    scene.height = j.at("height").get<int>();
    scene.bands = j.at("bands").get<std::vector<std::string>>();
    scene.ambient = j.at("ambient").get<std::vector<double>>();
    scene.preset = preset_from_string(j.at("preset").get<std::string>());
    scene.baseline_focal = j.at("baseline_focal").get<double>();
    const Json& n = j.at("noise");
    scene.noise.read_sigma = n.at("read_sigma").get<double>();
    scene.noise.shot_scale = n.at("shot_scale").get<double>();
    scene.noise.seed = n.at("seed").get<std::uint64_t>();
    for (const auto& name : j.at("reflectance")) {
      scene.reflectance.push_back(read_pfm(dir / name.get<std::string>()));
    }
    scene.depth = read_pfm(dir / j.at("depth").get<std::string>());
    if (!j.at("clean_rgb").is_null()) {
      scene.clean_rgb = read_pfm(dir / j.at("clean_rgb").get<std::string>());
    }
  } catch (const Json::exception& e) {
    throw format_error("bad scene header " + json_path.string() + ": " +
                       e.what());
  }
  scene.validate();
  return scene;
}

}  // namespace darkflash
