#include "darkflash/camera.hpp"

#include <cmath>

#include "darkflash/error.hpp"

namespace darkflash {

const std::vector<std::string>& default_band_labels() {
  static const std::vector<std::string> kLabels = {"NUV", "Blue", "Green",
                                                   "Red", "NIR"};
  return kLabels;
}

double db_to_linear(double db) { return std::pow(10.0, db / 20.0); }

double linear_to_db(double gain) {
  if (gain <= 0.0) throw domain_error("linear_to_db: gain must be positive");
  return 20.0 * std::log10(gain);
}

double CameraModel::max_linear_gain() const { return db_to_linear(gain_db_max); }

void CameraModel::validate_settings(const ExposureSettings& s) const {
  // Tolerance absorbs dB<->linear round trips landing a hair above the bound.
  constexpr double kTol = 1e-9;
  if (!(s.exposure_s >= exposure_min_s - kTol &&
        s.exposure_s <= exposure_max_s + kTol)) {
    throw range_error("exposure " + std::to_string(s.exposure_s) +
                      " s outside envelope [" + std::to_string(exposure_min_s) +
                      ", " + std::to_string(exposure_max_s) + "]");
  }
  if (!(s.gain_db >= gain_db_min - kTol && s.gain_db <= gain_db_max + kTol)) {
    throw range_error("gain " + std::to_string(s.gain_db) +
                      " dB outside envelope [" + std::to_string(gain_db_min) +
                      ", " + std::to_string(gain_db_max) + "]");
  }
  if (!(s.flash_fraction > 0.0 && s.flash_fraction <= 1.0)) {
    throw range_error("flash_fraction must lie in (0, 1]");
  }
  if (s.flash == FlashKind::off && s.flash_fraction != 1.0) {
    throw range_error("flash_fraction must be 1 when the flash is off");
  }
}

namespace {

std::vector<double> band_vector(double nuv, double blue, double green,
                                double red, double nir) {
  return {nuv, blue, green, red, nir};
}

}  // namespace

CameraModel make_camera(CameraId id, CameraPreset preset,
                        double baseline_focal) {
  CameraModel cam;
  cam.id = id;
  cam.baseline_focal = baseline_focal;
  if (id == CameraId::cam1) {
    // Visible-light camera: box responses on Blue/Green/Red only.
    cam.response[0] = band_vector(0, 0, 0, 1, 0);
    cam.response[1] = band_vector(0, 0, 1, 0, 0);
    cam.response[2] = band_vector(0, 1, 0, 0, 0);
  } else {
    // Dark-flash camera: NIR in the R position, NUV in the B position.
    cam.response[0] = band_vector(0, 0, 0, 0, 1);
    cam.response[1] = band_vector(0, 0, 1, 0, 0);
    cam.response[2] = band_vector(1, 0, 0, 0, 0);
    if (preset == CameraPreset::prototype) {
      // Measured filter stack: the green channel leaks 20% of NIR.
      cam.response[1][kBandNir] = 0.2;
    }
  }
  return cam;
}

FlashModel make_flash(FlashKind kind, CameraPreset preset) {
  FlashModel flash;
  flash.kind = kind;
  constexpr double kEmission = 2.0;  // full-power radiance per lit band
  flash.emission.assign(kNumBands, 0.0);
  switch (kind) {
    case FlashKind::off:
      break;
    case FlashKind::nir:
      flash.emission[kBandNir] = kEmission;
      break;
    case FlashKind::nuv:
      flash.emission[kBandNuv] = kEmission;
      break;
    case FlashKind::nir_nuv:
      flash.emission[kBandNir] = kEmission;
      flash.emission[kBandNuv] = kEmission;
      break;
    case FlashKind::white:
      flash.emission[kBandBlue] = kEmission;
      flash.emission[kBandGreen] = kEmission;
      flash.emission[kBandRed] = kEmission;
      break;
  }
  if (preset == CameraPreset::prototype &&
      (kind == FlashKind::nir || kind == FlashKind::nir_nuv)) {
    // The physical NIR emitter spills a little red.
    flash.emission[kBandRed] += 0.05 * kEmission;
  }
  return flash;
}

std::string to_string(CameraId id) {
  return id == CameraId::cam1 ? "cam1" : "cam2";
}

std::string to_string(FlashKind kind) {
  switch (kind) {
    case FlashKind::off:
      return "off";
    case FlashKind::nir:
      return "nir";
    case FlashKind::nuv:
      return "nuv";
    case FlashKind::nir_nuv:
      return "nir_nuv";
    case FlashKind::white:
      return "white";
  }
  return "off";
}

std::string to_string(CameraPreset preset) {
  return preset == CameraPreset::ideal ? "ideal" : "prototype";
}

CameraId camera_id_from_string(const std::string& s) {
  if (s == "cam1") return CameraId::cam1;
  if (s == "cam2") return CameraId::cam2;
  throw format_error("unknown camera id: " + s);
}

FlashKind flash_kind_from_string(const std::string& s) {
  if (s == "off") return FlashKind::off;
  if (s == "nir") return FlashKind::nir;
  if (s == "nuv") return FlashKind::nuv;
  if (s == "nir_nuv") return FlashKind::nir_nuv;
  if (s == "white") return FlashKind::white;
  throw format_error("unknown flash kind: " + s);
}

CameraPreset preset_from_string(const std::string& s) {
  if (s == "ideal") return CameraPreset::ideal;
  if (s == "prototype") return CameraPreset::prototype;
  throw format_error("unknown camera preset: " + s);
}

}  // namespace darkflash
