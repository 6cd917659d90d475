#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "darkflash/image.hpp"

namespace darkflash {

enum class CameraId { cam1, cam2 };
enum class FlashKind { off, nir, nuv, nir_nuv, white };
enum class CameraPreset { ideal, prototype };

// Band order used throughout: NUV, Blue, Green, Red, NIR.
inline constexpr int kNumBands = 5;
inline constexpr int kBandNuv = 0;
inline constexpr int kBandBlue = 1;
inline constexpr int kBandGreen = 2;
inline constexpr int kBandRed = 3;
inline constexpr int kBandNir = 4;

const std::vector<std::string>& default_band_labels();

struct NoiseParams {
  double read_sigma = 0.0;  // stddev of the signal-independent term
  double shot_scale = 0.0;  // variance contribution per unit signal
  std::uint64_t seed = 0;

  bool enabled() const { return read_sigma > 0.0 || shot_scale > 0.0; }
};

struct FlashModel {
  FlashKind kind = FlashKind::off;
  std::vector<double> emission;  // per band, radiance at full power
};

struct ExposureSettings {
  double exposure_s = 0.001;
  double gain_db = 0.0;
  FlashKind flash = FlashKind::off;
  double flash_fraction = 1.0;  // flash on-time / exposure window, (0, 1]
  NoiseParams noise;
};

struct CameraModel {
  CameraId id = CameraId::cam1;
  // response[channel][band]: sensitivity of the R/G/B CFA channels per band.
  std::array<std::vector<double>, 3> response;
  double gain_db_min = 0.0;
  double gain_db_max = 47.0;
  double exposure_min_s = 6e-6;
  double exposure_max_s = 30.0;
  int adc_bits = 12;
  double frame_interval_floor_s = 0.040;
  CfaPattern cfa = CfaPattern::rggb;
  double baseline_focal = 0.0;  // f*b in pixel*meters; 0 for the reference view

  double max_linear_gain() const;
  // Throws range_error when settings fall outside the envelope.
  void validate_settings(const ExposureSettings& s) const;
};

double db_to_linear(double db);
double linear_to_db(double gain);

CameraModel make_camera(CameraId id, CameraPreset preset,
                        double baseline_focal = 0.0);
FlashModel make_flash(FlashKind kind, CameraPreset preset);

std::string to_string(CameraId id);
std::string to_string(FlashKind kind);
std::string to_string(CameraPreset preset);
CameraId camera_id_from_string(const std::string& s);
FlashKind flash_kind_from_string(const std::string& s);
CameraPreset preset_from_string(const std::string& s);

}  // namespace darkflash
