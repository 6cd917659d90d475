#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "darkflash/camera.hpp"
#include "darkflash/json.hpp"
#include "darkflash/raw.hpp"

namespace darkflash {

struct MeteringConfig {
  double target = 50000.0;     // desired percentile level in 16-bit counts
  double offset = 1000.0;      // denominator bias of the update ratio
  double percentile = 0.99;
  double stop_delta_s = 0.001;
  int max_iters = 16;
  double initial_T_s = 0.001;
  double gain_rel_stop = 1e-3;
};

using CaptureFn = std::function<RawFrame(const ExposureSettings&)>;

// Nearest-rank percentile over all mosaic samples, p in (0, 1).
std::uint16_t percentile_value(const RawFrame& raw, double p);

struct MeterOutcome {
  double value = 0.0;      // exposure seconds or linear gain
  bool clamped = false;    // envelope bound active on the final update
  bool truncated = false;  // stopped by max_iters
  int iterations = 0;
};

// Iterates T <- T * target / (v + offset) at maximum gain, flash off, from
// initial_T_s, stopping once a step is both below stop_delta_s and below 5%
// of the previous exposure. v is the configured percentile of the capture.
MeterOutcome meter_exposure(const CaptureFn& capture, const MeteringConfig& cfg,
                            const CameraModel& cam);

// Same multiplicative update on linear gain at fixed exposure T_s and the
// given flash state (full window), starting from maximum gain; stops when the
// relative gain change drops below gain_rel_stop.
MeterOutcome meter_gain(const CaptureFn& capture, const MeteringConfig& cfg,
                        const CameraModel& cam, double T_s, FlashKind flash);

// Gain for a flash lit 1/n of the exposure window, from the no-flash gain g_e
// and the full-flash gain g_ef:  n * g_e / (n + g_e / g_ef - 1).
double fractional_flash_gain(double g_e, double g_ef, int n);

inline constexpr double kMaxGainDb = 47.0;

struct ClampedGain {
  double gain = 0.0;
  bool clamped = false;
};

// Burst-2 flash-frame gain: n x the full-flash gain, clamped at 47 dB.
ClampedGain burst2_fractional_gain(double g_full_flash, int n);

struct LongExposure {
  double tau_s = 0.0;
  double gain_linear = 1.0;
};

// tau = min(10^(g_db/20) * T, 30 s); residual gain = 10^(g_db/20) * T / tau.
LongExposure long_exposure_settings(double gain_db, double T_s);

enum class MeterCondition {
  cam1_noflash,
  cam2_noflash,
  cam1_white,
  cam2_white,
  cam1_ir,
  cam2_ir,
  cam1_uvir,
  cam2_uvir,
};

std::string to_string(MeterCondition c);
MeterCondition meter_condition_from_string(const std::string& s);
MeterCondition meter_condition(CameraId cam, FlashKind flash);

struct MeteringResult {
  double T_s = 0.0;
  std::map<MeterCondition, double> gains;  // linear
  // Keyed by (flash condition, n in {3,5,7}); n = 1 uses `gains` directly.
  std::map<std::pair<MeterCondition, int>, double> burst1_fractional;
  std::map<std::pair<MeterCondition, int>, double> burst2_fractional;
  std::map<CameraId, LongExposure> long_exposure;
  std::vector<std::string> flags;

  // Throws format_error when any entry required by session planning is
  // missing; a metering result is all-or-nothing.
  void validate() const;
};

// Full metering sequence: exposure from cam1 at max gain, per-condition gains,
// fractional burst gains for n in {3,5,7}, long-exposure settings per camera.
MeteringResult run_full_metering(const CaptureFn& capture_cam1,
                                 const CaptureFn& capture_cam2,
                                 const MeteringConfig& cfg,
                                 const CameraModel& cam1,
                                 const CameraModel& cam2);

Json metering_to_json(const MeteringResult& m);
MeteringResult metering_from_json(const Json& j);

}  // namespace darkflash
