#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "darkflash/camera.hpp"
#include "darkflash/metering.hpp"
#include "support/test_util.hpp"

using namespace darkflash;

namespace {

RawFrame raw_of(std::vector<std::uint16_t> codes, int w, int h) {
  RawFrame raw;
  raw.width = w;
  raw.height = h;
  raw.adc_bits = 16;
  raw.data = std::move(codes);
  return raw;
}

// Sensor whose percentile code is linear in exposure * gain * light, with
// per-flash-kind light boosts; clamps at the 16-bit ceiling like an ADC.
CaptureFn linear_sensor(double ambient, double white_boost = 0.0,
                        double ir_boost = 0.0, double uvir_boost = 0.0,
                        int* calls = nullptr) {
  return [=](const ExposureSettings& s) {
    double light = ambient;
    if (s.flash == FlashKind::white) light += white_boost * s.flash_fraction;
    if (s.flash == FlashKind::nir) light += ir_boost * s.flash_fraction;
    if (s.flash == FlashKind::nir_nuv) light += uvir_boost * s.flash_fraction;
    const double g = db_to_linear(s.gain_db);
    const double code =
        std::clamp(std::round(light * s.exposure_s * g), 0.0, 65535.0);
    if (calls) ++*calls;
    return raw_of(std::vector<std::uint16_t>(
                      16, static_cast<std::uint16_t>(code)),
                  4, 4);
  };
}

const CameraModel kCam1 = make_camera(CameraId::cam1, CameraPreset::ideal);
const CameraModel kCam2 = make_camera(CameraId::cam2, CameraPreset::ideal);

}  // namespace

TEST_CASE("percentile_value uses the nearest-rank definition") {
  std::vector<std::uint16_t> codes(100);
  for (int i = 0; i < 100; ++i) codes[i] = static_cast<std::uint16_t>(i + 1);
  // Shuffle determinism does not matter; nth_element sorts internally.
  std::reverse(codes.begin(), codes.end());
  const RawFrame raw = raw_of(codes, 10, 10);
  CHECK(percentile_value(raw, 0.99) == 99);  // ceil(0.99 * 100) = 99th of 1..100
  CHECK(percentile_value(raw, 0.5) == 50);
  CHECK(percentile_value(raw, 0.01) == 1);
  CHECK(percentile_value(raw, 0.999) == 100);

  const RawFrame flat = raw_of(std::vector<std::uint16_t>(16, 1234), 4, 4);
  CHECK(percentile_value(flat, 0.99) == 1234);

  CHECK_THROWS_AS(percentile_value(raw, 0.0), domain_error);
  CHECK_THROWS_AS(percentile_value(raw, 1.0), domain_error);
  CHECK_THROWS_AS(percentile_value(raw_of({}, 0, 0), 0.5), dimension_error);
}

TEST_CASE("exposure metering reproduces the reference trace") {
  // v = 1e6 * T codes: 1 ms -> 25 ms -> 48.077 ms -> 48.981 ms, where the
  // last step (0.9 ms) is below both 1 ms and 5%, so iteration stops.
  int calls = 0;
  const CaptureFn cap = linear_sensor(1e6 / db_to_linear(47.0), 0, 0, 0,
                                      &calls);
  const MeterOutcome out = meter_exposure(cap, MeteringConfig{}, kCam1);
  CHECK(out.iterations == 3);
  CHECK(calls == 3);
  CHECK(!out.clamped);
  CHECK(!out.truncated);
  CHECK(out.value == doctest::Approx(0.048981).epsilon(1e-4));
  // Three significant figures: 49.0 ms.
  CHECK(std::round(out.value * 1e4) / 10.0 == doctest::Approx(49.0));
}

TEST_CASE("exposure metering stops immediately when already on target") {
  // 49000 codes at the initial exposure: the update ratio is exactly 1.
  const CaptureFn cap = linear_sensor(4.9e7 / db_to_linear(47.0));
  const MeterOutcome out = meter_exposure(cap, MeteringConfig{}, kCam1);
  CHECK(out.iterations == 1);
  CHECK(out.value == doctest::Approx(0.001));
  CHECK(!out.clamped);
  CHECK(!out.truncated);
}

TEST_CASE("exposure metering meters at maximum gain with the flash off") {
  bool saw_expected = true;
  const CaptureFn cap = [&](const ExposureSettings& s) {
    saw_expected = saw_expected && s.flash == FlashKind::off &&
                   s.flash_fraction == 1.0 &&
                   s.gain_db == doctest::Approx(47.0);
    return raw_of(std::vector<std::uint16_t>(16, 49000), 4, 4);
  };
  meter_exposure(cap, MeteringConfig{}, kCam1);
  CHECK(saw_expected);
}

TEST_CASE("a saturating sensor truncates, and clamps with enough budget") {
  // The capture reads full-scale regardless of exposure, so T shrinks by
  // x0.7515 per step and never settles within the default budget.
  const CaptureFn cap = [](const ExposureSettings&) {
    return raw_of(std::vector<std::uint16_t>(16, 65535), 4, 4);
  };
  const MeterOutcome trunc = meter_exposure(cap, MeteringConfig{}, kCam1);
  CHECK(trunc.truncated);
  CHECK(!trunc.clamped);
  CHECK(trunc.iterations == 16);
  CHECK(trunc.value == doctest::Approx(0.001 * std::pow(50000.0 / 66535.0, 16))
                           .epsilon(1e-9));
  CHECK(trunc.value > kCam1.exposure_min_s);

  MeteringConfig roomy;
  roomy.max_iters = 32;
  const MeterOutcome clamped = meter_exposure(cap, roomy, kCam1);
  CHECK(clamped.clamped);
  CHECK(!clamped.truncated);
  CHECK(clamped.value == doctest::Approx(kCam1.exposure_min_s));
}

TEST_CASE("gain metering settles on the sensor's fixed point near 98") {
  // v = 500 g codes: g = g * 50000 / (500 g + 1000) has the fixed point
  // 500 g = 49000, i.e. g* = 98, reached from the 47 dB start in <= 6 steps.
  const CaptureFn cap = linear_sensor(500.0);
  const MeterOutcome out =
      meter_gain(cap, MeteringConfig{}, kCam2, 1.0, FlashKind::off);
  CHECK(out.value == doctest::Approx(98.0).epsilon(2e-3));
  CHECK(out.iterations <= 6);
  CHECK(!out.clamped);
  CHECK(!out.truncated);
}

TEST_CASE("gain metering starts at maximum gain and stops when on target") {
  double first_gain = 0.0;
  bool first = true;
  const CaptureFn cap = [&](const ExposureSettings& s) {
    if (first) {
      first_gain = s.gain_db;
      first = false;
    }
    return raw_of(std::vector<std::uint16_t>(16, 49000), 4, 4);
  };
  const MeterOutcome out =
      meter_gain(cap, MeteringConfig{}, kCam2, 0.05, FlashKind::nir);
  CHECK(first_gain == doctest::Approx(47.0));
  CHECK(out.iterations == 1);
  CHECK(out.value == doctest::Approx(db_to_linear(47.0)).epsilon(1e-9));
}

TEST_CASE("gain metering passes the requested flash state through") {
  bool saw_expected = true;
  const CaptureFn cap = [&](const ExposureSettings& s) {
    saw_expected = saw_expected && s.flash == FlashKind::nir_nuv &&
                   s.flash_fraction == 1.0 &&
                   s.exposure_s == doctest::Approx(0.02);
    return raw_of(std::vector<std::uint16_t>(16, 49000), 4, 4);
  };
  meter_gain(cap, MeteringConfig{}, kCam2, 0.02, FlashKind::nir_nuv);
  CHECK(saw_expected);
}

TEST_CASE("gain metering clamps at the 0 dB floor on a hot scene") {
  const CaptureFn cap = [](const ExposureSettings&) {
    return raw_of(std::vector<std::uint16_t>(16, 65535), 4, 4);
  };
  MeteringConfig roomy;
  roomy.max_iters = 32;
  const MeterOutcome out =
      meter_gain(cap, roomy, kCam2, 0.1, FlashKind::off);
  CHECK(out.clamped);
  CHECK(out.value == doctest::Approx(1.0));
}

TEST_CASE("fractional flash gain follows the two-exposure balance") {
  // Equal flash and no-flash gains mean the flash adds nothing: the answer
  // stays g_e for every n.
  for (const int n : {1, 3, 5, 7}) {
    CHECK(fractional_flash_gain(50.0, 50.0, n) == doctest::Approx(50.0));
  }
  // n = 1 lights the whole window: the full-flash gain applies.
  CHECK(fractional_flash_gain(100.0, 20.0, 1) == doctest::Approx(20.0));
  // Worked example: 4 * 100 / (4 + 100/20 - 1) = 50.
  CHECK(fractional_flash_gain(100.0, 20.0, 4) == doctest::Approx(50.0));

  // Monotone increasing in n, bounded above by the no-flash gain.
  double prev = 0.0;
  for (const int n : {1, 2, 3, 5, 7, 50, 1000}) {
    const double g = fractional_flash_gain(100.0, 20.0, n);
    CHECK(g > prev);
    CHECK(g <= 100.0);
    prev = g;
  }
  CHECK(fractional_flash_gain(100.0, 20.0, 100000) ==
        doctest::Approx(100.0).epsilon(1e-2));

  CHECK_THROWS_AS(fractional_flash_gain(10.0, 20.0, 3), domain_error);
  CHECK_THROWS_AS(fractional_flash_gain(100.0, 20.0, 0), domain_error);
  CHECK_THROWS_AS(fractional_flash_gain(100.0, 0.0, 3), domain_error);
}

TEST_CASE("burst-2 gain is n times the full-flash gain, clamped at 47 dB") {
  const ClampedGain plain = burst2_fractional_gain(10.0, 5);
  CHECK(plain.gain == doctest::Approx(50.0));
  CHECK(!plain.clamped);

  const ClampedGain unit = burst2_fractional_gain(10.0, 1);
  CHECK(unit.gain == doctest::Approx(10.0));
  CHECK(!unit.clamped);

  const ClampedGain capped = burst2_fractional_gain(100.0, 5);
  CHECK(capped.gain == doctest::Approx(db_to_linear(47.0)).epsilon(1e-9));
  CHECK(capped.clamped);
}

TEST_CASE("long exposure trades gain for time up to the 30 s ceiling") {
  const LongExposure a = long_exposure_settings(40.0, 0.1);
  CHECK(a.tau_s == doctest::Approx(10.0));
  CHECK(a.gain_linear == doctest::Approx(1.0));

  const LongExposure b = long_exposure_settings(0.0, 0.2);
  CHECK(b.tau_s == doctest::Approx(0.2));
  CHECK(b.gain_linear == doctest::Approx(1.0));

  const LongExposure c = long_exposure_settings(47.0, 0.2);
  CHECK(c.tau_s == doctest::Approx(30.0));
  CHECK(c.gain_linear ==
        doctest::Approx(db_to_linear(47.0) * 0.2 / 30.0).epsilon(1e-9));
  CHECK(c.gain_linear > 1.0);
}

TEST_CASE("meter conditions name camera and flash pairings") {
  CHECK(meter_condition(CameraId::cam1, FlashKind::off) ==
        MeterCondition::cam1_noflash);
  CHECK(meter_condition(CameraId::cam2, FlashKind::white) ==
        MeterCondition::cam2_white);
  CHECK(meter_condition(CameraId::cam1, FlashKind::nir) ==
        MeterCondition::cam1_ir);
  CHECK(meter_condition(CameraId::cam2, FlashKind::nir_nuv) ==
        MeterCondition::cam2_uvir);
  CHECK_THROWS_AS(meter_condition(CameraId::cam1, FlashKind::nuv),
                  domain_error);
  for (const MeterCondition c :
       {MeterCondition::cam1_noflash, MeterCondition::cam2_noflash,
        MeterCondition::cam1_white, MeterCondition::cam2_white,
        MeterCondition::cam1_ir, MeterCondition::cam2_ir,
        MeterCondition::cam1_uvir, MeterCondition::cam2_uvir}) {
    CHECK(meter_condition_from_string(to_string(c)) == c);
  }
}

TEST_CASE("full metering fills every table the session plan needs") {
  const CaptureFn cap1 = linear_sensor(2000.0, 30000.0, 25000.0, 35000.0);
  const CaptureFn cap2 = linear_sensor(3000.0, 30000.0, 25000.0, 35000.0);
  const MeteringResult m =
      run_full_metering(cap1, cap2, MeteringConfig{}, kCam1, kCam2);
  CHECK_NOTHROW(m.validate());
  CHECK(m.flags.empty());

  // Exposure fixed point: 2000 * T * g_max ~ 49000.
  CHECK(m.T_s ==
        doctest::Approx(49000.0 / (2000.0 * db_to_linear(47.0))).epsilon(0.01));

  // Flash conditions need less gain than no flash, never more.
  CHECK(m.gains.at(MeterCondition::cam2_white) <
        m.gains.at(MeterCondition::cam2_noflash));
  CHECK(m.gains.at(MeterCondition::cam2_ir) <
        m.gains.at(MeterCondition::cam2_noflash));
  CHECK(m.gains.at(MeterCondition::cam2_uvir) <
        m.gains.at(MeterCondition::cam2_ir));
  // cam1 metered its own exposure, so its no-flash gain is the maximum.
  CHECK(m.gains.at(MeterCondition::cam1_noflash) ==
        doctest::Approx(db_to_linear(47.0)).epsilon(1e-9));

  // Fractional tables exist for the dark-flash conditions only; white
  // stills use the plain per-condition gain.
  CHECK(m.burst1_fractional.count({MeterCondition::cam1_white, 3}) == 0);
  for (const MeterCondition cond :
       {MeterCondition::cam1_ir, MeterCondition::cam2_ir,
        MeterCondition::cam1_uvir, MeterCondition::cam2_uvir}) {
    const double g_full = m.gains.at(cond);
    const CameraId cam =
        cond == MeterCondition::cam1_ir || cond == MeterCondition::cam1_uvir
            ? CameraId::cam1
            : CameraId::cam2;
    const double g_e = m.gains.at(meter_condition(cam, FlashKind::off));
    double prev = 0.0;
    for (const int n : {3, 5, 7}) {
      const double frac = m.burst1_fractional.at({cond, n});
      CHECK(frac == doctest::Approx(fractional_flash_gain(g_e, g_full, n))
                        .epsilon(1e-9));
      CHECK(frac >= g_full - 1e-9);
      CHECK(frac <= g_e + 1e-9);
      CHECK(frac > prev);
      prev = frac;

      const double b2 = m.burst2_fractional.at({cond, n});
      CHECK(b2 == doctest::Approx(std::min(n * g_full, db_to_linear(47.0)))
                      .epsilon(1e-9));
    }
  }

  for (const CameraId cam : {CameraId::cam1, CameraId::cam2}) {
    const LongExposure& le = m.long_exposure.at(cam);
    const double g =
        m.gains.at(meter_condition(cam, FlashKind::off));
    CHECK(le.tau_s == doctest::Approx(std::min(g * m.T_s, 30.0)).epsilon(1e-9));
    CHECK(le.gain_linear >= 1.0 - 1e-12);
  }
}

TEST_CASE("a flash that darkens the sensor caps the full-flash gain") {
  // Negative boost drives the metered full-flash gain above the no-flash
  // gain, which the planner cannot use; it is capped and flagged.
  const CaptureFn cap1 = linear_sensor(2000.0, 30000.0, 25000.0, 35000.0);
  const CaptureFn cap2 = linear_sensor(3000.0, 30000.0, -1500.0, 35000.0);
  const MeteringResult m =
      run_full_metering(cap1, cap2, MeteringConfig{}, kCam1, kCam2);
  CHECK_NOTHROW(m.validate());
  bool flagged = false;
  for (const std::string& f : m.flags) {
    flagged = flagged || f == "cam2_ir:full_flash_gain_capped";
  }
  CHECK(flagged);
  // The gains table keeps the truthful metered value (still correct for
  // full-window flash frames); only the fractional interpolation is capped.
  const double g_e = m.gains.at(MeterCondition::cam2_noflash);
  CHECK(m.gains.at(MeterCondition::cam2_ir) > g_e);
  for (const int n : {3, 5, 7}) {
    CHECK(m.burst1_fractional.at({MeterCondition::cam2_ir, n}) ==
          doctest::Approx(g_e).epsilon(1e-9));
  }
}

TEST_CASE("metering results round-trip through json") {
  const MeteringResult m = run_full_metering(
      linear_sensor(2000.0, 30000.0, 25000.0, 35000.0),
      linear_sensor(3000.0, 30000.0, 25000.0, 35000.0), MeteringConfig{}, kCam1,
      kCam2);
  const Json j = metering_to_json(m);
  const MeteringResult back = metering_from_json(j);
  CHECK(back.T_s == m.T_s);
  CHECK(back.gains == m.gains);
  CHECK(back.burst1_fractional == m.burst1_fractional);
  CHECK(back.burst2_fractional == m.burst2_fractional);
  CHECK(back.long_exposure.at(CameraId::cam1).tau_s ==
        m.long_exposure.at(CameraId::cam1).tau_s);
  CHECK(back.long_exposure.at(CameraId::cam2).gain_linear ==
        m.long_exposure.at(CameraId::cam2).gain_linear);
  CHECK(back.flags == m.flags);
  CHECK(metering_to_json(back) == j);

  CHECK_THROWS_AS(metering_from_json(Json::object()), format_error);
  Json broken = j;
  broken["gains"].erase("cam2_ir");
  CHECK_THROWS_AS(metering_from_json(broken), format_error);
}

TEST_CASE("validation rejects incomplete metering tables") {
  MeteringResult m = run_full_metering(
      linear_sensor(2000.0, 30000.0, 25000.0, 35000.0),
      linear_sensor(3000.0, 30000.0, 25000.0, 35000.0), MeteringConfig{}, kCam1,
      kCam2);
  CHECK_NOTHROW(m.validate());

  MeteringResult missing_gain = m;
  missing_gain.gains.erase(MeterCondition::cam1_white);
  CHECK_THROWS_AS(missing_gain.validate(), format_error);

  MeteringResult missing_frac = m;
  missing_frac.burst1_fractional.erase({MeterCondition::cam2_uvir, 5});
  CHECK_THROWS_AS(missing_frac.validate(), format_error);

  MeteringResult missing_long = m;
  missing_long.long_exposure.erase(CameraId::cam2);
  CHECK_THROWS_AS(missing_long.validate(), format_error);

  MeteringResult bad_T = m;
  bad_T.T_s = 0.0;
  CHECK_THROWS_AS(bad_T.validate(), format_error);
}

TEST_CASE("custom target and offset move the metering fixed point") {
  MeteringConfig cfg;
  cfg.target = 10000.0;
  cfg.offset = 500.0;
  // Fixed point at v = target - offset = 9500 codes.
  const CaptureFn cap = linear_sensor(1e6 / db_to_linear(47.0));
  const MeterOutcome out = meter_exposure(cap, cfg, kCam1);
  CHECK(!out.truncated);
  const RawFrame final_frame = cap([&] {
    ExposureSettings s;
    s.exposure_s = out.value;
    s.gain_db = 47.0;
    return s;
  }());
  CHECK(std::abs(percentile_value(final_frame, cfg.percentile) - 9500.0) <
        0.05 * 9500.0);
}
