#include "darkflash/metering.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "darkflash/error.hpp"

namespace darkflash {

std::uint16_t percentile_value(const RawFrame& raw, double p) {
  if (raw.data.empty()) {
    throw dimension_error("percentile_value: empty frame");
  }
  if (!(p > 0.0 && p < 1.0)) {
    throw domain_error("percentile_value: p must lie in (0, 1)");
  }
  std::vector<std::uint16_t> samples(raw.data);
  // Nearest-rank: the k-th smallest with k = ceil(p * N).
  const std::size_t n = samples.size();
  std::size_t k = static_cast<std::size_t>(
      std::ceil(p * static_cast<double>(n)));
  k = std::clamp<std::size_t>(k, 1, n);
  std::nth_element(samples.begin(), samples.begin() + (k - 1), samples.end());
  return samples[k - 1];
}

namespace {

// A step counts as settled only when it is small both absolutely and
// relative to the previous value; purely absolute stopping would freeze
// saturated scenes right next to the tiny initial exposure.
bool settled(double step, double prev, double abs_stop) {
  return step < abs_stop && step <= 0.05 * std::abs(prev);
}

}  // namespace

MeterOutcome meter_exposure(const CaptureFn& capture, const MeteringConfig& cfg,
                            const CameraModel& cam) {
  ExposureSettings s;
  s.gain_db = cam.gain_db_max;
  s.flash = FlashKind::off;
  s.flash_fraction = 1.0;
  double T = std::clamp(cfg.initial_T_s, cam.exposure_min_s, cam.exposure_max_s);

  MeterOutcome out;
  for (int iter = 1; iter <= cfg.max_iters; ++iter) {
    s.exposure_s = T;
    const RawFrame raw = capture(s);
    const double v = percentile_value(raw, cfg.percentile);
    const double ratio = cfg.target / (v + cfg.offset);
    if (!std::isfinite(ratio) || ratio <= 0.0) {
      throw numeric_error("meter_exposure: non-finite update ratio");
    }
    const double unclamped = T * ratio;
    const double next =
        std::clamp(unclamped, cam.exposure_min_s, cam.exposure_max_s);
    out.iterations = iter;
    out.clamped = next != unclamped;
    const double step = std::abs(next - T);
    const double prev = T;
    T = next;
    if (settled(step, prev, cfg.stop_delta_s)) {
      out.value = T;
      return out;
    }
  }
  out.value = T;
  out.truncated = true;
  return out;
}

MeterOutcome meter_gain(const CaptureFn& capture, const MeteringConfig& cfg,
                        const CameraModel& cam, double T_s, FlashKind flash) {
  const double g_min = db_to_linear(cam.gain_db_min);
  const double g_max = db_to_linear(cam.gain_db_max);
  ExposureSettings s;
  s.exposure_s = T_s;
  s.flash = flash;
  s.flash_fraction = 1.0;
  double g = g_max;

  MeterOutcome out;
  for (int iter = 1; iter <= cfg.max_iters; ++iter) {
    s.gain_db = linear_to_db(g);
    const RawFrame raw = capture(s);
    const double v = percentile_value(raw, cfg.percentile);
    const double ratio = cfg.target / (v + cfg.offset);
    if (!std::isfinite(ratio) || ratio <= 0.0) {
      throw numeric_error("meter_gain: non-finite update ratio");
    }
    const double unclamped = g * ratio;
    const double next = std::clamp(unclamped, g_min, g_max);
    out.iterations = iter;
    out.clamped = next != unclamped;
    const double rel = std::abs(next - g) / g;
    g = next;
    if (rel < cfg.gain_rel_stop) {
      out.value = g;
      return out;
    }
  }
  out.value = g;
  out.truncated = true;
  return out;
}

double fractional_flash_gain(double g_e, double g_ef, int n) {
  if (!(g_ef > 0.0) || !(g_e > 0.0)) {
    throw domain_error("fractional_flash_gain: gains must be positive");
  }
  if (g_e < g_ef) {
    throw domain_error(
        "fractional_flash_gain: no-flash gain below full-flash gain");
  }
  if (n < 1) {
    throw domain_error("fractional_flash_gain: n must be >= 1");
  }
  return n * g_e / (n + g_e / g_ef - 1.0);
}

ClampedGain burst2_fractional_gain(double g_full_flash, int n) {
  if (!(g_full_flash > 0.0)) {
    throw domain_error("burst2_fractional_gain: gain must be positive");
  }
  if (n < 1) {
    throw domain_error("burst2_fractional_gain: n must be >= 1");
  }
  const double g_max = db_to_linear(kMaxGainDb);
  const double g = n * g_full_flash;
  if (g > g_max) {
    return {g_max, true};
  }
  return {g, false};
}

LongExposure long_exposure_settings(double gain_db, double T_s) {
  if (!(T_s > 0.0)) {
    throw domain_error("long_exposure_settings: T must be positive");
  }
  constexpr double kMaxExposure = 30.0;
  const double product = db_to_linear(gain_db) * T_s;
  LongExposure le;
  le.tau_s = std::min(product, kMaxExposure);
  le.gain_linear = product / le.tau_s;
  return le;
}

std::string to_string(MeterCondition c) {
  switch (c) {
    case MeterCondition::cam1_noflash:
      return "cam1_noflash";
    case MeterCondition::cam2_noflash:
      return "cam2_noflash";
    case MeterCondition::cam1_white:
      return "cam1_white";
    case MeterCondition::cam2_white:
      return "cam2_white";
    case MeterCondition::cam1_ir:
      return "cam1_ir";
    case MeterCondition::cam2_ir:
      return "cam2_ir";
    case MeterCondition::cam1_uvir:
      return "cam1_uvir";
    case MeterCondition::cam2_uvir:
      return "cam2_uvir";
  }
  return "cam1_noflash";
}

MeterCondition meter_condition_from_string(const std::string& s) {
  for (int i = 0; i < 8; ++i) {
    const auto c = static_cast<MeterCondition>(i);
    if (to_string(c) == s) return c;
  }
  throw format_error("unknown metering condition: " + s);
}

MeterCondition meter_condition(CameraId cam, FlashKind flash) {
  const bool one = cam == CameraId::cam1;
  switch (flash) {
    case FlashKind::off:
      return one ? MeterCondition::cam1_noflash : MeterCondition::cam2_noflash;
    case FlashKind::white:
      return one ? MeterCondition::cam1_white : MeterCondition::cam2_white;
    case FlashKind::nir:
      return one ? MeterCondition::cam1_ir : MeterCondition::cam2_ir;
    case FlashKind::nir_nuv:
      return one ? MeterCondition::cam1_uvir : MeterCondition::cam2_uvir;
    case FlashKind::nuv:
      break;
  }
  throw domain_error("no metering condition for flash kind " +
                     to_string(flash));
}

void MeteringResult::validate() const {
  if (!(T_s > 0.0)) {
    throw format_error("metering: missing exposure");
  }
  for (int i = 0; i < 8; ++i) {
    const auto c = static_cast<MeterCondition>(i);
    if (!gains.count(c)) {
      throw format_error("incomplete metering: missing gain for " +
                         to_string(c));
    }
  }
  static constexpr MeterCondition kFlashConds[] = {
      MeterCondition::cam1_ir, MeterCondition::cam2_ir,
      MeterCondition::cam1_uvir, MeterCondition::cam2_uvir};
  for (const auto c : kFlashConds) {
    for (int n : {3, 5, 7}) {
      if (!burst1_fractional.count({c, n})) {
        throw format_error("incomplete metering: missing burst-1 gain for " +
                           to_string(c) + " n=" + std::to_string(n));
      }
      if (!burst2_fractional.count({c, n})) {
        throw format_error("incomplete metering: missing burst-2 gain for " +
                           to_string(c) + " n=" + std::to_string(n));
      }
    }
  }
  if (!long_exposure.count(CameraId::cam1) ||
      !long_exposure.count(CameraId::cam2)) {
    throw format_error("incomplete metering: missing long-exposure settings");
  }
}

namespace {

void note_flags(std::vector<std::string>& flags, const std::string& who,
                const MeterOutcome& o) {
  if (o.clamped) flags.push_back(who + ":clamped");
  if (o.truncated) flags.push_back(who + ":truncated");
}

}  // namespace

MeteringResult run_full_metering(const CaptureFn& capture_cam1,
                                 const CaptureFn& capture_cam2,
                                 const MeteringConfig& cfg,
                                 const CameraModel& cam1,
                                 const CameraModel& cam2) {
  MeteringResult m;
  const MeterOutcome exposure = meter_exposure(capture_cam1, cfg, cam1);
  m.T_s = exposure.value;
  note_flags(m.flags, "exposure", exposure);

  // The exposure search pins cam1 at maximum gain, so that IS its no-flash
  // gain; cam2's is metered at the chosen exposure.
  m.gains[MeterCondition::cam1_noflash] = cam1.max_linear_gain();
  {
    const MeterOutcome o =
        meter_gain(capture_cam2, cfg, cam2, m.T_s, FlashKind::off);
    m.gains[MeterCondition::cam2_noflash] = o.value;
    note_flags(m.flags, "cam2_noflash", o);
  }
  for (const FlashKind kind :
       {FlashKind::white, FlashKind::nir, FlashKind::nir_nuv}) {
    for (const CameraId id : {CameraId::cam1, CameraId::cam2}) {
      const auto& capture =
          id == CameraId::cam1 ? capture_cam1 : capture_cam2;
      const auto& cam = id == CameraId::cam1 ? cam1 : cam2;
      const MeterCondition cond = meter_condition(id, kind);
      const MeterOutcome o = meter_gain(capture, cfg, cam, m.T_s, kind);
      m.gains[cond] = o.value;
      note_flags(m.flags, to_string(cond), o);
    }
  }

  static constexpr std::pair<CameraId, FlashKind> kFlashConds[] = {
      {CameraId::cam1, FlashKind::nir},
      {CameraId::cam2, FlashKind::nir},
      {CameraId::cam1, FlashKind::nir_nuv},
      {CameraId::cam2, FlashKind::nir_nuv},
  };
  for (const auto& [id, kind] : kFlashConds) {
    const MeterCondition cond = meter_condition(id, kind);
    const double g_e = m.gains.at(meter_condition(id, FlashKind::off));
    double g_ef = m.gains.at(cond);
    if (g_ef > g_e) {
      // Metering noise can nudge the full-flash gain a hair above the
      // no-flash gain; the fractional formula needs g_ef <= g_e.
      m.flags.push_back(to_string(cond) + ":full_flash_gain_capped");
      g_ef = g_e;
    }
    for (int n : {3, 5, 7}) {
      m.burst1_fractional[{cond, n}] = fractional_flash_gain(g_e, g_ef, n);
      const ClampedGain b2 = burst2_fractional_gain(g_ef, n);
      m.burst2_fractional[{cond, n}] = b2.gain;
      if (b2.clamped) {
        m.flags.push_back(to_string(cond) + ":burst2_n" + std::to_string(n) +
                          "_gain_clamped");
      }
    }
  }

  for (const CameraId id : {CameraId::cam1, CameraId::cam2}) {
    const double g = m.gains.at(meter_condition(id, FlashKind::off));
    m.long_exposure[id] = long_exposure_settings(linear_to_db(g), m.T_s);
  }
  m.validate();
  return m;
}

Json metering_to_json(const MeteringResult& m) {
  Json j;
  j["T_s"] = m.T_s;
  Json gains;
  for (const auto& [cond, g] : m.gains) gains[to_string(cond)] = g;
  j["gains"] = gains;
  Json b1, b2;
  for (const auto& [key, g] : m.burst1_fractional) {
    b1[to_string(key.first)][std::to_string(key.second)] = g;
  }
  for (const auto& [key, g] : m.burst2_fractional) {
    b2[to_string(key.first)][std::to_string(key.second)] = g;
  }
  j["fractional_gains"] = Json{{"burst1", b1}, {"burst2", b2}};
  Json le;
  for (const auto& [id, l] : m.long_exposure) {
    le[to_string(id)] = Json{{"tau_s", l.tau_s}, {"gain", l.gain_linear}};
  }
  j["long_exposure"] = le;
  j["flags"] = m.flags;
  return j;
}

MeteringResult metering_from_json(const Json& j) {
  MeteringResult m;
  try {
    m.T_s = j.at("T_s").get<double>();
    for (const auto& [key, value] : j.at("gains").items()) {
      m.gains[meter_condition_from_string(key)] = value.get<double>();
    }
    const Json& fg = j.at("fractional_gains");
    for (const auto& [cond, inner] : fg.at("burst1").items()) {
      for (const auto& [n, value] : inner.items()) {
        m.burst1_fractional[{meter_condition_from_string(cond), std::stoi(n)}] =
            value.get<double>();
      }
    }
    for (const auto& [cond, inner] : fg.at("burst2").items()) {
      for (const auto& [n, value] : inner.items()) {
        m.burst2_fractional[{meter_condition_from_string(cond), std::stoi(n)}] =
            value.get<double>();
      }
    }
    for (const auto& [id, le] : j.at("long_exposure").items()) {
      m.long_exposure[camera_id_from_string(id)] = LongExposure{
          le.at("tau_s").get<double>(), le.at("gain").get<double>()};
    }
    m.flags = j.at("flags").get<std::vector<std::string>>();
  } catch (const Json::exception& e) {
    throw format_error(std::string("bad metering JSON: ") + e.what());
  }
  m.validate();
  return m;
}

}  // namespace darkflash
