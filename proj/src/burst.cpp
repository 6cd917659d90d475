#include "darkflash/burst.hpp"

#include <algorithm>
#include <cstdio>
#include <utility>

#include "darkflash/error.hpp"
#include "darkflash/image_io.hpp"
#include "darkflash/render.hpp"
#include "darkflash/rng.hpp"

namespace darkflash {

std::string to_string(FrameTag tag) {
  switch (tag) {
    case FrameTag::white_still_pre:
      return "white_still_pre";
    case FrameTag::burst1_off:
      return "burst1_off";
    case FrameTag::burst1_on:
      return "burst1_on";
    case FrameTag::burst2_off:
      return "burst2_off";
    case FrameTag::burst2_on:
      return "burst2_on";
    case FrameTag::white_still_post:
      return "white_still_post";
    case FrameTag::long_exposure:
      return "long_exposure";
  }
  return "burst1_off";
}

FrameTag frame_tag_from_string(const std::string& s) {
  for (int i = 0; i <= static_cast<int>(FrameTag::long_exposure); ++i) {
    const auto tag = static_cast<FrameTag>(i);
    if (to_string(tag) == s) return tag;
  }
  throw format_error("unknown frame tag: " + s);
}

namespace {

struct PlanBuilder {
  const MeteringResult& m;
  std::vector<FrameSpec> frames;
  int t_index = 0;
  double clock_s = 0.0;

  explicit PlanBuilder(const MeteringResult& metering) : m(metering) {}

  double gain_db_for(CameraId cam, FlashKind flash) const {
    return linear_to_db(m.gains.at(meter_condition(cam, flash)));
  }

  // Emits the cam1/cam2 pair for one simultaneous exposure; `make` fills the
  // per-camera settings. Start times advance by at least the frame interval
  // floor and never overlap the previous pair's exposure window.
  template <typename MakeSettings>
  void pair(FrameTag tag, int variant_n, FlashKind block_kind,
            MakeSettings&& make) {
    double longest = 0.0;
    for (const CameraId cam : {CameraId::cam1, CameraId::cam2}) {
      FrameSpec f;
      f.index = static_cast<int>(frames.size());
      f.t_index = t_index;
      f.camera = cam;
      f.tag = tag;
      f.variant_n = variant_n;
      f.flash_kind = block_kind;
      f.settings = make(cam);
      f.start_time_s = clock_s;
      longest = std::max(longest, f.settings.exposure_s);
      frames.push_back(std::move(f));
    }
    clock_s += std::max(longest, 0.040);
    ++t_index;
  }

  void white_still(FrameTag tag, int n, FlashKind block_kind) {
    pair(tag, n, block_kind, [&](CameraId cam) {
      ExposureSettings s;
      s.exposure_s = m.T_s;
      s.gain_db = gain_db_for(cam, FlashKind::white);
      s.flash = FlashKind::white;
      s.flash_fraction = 1.0;
      return s;
    });
  }

  void flash_off(FrameTag tag, int n, FlashKind block_kind) {
    pair(tag, n, block_kind, [&](CameraId cam) {
      ExposureSettings s;
      s.exposure_s = m.T_s;
      s.gain_db = gain_db_for(cam, FlashKind::off);
      s.flash = FlashKind::off;
      s.flash_fraction = 1.0;
      return s;
    });
  }

  void burst1_on(int n, FlashKind kind) {
    pair(FrameTag::burst1_on, n, kind, [&](CameraId cam) {
      const MeterCondition cond = meter_condition(cam, kind);
      ExposureSettings s;
      s.exposure_s = m.T_s;
      s.gain_db = n == 1
                      ? linear_to_db(m.gains.at(cond))
                      : linear_to_db(m.burst1_fractional.at({cond, n}));
      s.flash = kind;
      s.flash_fraction = 1.0 / n;
      return s;
    });
  }

  void burst2_on(int n, FlashKind kind) {
    pair(FrameTag::burst2_on, n, kind, [&](CameraId cam) {
      const MeterCondition cond = meter_condition(cam, kind);
      ExposureSettings s;
      s.exposure_s = m.T_s / n;
      s.gain_db = n == 1
                      ? linear_to_db(m.gains.at(cond))
                      : linear_to_db(m.burst2_fractional.at({cond, n}));
      s.flash = kind;
      s.flash_fraction = 1.0;
      return s;
    });
  }

  void long_exposures() {
    pair(FrameTag::long_exposure, 1, FlashKind::off, [&](CameraId cam) {
      const LongExposure& le = m.long_exposure.at(cam);
      ExposureSettings s;
      s.exposure_s = le.tau_s;
      s.gain_db = linear_to_db(le.gain_linear);
      s.flash = FlashKind::off;
      s.flash_fraction = 1.0;
      return s;
    });
  }
};

}  // namespace

BurstPlan plan_session(const MeteringResult& m) {
  m.validate();
  PlanBuilder b(m);
  for (const int n : {1, 3, 5, 7}) {
    for (const FlashKind kind : {FlashKind::nir, FlashKind::nir_nuv}) {
      b.white_still(FrameTag::white_still_pre, n, kind);
      for (int rep = 0; rep < 4; ++rep) {
        b.flash_off(FrameTag::burst1_off, n, kind);
        b.burst1_on(n, kind);
      }
      for (int rep = 0; rep < 4; ++rep) {
        b.flash_off(FrameTag::burst2_off, n, kind);
        b.burst2_on(n, kind);
      }
      b.white_still(FrameTag::white_still_post, n, kind);
    }
  }
  b.long_exposures();
  BurstPlan plan;
  plan.metering = m;
  plan.frames = std::move(b.frames);
  return plan;
}

namespace {

std::string frame_filename(const FrameSpec& f) {
  char head[16];
  std::snprintf(head, sizeof head, "f%04d", f.index);
  return std::string(head) + "_" + to_string(f.camera) + "_" +
         to_string(f.tag) + ".pgm";
}

}  // namespace

SessionManifest execute_session(const BurstPlan& plan,
                                const SpectralScene& scene,
                                const CameraModel& cam1,
                                const CameraModel& cam2,
                                const std::filesystem::path& out_dir,
                                std::uint64_t seed,
                                const std::string& scene_ref) {
  if (plan.frames.empty()) {
    throw domain_error("execute_session: empty plan");
  }
  std::filesystem::create_directories(out_dir);

  SessionManifest manifest;
  manifest.scene_ref = scene_ref;
  manifest.preset = scene.preset;
  manifest.seed = seed;
  manifest.metering = plan.metering;

  std::vector<std::filesystem::path> written;
  try {
    for (const FrameSpec& spec : plan.frames) {
      FrameSpec realized = spec;
      realized.settings.noise = scene.noise;
      realized.settings.noise.seed =
          derive_seed(seed, static_cast<std::uint64_t>(spec.index));
      const CameraModel& cam =
          spec.camera == CameraId::cam1 ? cam1 : cam2;
      const RawFrame raw = render_frame(scene, cam, realized.settings);
      const std::string name = frame_filename(realized);
      const std::filesystem::path pgm = out_dir / name;
      write_raw_pgm(pgm, raw);
      written.push_back(pgm);
      written.push_back(pgm.parent_path() / (pgm.stem().string() + ".json"));
      manifest.frames.push_back({std::move(realized), name});
    }
    save_manifest(out_dir / "manifest.json", manifest);
  } catch (...) {
    std::error_code ec;
    for (const auto& p : written) std::filesystem::remove(p, ec);
    throw;
  }
  return manifest;
}

namespace {

Json frame_to_json(const ManifestEntry& e) {
  Json j;
  j["index"] = e.spec.index;
  j["t_index"] = e.spec.t_index;
  j["camera"] = to_string(e.spec.camera);
  j["tag"] = to_string(e.spec.tag);
  j["variant_n"] = e.spec.variant_n;
  j["flash_kind"] = to_string(e.spec.flash_kind);
  j["settings"] = settings_to_json(e.spec.settings);
  j["start_time_s"] = e.spec.start_time_s;
  j["file"] = e.file;
  return j;
}

ManifestEntry frame_from_json(const Json& j) {
  ManifestEntry e;
  e.spec.index = j.at("index").get<int>();
  e.spec.t_index = j.at("t_index").get<int>();
  e.spec.camera = camera_id_from_string(j.at("camera").get<std::string>());
  e.spec.tag = frame_tag_from_string(j.at("tag").get<std::string>());
  e.spec.variant_n = j.at("variant_n").get<int>();
  e.spec.flash_kind =
      flash_kind_from_string(j.at("flash_kind").get<std::string>());
  e.spec.settings = settings_from_json(j.at("settings"));
  e.spec.start_time_s = j.at("start_time_s").get<double>();
  e.file = j.at("file").get<std::string>();
  return e;
}

}  // namespace

Json manifest_to_json(const SessionManifest& m) {
  Json j;
  j["format_version"] = m.format_version;
  j["scene_ref"] = m.scene_ref;
  j["preset"] = to_string(m.preset);
  j["seed"] = m.seed;
  j["metering"] = metering_to_json(m.metering);
  Json frames = Json::array();
  for (const ManifestEntry& e : m.frames) frames.push_back(frame_to_json(e));
  j["frames"] = std::move(frames);
  return j;
}

SessionManifest manifest_from_json(const Json& j) {
  SessionManifest m;
  try {
    m.format_version = j.at("format_version").get<int>();
    if (m.format_version != 1) {
      throw format_error("unsupported manifest format_version " +
                         std::to_string(m.format_version));
    }
    m.scene_ref = j.at("scene_ref").get<std::string>();
    m.preset = preset_from_string(j.at("preset").get<std::string>());
    m.seed = j.at("seed").get<std::uint64_t>();
    m.metering = metering_from_json(j.at("metering"));
    for (const Json& f : j.at("frames")) {
      m.frames.push_back(frame_from_json(f));
    }
  } catch (const Json::exception& e) {
    throw format_error(std::string("bad manifest JSON: ") + e.what());
  }
  return m;
}

void save_manifest(const std::filesystem::path& path,
                   const SessionManifest& m) {
  write_json_file(path, manifest_to_json(m));
}

SessionManifest load_manifest(const std::filesystem::path& path) {
  return manifest_from_json(read_json_file(path));
}

int find_burst_pair(const SessionManifest& m, int variant_n, FlashKind kind,
                    FrameTag off_tag, int occurrence) {
  int seen = 0;
  for (const ManifestEntry& e : m.frames) {
    if (e.spec.camera != CameraId::cam1) continue;
    if (e.spec.tag != off_tag) continue;
    if (e.spec.variant_n != variant_n) continue;
    if (e.spec.flash_kind != kind) continue;
    if (seen == occurrence) return e.spec.t_index;
    ++seen;
  }
  throw format_error("no such burst pair in manifest: n=" +
                     std::to_string(variant_n) + " " + to_string(kind) + " " +
                     to_string(off_tag) + " occurrence " +
                     std::to_string(occurrence));
}

}  // namespace darkflash
