#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "darkflash/camera.hpp"
#include "darkflash/json.hpp"
#include "darkflash/metering.hpp"
#include "darkflash/scene.hpp"

namespace darkflash {

enum class FrameTag {
  white_still_pre,
  burst1_off,
  burst1_on,
  burst2_off,
  burst2_on,
  white_still_post,
  long_exposure,
};

std::string to_string(FrameTag tag);
FrameTag frame_tag_from_string(const std::string& s);

struct FrameSpec {
  int index = 0;       // flat position in the session
  int t_index = 0;     // simultaneous cam1/cam2 exposures share this
  CameraId camera = CameraId::cam1;
  FrameTag tag = FrameTag::burst1_off;
  int variant_n = 1;   // 1, 3, 5, 7
  FlashKind flash_kind = FlashKind::off;  // block-level flash unit choice
  ExposureSettings settings;              // .flash is the per-frame unit state
  double start_time_s = 0.0;
};

struct BurstPlan {
  MeteringResult metering;  // carried into the session manifest
  std::vector<FrameSpec> frames;
};

// Deterministic session layout per metering result: for each variant
// n in {1,3,5,7} and flash kind in {NIR, NIR+NUV}: white still, burst 1
// (4 off + 4 on interleaved; on-frames keep exposure T with fraction 1/n at
// the fractional gain), burst 2 (on-frames exposure T/n, fraction 1, gain
// n x full-flash), white still; two long exposures close the session.
// 290 frames total. Consecutive start times differ by at least
// max(exposure, 40 ms).
BurstPlan plan_session(const MeteringResult& m);

struct ManifestEntry {
  FrameSpec spec;
  std::string file;  // PGM filename relative to the session directory
};

struct SessionManifest {
  int format_version = 1;
  std::string scene_ref;
  CameraPreset preset = CameraPreset::ideal;
  std::uint64_t seed = 0;
  MeteringResult metering;
  std::vector<ManifestEntry> frames;
};

// Renders every planned frame (noise taken from the scene, per-frame seeds
// derived from `seed`) into out_dir as PGM + sidecar, then writes
// manifest.json. Any failure removes the files written so far and rethrows.
SessionManifest execute_session(const BurstPlan& plan,
                                const SpectralScene& scene,
                                const CameraModel& cam1,
                                const CameraModel& cam2,
                                const std::filesystem::path& out_dir,
                                std::uint64_t seed,
                                const std::string& scene_ref = "");

void save_manifest(const std::filesystem::path& path,
                   const SessionManifest& m);
SessionManifest load_manifest(const std::filesystem::path& path);

Json manifest_to_json(const SessionManifest& m);
SessionManifest manifest_from_json(const Json& j);

// t_index of the `occurrence`-th flash-off pair with the given tag, variant
// and block flash kind; the matching flash-on pair sits at t_index + 1.
// Throws format_error when absent.
int find_burst_pair(const SessionManifest& m, int variant_n, FlashKind kind,
                    FrameTag off_tag, int occurrence = 0);

}  // namespace darkflash
