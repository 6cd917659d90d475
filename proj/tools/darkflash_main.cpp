#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <thread>

#include "darkflash/burst.hpp"
#include "darkflash/demosaic.hpp"
#include "darkflash/error.hpp"
#include "darkflash/fusion.hpp"
#include "darkflash/image_io.hpp"
#include "darkflash/metering.hpp"
#include "darkflash/metrics.hpp"
#include "darkflash/parallel.hpp"
#include "darkflash/registration.hpp"
#include "darkflash/render.hpp"
#include "darkflash/rng.hpp"
#include "darkflash/scene.hpp"

namespace fs = std::filesystem;
using namespace darkflash;

namespace {

struct GlobalOpts {
  std::uint64_t seed = 0;
  int threads = 0;  // <= 0 selects hardware concurrency
  std::string preset = "ideal";
  bool preset_given = false;
};

struct StereoRig {
  CameraModel cam1;
  CameraModel cam2;
};

StereoRig make_rig(const SpectralScene& scene) {
  return {make_camera(CameraId::cam1, scene.preset, scene.baseline_focal),
          make_camera(CameraId::cam2, scene.preset, 0.0)};
}

// Metering captures render real frames; their noise seeds live in a separate
// stream from the session frames so reruns stay reproducible.
CaptureFn make_metering_capture(const SpectralScene& scene,
                                const CameraModel& cam, std::uint64_t seed) {
  constexpr std::uint64_t kMeterSalt = 0x6d65746572ULL;
  const std::uint64_t stream =
      seed ^ kMeterSalt ^ (cam.id == CameraId::cam1 ? 1u : 2u);
  auto counter = std::make_shared<std::uint64_t>(0);
  return [&scene, cam, stream, counter](const ExposureSettings& s) {
    ExposureSettings with_noise = s;
    with_noise.noise = scene.noise;
    with_noise.noise.seed = derive_seed(stream, (*counter)++);
    return render_frame(scene, cam, with_noise);
  };
}

MeteringResult meter_scene(const SpectralScene& scene, const StereoRig& rig,
                           std::uint64_t seed) {
  return run_full_metering(make_metering_capture(scene, rig.cam1, seed),
                           make_metering_capture(scene, rig.cam2, seed),
                           MeteringConfig{}, rig.cam1, rig.cam2);
}

const ManifestEntry& manifest_frame(const SessionManifest& m, int t_index,
                                    CameraId cam) {
  for (const ManifestEntry& e : m.frames) {
    if (e.spec.t_index == t_index && e.spec.camera == cam) return e;
  }
  throw format_error("manifest: no frame for t_index " +
                     std::to_string(t_index) + " " + to_string(cam));
}

LinearImage read_rgb_pfm(const fs::path& path) {
  LinearImage img = read_pfm(path);
  if (img.channels() != 3) {
    throw format_error("expected 3-channel PFM: " + path.string());
  }
  return img;
}

LinearImage read_mono_pfm(const fs::path& path) {
  LinearImage img = read_pfm(path);
  if (img.channels() != 1) {
    throw format_error("expected 1-channel PFM: " + path.string());
  }
  return img;
}

GridSource grid_source_for(const std::string& grid_spec,
                           const std::string& slice_path, int width,
                           int height) {
  GridSource src = grid_spec == "identity"
                       ? GridSource::identity_for(width, height)
                       : GridSource::from_file(grid_spec);
  if (!slice_path.empty()) {
    src.slice = read_mono_pfm(slice_path);
  }
  return src;
}

void apply_preset_override(SpectralScene& scene, const GlobalOpts& g) {
  if (g.preset_given) scene.preset = preset_from_string(g.preset);
}

int cmd_simulate(const GlobalOpts& g, const std::string& out_dir, int width,
                 int height) {
  SpectralScene scene = make_demo_scene(width, height, g.seed);
  scene.preset = preset_from_string(g.preset);
  save_scene(out_dir, scene);
  std::printf("%s\n", (fs::path(out_dir) / "scene.json").string().c_str());
  return 0;
}

int cmd_meter(const GlobalOpts& g, const std::string& scene_path,
              const std::string& out_path) {
  SpectralScene scene = load_scene(scene_path);
  apply_preset_override(scene, g);
  const StereoRig rig = make_rig(scene);
  const MeteringResult m = meter_scene(scene, rig, g.seed);
  write_json_file(out_path, metering_to_json(m));
  std::printf("%s\n", out_path.c_str());
  return 0;
}

int cmd_capture(const GlobalOpts& g, const std::string& scene_path,
                const std::string& out_dir,
                const std::string& metering_path) {
  SpectralScene scene = load_scene(scene_path);
  apply_preset_override(scene, g);
  const StereoRig rig = make_rig(scene);
  const MeteringResult m =
      metering_path.empty()
          ? meter_scene(scene, rig, g.seed)
          : metering_from_json(read_json_file(metering_path));
  const BurstPlan plan = plan_session(m);
  const SessionManifest manifest = execute_session(
      plan, scene, rig.cam1, rig.cam2, out_dir, g.seed, scene_path);
  std::printf("%zu frames in %s\n", manifest.frames.size(), out_dir.c_str());
  return 0;
}

int cmd_register(const std::string& burst_dir, int t_index,
                 const std::string& out_path, int tile, double lambda) {
  const fs::path dir(burst_dir);
  const SessionManifest manifest = load_manifest(dir / "manifest.json");
  RegistrationParams params;
  params.tile_size = tile;
  params.solver.lambda_smooth = lambda;
  if (t_index < 0) {
    t_index =
        find_burst_pair(manifest, 5, FlashKind::nir, FrameTag::burst1_off);
  }
  const RegistrationResult res =
      register_pair(manifest, dir, t_index, params);
  save_flow(out_path, res.flow);
  if (res.low_confidence) {
    std::fprintf(stderr, "warning: low tile-match confidence at t_index %d\n",
                 t_index);
  }
  std::printf("%s\n", out_path.c_str());
  return 0;
}

int cmd_fuse(const std::string& rgb_path, const std::string& flash_path,
             const std::string& grid_spec, const std::string& slice_path,
             const std::string& out_path) {
  const LinearImage rgb = read_rgb_pfm(rgb_path);
  const LinearImage flash = read_mono_pfm(flash_path);
  const GridSource grid =
      grid_source_for(grid_spec, slice_path, rgb.width(), rgb.height());
  const LinearImage fused = fuse_pipeline(rgb, flash, grid);
  write_pfm(out_path, fused);
  std::printf("%s\n", out_path.c_str());
  return 0;
}

int cmd_evaluate(const std::string& test_path, const std::string& ref_path,
                 const std::string& out_path) {
  const LinearImage test = read_pfm(test_path);
  const LinearImage ref = read_pfm(ref_path);
  const MetricReport report = evaluate(test, ref);
  const Json j = report_to_json(report);
  if (out_path.empty()) {
    std::printf("%s\n", j.dump(2).c_str());
  } else {
    write_json_file(out_path, j);
    std::printf("%s\n", out_path.c_str());
  }
  return 0;
}

int cmd_demo(const GlobalOpts& g, const std::string& out_dir, int width,
             int height, int variant, const std::string& flash_name) {
  const fs::path out(out_dir);
  const FlashKind kind = flash_kind_from_string(flash_name);

  SpectralScene scene = make_demo_scene(width, height, g.seed);
  scene.preset = preset_from_string(g.preset);
  save_scene(out / "scene", scene);
  const StereoRig rig = make_rig(scene);

  const MeteringResult m = meter_scene(scene, rig, g.seed);
  write_json_file(out / "metering.json", metering_to_json(m));

  const BurstPlan plan = plan_session(m);
  const SessionManifest manifest =
      execute_session(plan, scene, rig.cam1, rig.cam2, out / "session",
                      g.seed, "../scene/scene.json");

  const int t_index =
      find_burst_pair(manifest, variant, kind, FrameTag::burst1_off);
  const RegistrationResult reg = register_pair(manifest, out / "session",
                                               t_index);
  save_flow(out / "flow.pfm", reg.flow);

  const ManifestEntry& off1 = manifest_frame(manifest, t_index, CameraId::cam1);
  const ManifestEntry& on2 =
      manifest_frame(manifest, t_index + 1, CameraId::cam2);
  const LinearImage rgb1 =
      demosaic_malvar(read_raw_pgm(out / "session" / off1.file));
  const LinearImage warped = warp_gather(rgb1, reg.flow);
  write_pfm(out / "warped.pfm", warped);

  const LinearImage on_rgb =
      demosaic_malvar(read_raw_pgm(out / "session" / on2.file));
  const LinearImage guide =
      flash_guide_channel(on_rgb, on2.spec.settings.flash);
  write_pfm(out / "flash.pfm", guide);

  const GridSource grid = GridSource::identity_for(width, height);
  const LinearImage fused = fuse_pipeline(warped, guide, grid);
  write_pfm(out / "fused.pfm", fused);

  const MetricReport rep_input = evaluate(warped, scene.clean_rgb);
  const MetricReport rep_fused = evaluate(fused, scene.clean_rgb);
  Json report;
  report["variant_n"] = variant;
  report["flash"] = to_string(kind);
  report["t_index"] = t_index;
  report["low_confidence"] = reg.low_confidence;
  report["noisy_input"] = report_to_json(rep_input);
  report["fused"] = report_to_json(rep_fused);
  write_json_file(out / "report.json", report);

  std::printf("fused %.2f dB / ssim %.4f (input %.2f dB / ssim %.4f)\n",
              rep_fused.psnr_db, rep_fused.ssim, rep_input.psnr_db,
              rep_input.ssim);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stereo dark-flash capture, registration and fusion toolchain"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--seed", g.seed, "session seed")->capture_default_str();
  app.add_option("--threads", g.threads,
                 "worker thread cap (0 = hardware concurrency)")
      ->capture_default_str();
  app.add_option("--preset", g.preset, "camera preset")
      ->check(CLI::IsMember({"ideal", "prototype"}))
      ->capture_default_str();

  std::function<int()> action;

  auto* simulate = app.add_subcommand("simulate", "write a synthetic scene");
  {
    auto out = std::make_shared<std::string>();
    auto width = std::make_shared<int>(512);
    auto height = std::make_shared<int>(512);
    simulate->add_option("--out", *out, "scene directory")->required();
    simulate->add_option("--width", *width)->capture_default_str();
    simulate->add_option("--height", *height)->capture_default_str();
    simulate->callback([&, out, width, height] {
      action = [&, out, width, height] {
        return cmd_simulate(g, *out, *width, *height);
      };
    });
  }

  auto* meter = app.add_subcommand("meter", "run auto exposure and gain");
  {
    auto scene = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    meter->add_option("--scene", *scene, "scene JSON")->required();
    meter->add_option("--out", *out, "metering JSON")->required();
    meter->callback([&, scene, out] {
      action = [&, scene, out] { return cmd_meter(g, *scene, *out); };
    });
  }

  auto* capture = app.add_subcommand("capture", "render a burst session");
  {
    auto scene = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto metering = std::make_shared<std::string>();
    capture->add_option("--scene", *scene, "scene JSON")->required();
    capture->add_option("--out", *out, "session directory")->required();
    capture->add_option("--metering", *metering,
                        "metering JSON (default: meter now)");
    capture->callback([&, scene, out, metering] {
      action = [&, scene, out, metering] {
        return cmd_capture(g, *scene, *out, *metering);
      };
    });
  }

  auto* reg = app.add_subcommand("register", "align a stereo pair");
  {
    auto burst = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto t = std::make_shared<int>(-1);
    auto tile = std::make_shared<int>(16);
    auto lambda = std::make_shared<double>(1.0);
    reg->add_option("--burst", *burst, "session directory")->required();
    reg->add_option("--t", *t, "pair index (default: first n=5 NIR burst)");
    reg->add_option("--out", *out, "flow PFM")->required();
    reg->add_option("--tile", *tile, "match tile size")->capture_default_str();
    reg->add_option("--lambda", *lambda, "smoothness weight")
        ->capture_default_str();
    reg->callback([&, burst, out, t, tile, lambda] {
      action = [&, burst, out, t, tile, lambda] {
        return cmd_register(*burst, *t, *out, *tile, *lambda);
      };
    });
  }

  auto* fuse = app.add_subcommand("fuse", "fuse a warped RGB + flash pair");
  {
    auto rgb = std::make_shared<std::string>();
    auto flash = std::make_shared<std::string>();
    auto grid = std::make_shared<std::string>("identity");
    auto slice = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    fuse->add_option("--rgb", *rgb, "warped RGB PFM")->required();
    fuse->add_option("--flash", *flash, "flash guide PFM")->required();
    fuse->add_option("--grid", *grid, "'identity' or grid JSON")
        ->capture_default_str();
    fuse->add_option("--slice", *slice, "slice map PFM");
    fuse->add_option("--out", *out, "fused PFM")->required();
    fuse->callback([&, rgb, flash, grid, slice, out] {
      action = [&, rgb, flash, grid, slice, out] {
        return cmd_fuse(*rgb, *flash, *grid, *slice, *out);
      };
    });
  }

  auto* evaluate = app.add_subcommand("evaluate", "PSNR/SSIM report");
  {
    auto test = std::make_shared<std::string>();
    auto ref = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    evaluate->add_option("--test", *test, "test PFM")->required();
    evaluate->add_option("--ref", *ref, "reference PFM")->required();
    evaluate->add_option("--out", *out, "report JSON (default: stdout)");
    evaluate->callback([&, test, ref, out] {
      action = [&, test, ref, out] { return cmd_evaluate(*test, *ref, *out); };
    });
  }

  auto* demo = app.add_subcommand("demo", "full scene-to-report pipeline");
  {
    auto out = std::make_shared<std::string>();
    auto width = std::make_shared<int>(512);
    auto height = std::make_shared<int>(512);
    auto variant = std::make_shared<int>(5);
    auto flash = std::make_shared<std::string>("nir");
    demo->add_option("--out", *out, "output directory")->required();
    demo->add_option("--width", *width)->capture_default_str();
    demo->add_option("--height", *height)->capture_default_str();
    demo->add_option("--variant", *variant, "burst length n")
        ->check(CLI::IsMember({1, 3, 5, 7}))
        ->capture_default_str();
    demo->add_option("--flash", *flash, "dark flash kind")
        ->check(CLI::IsMember({"nir", "nir_nuv"}))
        ->capture_default_str();
    demo->callback([&, out, width, height, variant, flash] {
      action = [&, out, width, height, variant, flash] {
        return cmd_demo(g, *out, *width, *height, *variant, *flash);
      };
    });
  }

  for (auto* sub : {simulate, meter, capture, reg, fuse, evaluate, demo}) {
    sub->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }
  g.preset_given = app.count("--preset") > 0;
  set_worker_threads(g.threads > 0
                         ? g.threads
                         : static_cast<int>(
                               std::thread::hardware_concurrency()));

  try {
    return action ? action() : 1;
  } catch (const numeric_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const format_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
