#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <vector>

#include "darkflash/camera.hpp"
#include "darkflash/image.hpp"

namespace darkflash {

struct ScaleMapParams {
  double eps = 1e-4;          // gradient-ratio regularizer
  double smooth_sigma = 4.0;  // Gaussian smoothing of the scale map
  double alpha_data = 0.05;   // data-term weight of the screened solve
};

// argmin_I alpha * |I - data|^2 + |grad I - (gx, gy)|^2 with forward
// differences and natural (Neumann) boundaries, solved exactly in the DCT
// domain. gx's last column and gy's last row are ignored. alpha must be > 0.
LinearImage screened_poisson_solve(const LinearImage& data,
                                   const LinearImage& gx,
                                   const LinearImage& gy, double alpha);

// Double-precision core operating on row-major planes (used internally; the
// tests assert its normal-equations residual directly).
std::vector<double> screened_poisson_solve_d(const std::vector<double>& data,
                                             const std::vector<double>& gx,
                                             const std::vector<double>& gy,
                                             int width, int height,
                                             double alpha);

// Per channel: scale = smooth((grad noisy . grad flash) /
// (|grad flash|^2 + eps)); target gradients scale * grad flash; screened
// Poisson solve anchored to the noisy channel. flash must be 1-channel.
LinearImage scale_map_fuse(const LinearImage& noisy_rgb,
                           const LinearImage& flash,
                           const ScaleMapParams& params = {});

// Grid of 3x4 affine color transforms over (x / spatial_scale,
// y / spatial_scale, slice * (gd - 1)).
struct AffineBilateralGrid {
  int gw = 0;
  int gh = 0;
  int gd = 0;
  double spatial_scale = 32.0;
  double range_scale = 1.0;  // guide units per depth cell (metadata)
  std::vector<std::array<float, 12>> cells;  // index x + gw * (y + gh * z)

  static AffineBilateralGrid identity(int gw, int gh, int gd,
                                      double spatial_scale,
                                      double range_scale = 1.0);

  std::array<float, 12>& cell(int x, int y, int z) {
    return cells[static_cast<std::size_t>(x) +
                 static_cast<std::size_t>(gw) * (y + static_cast<std::size_t>(gh) * z)];
  }
  const std::array<float, 12>& cell(int x, int y, int z) const {
    return cells[static_cast<std::size_t>(x) +
                 static_cast<std::size_t>(gw) * (y + static_cast<std::size_t>(gh) * z)];
  }

  void validate() const;
};

// Trilinearly interpolates the affine at each pixel (nested lerps, so a grid
// of identical cells applies that affine bit-exactly) and applies it to the
// input RGB. slice values are clamped to [0, 1].
LinearImage slice_apply(const AffineBilateralGrid& grid,
                        const LinearImage& input_rgb,
                        const LinearImage& slice);

// Keeps chroma, swaps in the given luma: out = base + (luma_src - luma(base))
// per channel, the closed form of the BT.601 YCbCr Y-replacement.
LinearImage replace_luma(const LinearImage& base, const LinearImage& luma_src);

// On disk: JSON header (dims, scales, payload name) + PFM of
// gw*gh*gd rows x 12 floats.
void save_grid(const std::filesystem::path& json_path,
               const AffineBilateralGrid& grid);
AffineBilateralGrid load_grid(const std::filesystem::path& json_path);

struct GridSource {
  AffineBilateralGrid grid;
  std::optional<LinearImage> slice;  // absent: luma of the fused image

  static GridSource identity_for(int width, int height);
  static GridSource from_file(const std::filesystem::path& grid_json,
                              const std::optional<std::filesystem::path>&
                                  slice_pfm = std::nullopt);
};

// scale-map fusion -> grid slice/apply -> luma replacement from the fused
// stage, so the grid adjusts chroma while detail comes from the fusion.
LinearImage fuse_pipeline(const LinearImage& warped_rgb,
                          const LinearImage& flash_guide,
                          const GridSource& grid_source,
                          const ScaleMapParams& params = {});

// Guide plane of a demosaicked dark-flash frame: NIR sits in the R position,
// NUV in the B position; combined flash averages both.
LinearImage flash_guide_channel(const LinearImage& flash_rgb, FlashKind kind);

}  // namespace darkflash
