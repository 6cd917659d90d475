#pragma once

#include <filesystem>
#include <vector>

#include "darkflash/burst.hpp"
#include "darkflash/image.hpp"

namespace darkflash {

struct SearchRange {
  int horiz = 64;  // +- pixels along x
  int vert = 4;    // +- pixels along y
};

struct TileMatch {
  double u = 0.0;  // gather offset, sub-pixel in x
  double v = 0.0;  // integer in y
  double cost = 0.0;        // mean absolute difference at the best offset
  double confidence = 0.0;  // [0, 1]
  bool border = false;      // best offset sampled outside the image
};

struct TileMatches {
  int tiles_x = 0;
  int tiles_y = 0;
  int tile_size = 16;
  int width = 0;   // matched image dimensions
  int height = 0;
  SearchRange search;
  std::vector<TileMatch> tiles;  // row-major tiles_x * tiles_y

  TileMatch& at(int tx, int ty) {
    return tiles[static_cast<std::size_t>(ty) * tiles_x + tx];
  }
  const TileMatch& at(int tx, int ty) const {
    return tiles[static_cast<std::size_t>(ty) * tiles_x + tx];
  }
};

// Brute-force SAD matching of green planes under the gather convention
// base(x) ~ alt(x + offset), with 1D horizontal parabola refinement at the
// best offset. Confidence is 1 - (best+eps)/(second+eps) with the second-best
// cost taken outside the 3x3 neighborhood of the best offset.
TileMatches tile_match(const LinearImage& base_green,
                       const LinearImage& alt_green, int tile_size = 16,
                       SearchRange search = {});

struct SolverParams {
  double sigma_xy = 8.0;    // spatial stddev of the bilateral affinity
  double sigma_l = 0.1;     // guide-luma stddev
  double lambda_smooth = 1.0;
  double cg_tol = 1e-6;     // relative residual stop
  int cg_max_iters = 500;
};

struct FlowField {
  LinearImage u;  // 1 channel
  LinearImage v;  // 1 channel

  int width() const { return u.width(); }
  int height() const { return u.height(); }
};

struct SolveStats {
  int iterations_u = 0;
  int iterations_v = 0;
  double residual_u = 0.0;
  double residual_v = 0.0;
  // 0.5 x'Ax - b'x per CG iteration (u component), for monotonicity checks.
  std::vector<double> energies_u;
};

// Minimizes sum_i c_i (f_i - t_i)^2 + lambda * sum_{i~j} W_ij (f_i - f_j)^2
// over a 4-connected grid, W_ij = exp(-|dp|^2/(2 sigma_xy^2)
// - (dl)^2/(2 sigma_l^2)) from the guide luma. Targets and confidences are
// splatted to tile centers. Jacobi-preconditioned CG, deterministic for any
// thread count. Throws numeric_error when every confidence is zero.
FlowField solve_flow(const TileMatches& matches, const LinearImage& guide,
                     const SolverParams& params = {},
                     SolveStats* stats = nullptr);

// output(x, y) = bilinear sample of alt at (x + u, y + v), border clamped.
LinearImage warp_gather(const LinearImage& alt, const FlowField& flow);

struct RegistrationParams {
  int tile_size = 16;
  SearchRange search;
  SolverParams solver;
  double low_confidence_mean = 0.25;
};

struct RegistrationResult {
  FlowField flow;
  TileMatches matches;
  bool low_confidence = false;
};

// Pairs the flash-off frames at t_index with the cam2 flash-on frame at
// t_index + 1: demosaics, matches green channels (base = cam2, alt = cam1),
// and solves for a dense field guided by the flash-on frame's luma.
RegistrationResult register_pair(const SessionManifest& manifest,
                                 const std::filesystem::path& session_dir,
                                 int t_index,
                                 const RegistrationParams& params = {});

// Flow is stored as a 3-channel PFM (u, v, 0).
void save_flow(const std::filesystem::path& path, const FlowField& flow);
FlowField load_flow(const std::filesystem::path& path);

}  // namespace darkflash
