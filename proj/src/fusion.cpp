#include "darkflash/fusion.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <mutex>
#include <utility>

#include "darkflash/error.hpp"
#include "darkflash/image_io.hpp"
#include "darkflash/parallel.hpp"
#include "darkflash/resample.hpp"

namespace darkflash {

namespace {

// FFTW plan creation/destruction is not thread-safe; execution of distinct
// plans is.
std::mutex& fftw_mutex() {
  static std::mutex m;
  return m;
}

void dct2d(std::vector<double>& buf, int width, int height, fftw_r2r_kind kind) {
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_mutex());
    plan = fftw_plan_r2r_2d(height, width, buf.data(), buf.data(), kind, kind,
                            FFTW_ESTIMATE);
  }
  if (!plan) {
    throw numeric_error("screened solve: transform planning failed");
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(fftw_mutex());
    fftw_destroy_plan(plan);
  }
}

}  // namespace

std::vector<double> screened_poisson_solve_d(const std::vector<double>& data,
                                             const std::vector<double>& gx,
                                             const std::vector<double>& gy,
                                             int width, int height,
                                             double alpha) {
  if (width < 1 || height < 1) {
    throw dimension_error("screened solve: empty plane");
  }
  const std::size_t n = static_cast<std::size_t>(width) * height;
  if (data.size() != n || gx.size() != n || gy.size() != n) {
    throw dimension_error("screened solve: plane size mismatch");
  }
  if (!(alpha > 0.0)) {
    throw domain_error("screened solve: alpha must be > 0");
  }

  // Normal equations: (alpha + div grad) I = alpha * data - div (gx, gy),
  // with the adjoint of the forward difference supplying the divergence and
  // the last column/row of gx/gy ignored.
  std::vector<double> rhs(n);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * width + x;
      double acc = alpha * data[i];
      if (x > 0) acc += gx[i - 1];
      if (x < width - 1) acc -= gx[i];
      if (y > 0) acc += gy[i - width];
      if (y < height - 1) acc -= gy[i];
      rhs[i] = acc;
    }
  }

  dct2d(rhs, width, height, FFTW_REDFT10);

  std::vector<double> eig_x(width), eig_y(height);
  for (int k = 0; k < width; ++k) {
    eig_x[k] = 2.0 - 2.0 * std::cos(M_PI * k / width);
  }
  for (int k = 0; k < height; ++k) {
    eig_y[k] = 2.0 - 2.0 * std::cos(M_PI * k / height);
  }
  for (int ky = 0; ky < height; ++ky) {
    for (int kx = 0; kx < width; ++kx) {
      rhs[static_cast<std::size_t>(ky) * width + kx] /=
          alpha + eig_x[kx] + eig_y[ky];
    }
  }

  dct2d(rhs, width, height, FFTW_REDFT01);
  const double norm = 1.0 / (4.0 * width * height);
  for (double& v : rhs) v *= norm;
  return rhs;
}

LinearImage screened_poisson_solve(const LinearImage& data,
                                   const LinearImage& gx,
                                   const LinearImage& gy, double alpha) {
  if (!data.same_shape(gx) || !data.same_shape(gy)) {
    throw dimension_error("screened solve: shape mismatch");
  }
  const int w = data.width();
  const int h = data.height();
  const std::size_t n = static_cast<std::size_t>(w) * h;
  LinearImage out(w, h, data.channels());
  std::vector<double> d(n), px(n), py(n);
  for (int c = 0; c < data.channels(); ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        d[i] = data.at(x, y, c);
        px[i] = gx.at(x, y, c);
        py[i] = gy.at(x, y, c);
      }
    }
    const std::vector<double> sol =
        screened_poisson_solve_d(d, px, py, w, h, alpha);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        out.at(x, y, c) =
            static_cast<float>(sol[static_cast<std::size_t>(y) * w + x]);
      }
    }
  }
  return out;
}

namespace {

// Forward differences; the last column/row repeats the final valid
// difference so the gradient-ratio map carries no artificial zero band at
// the border (the solver's adjoint never reads those entries anyway).
void forward_gradients(const LinearImage& img, int c, std::vector<double>& dx,
                       std::vector<double>& dy) {
  const int w = img.width();
  const int h = img.height();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const int xs = std::min(x, w - 2);
      const int ys = std::min(y, h - 2);
      dx[i] = w > 1 ? img.at(xs + 1, y, c) - img.at(xs, y, c) : 0.0;
      dy[i] = h > 1 ? img.at(x, ys + 1, c) - img.at(x, ys, c) : 0.0;
    }
  }
}

}  // namespace

LinearImage scale_map_fuse(const LinearImage& noisy_rgb,
                           const LinearImage& flash,
                           const ScaleMapParams& params) {
  if (flash.channels() != 1) {
    throw dimension_error("scale_map_fuse: flash guide must be one channel");
  }
  if (flash.width() != noisy_rgb.width() ||
      flash.height() != noisy_rgb.height()) {
    throw dimension_error("scale_map_fuse: shape mismatch");
  }
  if (!(params.eps > 0.0)) {
    throw domain_error("scale_map_fuse: eps must be > 0");
  }
  const int w = noisy_rgb.width();
  const int h = noisy_rgb.height();
  const int ch = noisy_rgb.channels();
  const std::size_t n = static_cast<std::size_t>(w) * h;

  std::vector<double> fx(n), fy(n), nx(n), ny(n);
  forward_gradients(flash, 0, fx, fy);

  // Raw gradient-ratio per channel, smoothed in one multi-channel pass.
  LinearImage ratio(w, h, ch);
  for (int c = 0; c < ch; ++c) {
    forward_gradients(noisy_rgb, c, nx, ny);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        ratio.at(x, y, c) = static_cast<float>(
            (nx[i] * fx[i] + ny[i] * fy[i]) /
            (fx[i] * fx[i] + fy[i] * fy[i] + params.eps));
      }
    }
  }
  const LinearImage scale = gaussian_blur(ratio, params.smooth_sigma);

  LinearImage out(w, h, ch);
  std::vector<double> d(n), gx(n), gy(n);
  for (int c = 0; c < ch; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        const double s = scale.at(x, y, c);
        d[i] = noisy_rgb.at(x, y, c);
        gx[i] = s * fx[i];
        gy[i] = s * fy[i];
      }
    }
    const std::vector<double> sol =
        screened_poisson_solve_d(d, gx, gy, w, h, params.alpha_data);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        out.at(x, y, c) =
            static_cast<float>(sol[static_cast<std::size_t>(y) * w + x]);
      }
    }
  }
  return out;
}

AffineBilateralGrid AffineBilateralGrid::identity(int gw, int gh, int gd,
                                                  double spatial_scale,
                                                  double range_scale) {
  AffineBilateralGrid g;
  g.gw = gw;
  g.gh = gh;
  g.gd = gd;
  g.spatial_scale = spatial_scale;
  g.range_scale = range_scale;
  static constexpr std::array<float, 12> kIdentity = {
      1.0f, 0.0f, 0.0f, 0.0f, 0.0f, 1.0f, 0.0f, 0.0f, 0.0f, 0.0f, 1.0f, 0.0f};
  g.cells.assign(static_cast<std::size_t>(gw) * gh * gd, kIdentity);
  g.validate();
  return g;
}

void AffineBilateralGrid::validate() const {
  if (gw < 1 || gh < 1 || gd < 2) {
    throw dimension_error("affine grid: need gw,gh >= 1 and gd >= 2");
  }
  if (!(spatial_scale > 0.0) || !(range_scale > 0.0)) {
    throw domain_error("affine grid: scales must be > 0");
  }
  if (cells.size() != static_cast<std::size_t>(gw) * gh * gd) {
    throw dimension_error("affine grid: cell count mismatch");
  }
  for (const auto& c : cells) {
    for (const float v : c) {
      if (!std::isfinite(v)) {
        throw domain_error("affine grid: non-finite coefficient");
      }
    }
  }
}

namespace {

inline float lerp(float a, float b, float t) { return a + t * (b - a); }

}  // namespace

LinearImage slice_apply(const AffineBilateralGrid& grid,
                        const LinearImage& input_rgb,
                        const LinearImage& slice) {
  grid.validate();
  if (input_rgb.channels() != 3) {
    throw dimension_error("slice_apply: input must be RGB");
  }
  if (slice.channels() != 1 || slice.width() != input_rgb.width() ||
      slice.height() != input_rgb.height()) {
    throw dimension_error("slice_apply: slice shape mismatch");
  }
  if (!all_finite(slice)) {
    throw domain_error("slice_apply: non-finite slice value");
  }
  const int w = input_rgb.width();
  const int h = input_rgb.height();
  LinearImage out(w, h, 3);
  parallel_ranges(h, [&](int y_begin, int y_end) {
    for (int y = y_begin; y < y_end; ++y) {
      const double gy =
          std::clamp(y / grid.spatial_scale, 0.0, grid.gh - 1.0);
      const int y0 = static_cast<int>(gy);
      const int y1 = std::min(y0 + 1, grid.gh - 1);
      const float fy = static_cast<float>(gy - y0);
      for (int x = 0; x < w; ++x) {
        const double gx =
            std::clamp(x / grid.spatial_scale, 0.0, grid.gw - 1.0);
        const int x0 = static_cast<int>(gx);
        const int x1 = std::min(x0 + 1, grid.gw - 1);
        const float fx = static_cast<float>(gx - x0);
        const double sv = std::clamp<double>(slice.at(x, y, 0), 0.0, 1.0);
        const double gz = sv * (grid.gd - 1);
        const int z0 = static_cast<int>(gz);
        const int z1 = std::min(z0 + 1, grid.gd - 1);
        const float fz = static_cast<float>(gz - z0);

        const auto& c000 = grid.cell(x0, y0, z0);
        const auto& c100 = grid.cell(x1, y0, z0);
        const auto& c010 = grid.cell(x0, y1, z0);
        const auto& c110 = grid.cell(x1, y1, z0);
        const auto& c001 = grid.cell(x0, y0, z1);
        const auto& c101 = grid.cell(x1, y0, z1);
        const auto& c011 = grid.cell(x0, y1, z1);
        const auto& c111 = grid.cell(x1, y1, z1);

        std::array<float, 12> m;
        for (int k = 0; k < 12; ++k) {
          const float f00 = lerp(c000[k], c100[k], fx);
          const float f10 = lerp(c010[k], c110[k], fx);
          const float f01 = lerp(c001[k], c101[k], fx);
          const float f11 = lerp(c011[k], c111[k], fx);
          m[k] = lerp(lerp(f00, f10, fy), lerp(f01, f11, fy), fz);
        }

        const float r = input_rgb.at(x, y, 0);
        const float g = input_rgb.at(x, y, 1);
        const float b = input_rgb.at(x, y, 2);
        out.at(x, y, 0) = m[0] * r + m[1] * g + m[2] * b + m[3];
        out.at(x, y, 1) = m[4] * r + m[5] * g + m[6] * b + m[7];
        out.at(x, y, 2) = m[8] * r + m[9] * g + m[10] * b + m[11];
      }
    }
  });
  return out;
}

LinearImage replace_luma(const LinearImage& base,
                         const LinearImage& luma_src) {
  if (base.channels() != 3) {
    throw dimension_error("replace_luma: base must be RGB");
  }
  if (luma_src.channels() != 1 || luma_src.width() != base.width() ||
      luma_src.height() != base.height()) {
    throw dimension_error("replace_luma: luma shape mismatch");
  }
  const LinearImage base_luma = luma(base);
  LinearImage out(base.width(), base.height(), 3);
  for (int y = 0; y < base.height(); ++y) {
    for (int x = 0; x < base.width(); ++x) {
      const float delta = luma_src.at(x, y, 0) - base_luma.at(x, y, 0);
      for (int c = 0; c < 3; ++c) {
        out.at(x, y, c) = base.at(x, y, c) + delta;
      }
    }
  }
  return out;
}

void save_grid(const std::filesystem::path& json_path,
               const AffineBilateralGrid& grid) {
  grid.validate();
  const std::string cells_name = json_path.stem().string() + "_cells.pfm";
  LinearImage packed(12, static_cast<int>(grid.cells.size()), 1);
  for (std::size_t i = 0; i < grid.cells.size(); ++i) {
    for (int k = 0; k < 12; ++k) {
      packed.at(k, static_cast<int>(i), 0) = grid.cells[i][k];
    }
  }
  Json j;
  j["grid_w"] = grid.gw;
  j["grid_h"] = grid.gh;
  j["grid_d"] = grid.gd;
  j["spatial_scale"] = grid.spatial_scale;
  j["range_scale"] = grid.range_scale;
  j["cells"] = cells_name;
  write_pfm(json_path.parent_path() / cells_name, packed);
  write_json_file(json_path, j);
}

AffineBilateralGrid load_grid(const std::filesystem::path& json_path) {
  const Json j = read_json_file(json_path);
  AffineBilateralGrid grid;
  std::string cells_name;
  try {
    grid.gw = j.at("grid_w").get<int>();
    grid.gh = j.at("grid_h").get<int>();
    grid.gd = j.at("grid_d").get<int>();
    grid.spatial_scale = j.at("spatial_scale").get<double>();
    grid.range_scale = j.at("range_scale").get<double>();
    cells_name = j.at("cells").get<std::string>();
  } catch (const Json::exception& e) {
    throw format_error(std::string("bad grid JSON: ") + e.what());
  }
  const LinearImage packed =
      read_pfm(json_path.parent_path() / cells_name);
  if (packed.width() != 12 || packed.channels() != 1 ||
      packed.height() !=
          static_cast<long long>(grid.gw) * grid.gh * grid.gd) {
    throw format_error("grid cell payload does not match header dimensions");
  }
  grid.cells.resize(static_cast<std::size_t>(packed.height()));
  for (int i = 0; i < packed.height(); ++i) {
    for (int k = 0; k < 12; ++k) {
      grid.cells[static_cast<std::size_t>(i)][k] = packed.at(k, i, 0);
    }
  }
  grid.validate();
  return grid;
}

GridSource GridSource::identity_for(int width, int height) {
  if (width < 1 || height < 1) {
    throw dimension_error("grid source: empty image");
  }
  constexpr double kSpatialScale = 32.0;
  const int gw = std::max(2, static_cast<int>(width / kSpatialScale) + 1);
  const int gh = std::max(2, static_cast<int>(height / kSpatialScale) + 1);
  GridSource src;
  src.grid = AffineBilateralGrid::identity(gw, gh, 8, kSpatialScale);
  return src;
}

GridSource GridSource::from_file(
    const std::filesystem::path& grid_json,
    const std::optional<std::filesystem::path>& slice_pfm) {
  GridSource src;
  src.grid = load_grid(grid_json);
  if (slice_pfm) {
    LinearImage s = read_pfm(*slice_pfm);
    if (s.channels() != 1) {
      throw format_error("grid slice must be a single-channel image");
    }
    src.slice = std::move(s);
  }
  return src;
}

LinearImage fuse_pipeline(const LinearImage& warped_rgb,
                          const LinearImage& flash_guide,
                          const GridSource& grid_source,
                          const ScaleMapParams& params) {
  const LinearImage fused = scale_map_fuse(warped_rgb, flash_guide, params);
  const LinearImage fused_luma = luma(fused);
  const LinearImage& slice =
      grid_source.slice ? *grid_source.slice : fused_luma;
  if (grid_source.slice &&
      (slice.width() != fused.width() || slice.height() != fused.height())) {
    throw dimension_error("fuse_pipeline: slice shape mismatch");
  }
  const LinearImage graded = slice_apply(grid_source.grid, fused, slice);
  return replace_luma(graded, fused_luma);
}

LinearImage flash_guide_channel(const LinearImage& flash_rgb, FlashKind kind) {
  if (flash_rgb.channels() != 3) {
    throw dimension_error("flash_guide_channel: input must be RGB");
  }
  const int w = flash_rgb.width();
  const int h = flash_rgb.height();
  LinearImage out(w, h, 1);
  switch (kind) {
    case FlashKind::nir:
      return extract_channel(flash_rgb, 0);
    case FlashKind::nuv:
      return extract_channel(flash_rgb, 2);
    case FlashKind::nir_nuv:
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          out.at(x, y, 0) =
              0.5f * (flash_rgb.at(x, y, 0) + flash_rgb.at(x, y, 2));
        }
      }
      return out;
    case FlashKind::off:
    case FlashKind::white:
      break;
  }
  throw domain_error("flash_guide_channel: no guide for flash kind " +
                     to_string(kind));
}

}  // namespace darkflash
