#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <vector>

#include "darkflash/fusion.hpp"
#include "darkflash/image_io.hpp"
#include "darkflash/resample.hpp"
#include "support/test_util.hpp"

using namespace darkflash;
namespace fs = std::filesystem;

namespace {

std::vector<double> plane_of(const LinearImage& img, int c = 0) {
  std::vector<double> p(static_cast<std::size_t>(img.width()) * img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      p[static_cast<std::size_t>(y) * img.width() + x] = img.at(x, y, c);
    }
  }
  return p;
}

double mean_of(const std::vector<double>& v) {
  double acc = 0.0;
  for (const double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

double gradient_energy(const LinearImage& img) {
  double acc = 0.0;
  for (int c = 0; c < img.channels(); ++c) {
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        if (x + 1 < img.width()) {
          const double d = img.at(x + 1, y, c) - img.at(x, y, c);
          acc += d * d;
        }
        if (y + 1 < img.height()) {
          const double d = img.at(x, y + 1, c) - img.at(x, y, c);
          acc += d * d;
        }
      }
    }
  }
  return acc;
}

LinearImage add_noise(const LinearImage& img, float sigma, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<float> dist(0.0f, sigma);
  LinearImage out = img;
  for (float& v : out.data()) v += dist(rng);
  return out;
}

AffineBilateralGrid random_grid(int gw, int gh, int gd, unsigned seed,
                                double spatial_scale = 16.0) {
  AffineBilateralGrid g = AffineBilateralGrid::identity(gw, gh, gd,
                                                        spatial_scale);
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> dist(-0.5f, 0.5f);
  for (auto& cell : g.cells) {
    for (float& v : cell) v = dist(rng);
  }
  return g;
}

// out = M * [r g b 1]' computed in double for a single 3x4 affine.
LinearImage apply_affine_direct(const std::array<float, 12>& m,
                                const LinearImage& in) {
  LinearImage out(in.width(), in.height(), 3);
  for (int y = 0; y < in.height(); ++y) {
    for (int x = 0; x < in.width(); ++x) {
      for (int row = 0; row < 3; ++row) {
        out.at(x, y, row) = static_cast<float>(
            static_cast<double>(m[row * 4 + 0]) * in.at(x, y, 0) +
            static_cast<double>(m[row * 4 + 1]) * in.at(x, y, 1) +
            static_cast<double>(m[row * 4 + 2]) * in.at(x, y, 2) +
            m[row * 4 + 3]);
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("screened solve with zero gradients flattens toward the mean") {
  const LinearImage flat = testutil::constant_image(12, 9, 1, 0.37f);
  const LinearImage zero(12, 9, 1, 0.0f);
  CHECK(testutil::max_abs_diff(screened_poisson_solve(flat, zero, zero, 0.05),
                               flat) < 1e-6);

  const LinearImage data = testutil::random_image(16, 12, 1, 21);
  const LinearImage z(16, 12, 1, 0.0f);
  // Huge data weight: the gradient prior barely moves anything.
  CHECK(testutil::max_abs_diff(screened_poisson_solve(data, z, z, 1e6), data) <
        1e-4);
  // Tiny data weight: everything collapses to the mean.
  const std::vector<double> d = plane_of(data);
  const double m = mean_of(d);
  const LinearImage low = screened_poisson_solve(data, z, z, 1e-6);
  for (const float v : low.data()) CHECK(std::abs(v - m) < 1e-3);
}

TEST_CASE("gradients consistent with the data reproduce it exactly") {
  const int w = 16, h = 12;
  const LinearImage data = testutil::random_image(w, h, 1, 5);
  const std::vector<double> d = plane_of(data);
  std::vector<double> gx(d.size(), 0.0), gy(d.size(), 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      if (x + 1 < w) gx[i] = d[i + 1] - d[i];
      if (y + 1 < h) gy[i] = d[i + w] - d[i];
    }
  }
  // The data term and the gradient term share the same unique minimizer, for
  // any positive alpha.
  for (const double alpha : {0.01, 0.05, 3.0}) {
    const std::vector<double> sol =
        screened_poisson_solve_d(d, gx, gy, w, h, alpha);
    for (std::size_t i = 0; i < d.size(); ++i) {
      CHECK(std::abs(sol[i] - d[i]) < 1e-10);
    }
  }
  // Entries in the ignored last column/row must not affect the solution.
  std::vector<double> gx_junk = gx, gy_junk = gy;
  for (int y = 0; y < h; ++y) gx_junk[static_cast<std::size_t>(y) * w + w - 1] = 1e9;
  for (int x = 0; x < w; ++x) gy_junk[static_cast<std::size_t>(h - 1) * w + x] = -1e9;
  const std::vector<double> a = screened_poisson_solve_d(d, gx, gy, w, h, 0.05);
  const std::vector<double> b =
      screened_poisson_solve_d(d, gx_junk, gy_junk, w, h, 0.05);
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("the transform-domain solve matches a dense normal-equations solve") {
  const int w = 8, h = 8;
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> d(64), gx(64), gy(64);
  for (std::size_t i = 0; i < 64; ++i) {
    d[i] = dist(rng);
    gx[i] = dist(rng);
    gy[i] = dist(rng);
  }
  for (const double alpha : {1e-3, 0.05, 1.0, 50.0}) {
    const std::vector<double> got =
        screened_poisson_solve_d(d, gx, gy, w, h, alpha);
    const std::vector<double> want =
        testutil::oracle_screened_poisson(d, gx, gy, w, h, alpha);
    for (std::size_t i = 0; i < 64; ++i) {
      CHECK(std::abs(got[i] - want[i]) < 1e-8);
    }
  }
}

TEST_CASE("the solution satisfies the normal equations directly") {
  // Apply the assembled system to the returned solution; the residual against
  // the right-hand side must vanish.
  const int w = 8, h = 6;
  const std::size_t n = 48;
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> d(n), gx(n), gy(n);
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = dist(rng);
    gx[i] = dist(rng);
    gy[i] = dist(rng);
  }
  const double alpha = 0.05;
  const std::vector<double> x =
      screened_poisson_solve_d(d, gx, gy, w, h, alpha);

  // A = alpha I + G'G, b = alpha d + G'(gx, gy) with forward differences.
  std::vector<double> ax(n, 0.0), b(n, 0.0);
  const auto idx = [w](int xx, int yy) {
    return static_cast<std::size_t>(yy) * w + xx;
  };
  for (std::size_t i = 0; i < n; ++i) {
    ax[i] = alpha * x[i];
    b[i] = alpha * d[i];
  }
  for (int y = 0; y < h; ++y) {
    for (int xx = 0; xx < w - 1; ++xx) {
      const std::size_t i = idx(xx, y);
      const double e = x[i + 1] - x[i];
      ax[i] -= e;
      ax[i + 1] += e;
      b[i] -= gx[i];
      b[i + 1] += gx[i];
    }
  }
  for (int y = 0; y < h - 1; ++y) {
    for (int xx = 0; xx < w; ++xx) {
      const std::size_t i = idx(xx, y);
      const double e = x[i + w] - x[i];
      ax[i] -= e;
      ax[i + w] += e;
      b[i] -= gy[i];
      b[i + w] += gy[i];
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(std::abs(ax[i] - b[i]) < 1e-9);
  }
}

TEST_CASE("the screened solve preserves the mean for any data weight") {
  const int w = 13, h = 7;
  const std::size_t n = static_cast<std::size_t>(w) * h;
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  std::vector<double> d(n), gx(n), gy(n);
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = dist(rng);
    gx[i] = dist(rng);
    gy[i] = dist(rng);
  }
  const double want = mean_of(d);
  for (const double alpha : {1e-4, 0.05, 1e6}) {
    CHECK(std::abs(mean_of(screened_poisson_solve_d(d, gx, gy, w, h, alpha)) -
                   want) < 1e-9);
  }
}

TEST_CASE("screened solve rejects bad arguments") {
  const LinearImage a = testutil::random_image(8, 8, 1, 1);
  const LinearImage small = testutil::random_image(4, 8, 1, 2);
  CHECK_THROWS_AS(screened_poisson_solve(a, small, a, 0.05), dimension_error);
  CHECK_THROWS_AS(screened_poisson_solve(a, a, a, 0.0), domain_error);
  CHECK_THROWS_AS(screened_poisson_solve(a, a, a, -1.0), domain_error);
  CHECK_THROWS_AS(
      screened_poisson_solve_d({1.0}, {1.0, 2.0}, {1.0}, 1, 1, 0.05),
      dimension_error);
}

TEST_CASE("a guide proportional to the image passes it through unchanged") {
  // Channels are affine in the flash plane, so the gradient ratio is exact
  // and the only bias is eps; the ramp must survive, borders included.
  const int w = 32, h = 32;
  LinearImage flash(w, h, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      flash.at(x, y) = static_cast<float>(0.1 + 0.02 * x + 0.008 * y);
    }
  }
  const double gains[3] = {1.0, 0.5, 0.25};
  const double offsets[3] = {0.0, 0.2, 0.4};
  LinearImage noisy(w, h, 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        noisy.at(x, y, c) =
            static_cast<float>(gains[c] * flash.at(x, y) + offsets[c]);
      }
    }
  }
  ScaleMapParams params;
  params.eps = 1e-8;
  const LinearImage out = scale_map_fuse(noisy, flash, params);
  CHECK(testutil::rms_diff(out, noisy) < 1e-3);
  CHECK(testutil::max_abs_diff(out, noisy) < 5e-3);
}

TEST_CASE("a flat image stays flat regardless of the guide") {
  const LinearImage noisy = testutil::constant_image(24, 24, 3, 0.4f);
  const LinearImage flash = testutil::random_image(24, 24, 1, 17);
  const LinearImage out = scale_map_fuse(noisy, flash);
  CHECK(testutil::max_abs_diff(out, noisy) < 1e-6);
}

TEST_CASE("a flat guide smooths noise while holding the mean") {
  const LinearImage clean = testutil::constant_image(32, 32, 3, 0.5f);
  const LinearImage noisy = add_noise(clean, 0.05f, 41);
  const LinearImage flash = testutil::constant_image(32, 32, 1, 0.7f);
  const LinearImage out = scale_map_fuse(noisy, flash);
  CHECK(gradient_energy(out) < 0.1 * gradient_energy(noisy));
  for (int c = 0; c < 3; ++c) {
    const double want = mean_of(plane_of(noisy, c));
    CHECK(std::abs(mean_of(plane_of(out, c)) - want) < 1e-6);
  }
}

TEST_CASE("a structured guide strips noise from a structured image") {
  // Smooth blob pattern; channels are distinct affine maps of it.
  const int w = 48, h = 48;
  const LinearImage blur3 =
      gaussian_blur(testutil::random_image(w, h, 1, 23), 3.0);
  float lo = blur3.at(0, 0), hi = blur3.at(0, 0);
  for (const float v : blur3.data()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  LinearImage pattern(w, h, 1);
  for (int i = 0; i < w * h; ++i) {
    pattern.data()[i] = 0.1f + 0.8f * (blur3.data()[i] - lo) / (hi - lo);
  }
  const double gains[3] = {0.6, 0.4, 0.3};
  const double offsets[3] = {0.2, 0.3, 0.1};
  LinearImage clean(w, h, 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        clean.at(x, y, c) =
            static_cast<float>(gains[c] * pattern.at(x, y) + offsets[c]);
      }
    }
  }
  const LinearImage noisy = add_noise(clean, 0.05f, 67);
  const LinearImage fused = scale_map_fuse(noisy, pattern);
  const double mse_noisy = testutil::mse(noisy, clean);
  const double mse_fused = testutil::mse(fused, clean);
  CHECK(mse_fused < 0.5 * mse_noisy);  // > 3 dB gain
}

TEST_CASE("scale-map fusion rejects bad arguments") {
  const LinearImage rgb = testutil::random_image(16, 16, 3, 1);
  const LinearImage guide = testutil::random_image(16, 16, 1, 2);
  CHECK_THROWS_AS(scale_map_fuse(rgb, rgb), dimension_error);
  CHECK_THROWS_AS(scale_map_fuse(rgb, testutil::random_image(8, 16, 1, 3)),
                  dimension_error);
  ScaleMapParams bad_eps;
  bad_eps.eps = 0.0;
  CHECK_THROWS_AS(scale_map_fuse(rgb, guide, bad_eps), domain_error);
  ScaleMapParams bad_alpha;
  bad_alpha.alpha_data = 0.0;
  CHECK_THROWS_AS(scale_map_fuse(rgb, guide, bad_alpha), domain_error);
}

TEST_CASE("an identity grid slices to the identity, bit for bit") {
  const LinearImage input = testutil::random_image(40, 24, 3, 9);
  const LinearImage slice = testutil::random_image(40, 24, 1, 10, 0.0f, 1.0f);
  const AffineBilateralGrid grid =
      AffineBilateralGrid::identity(3, 2, 4, 16.0);
  CHECK(testutil::max_abs_diff(slice_apply(grid, input, slice), input) == 0.0);
}

TEST_CASE("a grid of identical cells applies that affine everywhere") {
  std::mt19937 rng(12);
  std::uniform_real_distribution<float> dist(-0.5f, 0.5f);
  std::array<float, 12> m;
  for (float& v : m) v = dist(rng);
  AffineBilateralGrid grid = AffineBilateralGrid::identity(3, 3, 3, 12.0);
  for (auto& cell : grid.cells) cell = m;
  const LinearImage input = testutil::random_image(36, 30, 3, 13);
  const LinearImage slice = testutil::random_image(36, 30, 1, 14, 0.0f, 1.0f);
  CHECK(testutil::max_abs_diff(slice_apply(grid, input, slice),
                               apply_affine_direct(m, input)) < 1e-6);
}

TEST_CASE("two-plane interpolation lands exactly between the planes") {
  // Dyadic offsets keep every interpolation step exact in binary floating
  // point: the midpoint slice must shift red by exactly +0.5.
  AffineBilateralGrid grid = AffineBilateralGrid::identity(1, 1, 2, 8.0);
  grid.cell(0, 0, 0)[3] = 0.25f;
  grid.cell(0, 0, 0)[7] = 0.5f;
  grid.cell(0, 0, 0)[11] = -0.25f;
  grid.cell(0, 0, 1)[3] = 0.75f;
  grid.cell(0, 0, 1)[7] = -0.5f;
  grid.cell(0, 0, 1)[11] = 0.25f;
  const LinearImage input = testutil::random_image(8, 8, 3, 15);
  const LinearImage slice = testutil::constant_image(8, 8, 1, 0.5f);
  const LinearImage out = slice_apply(grid, input, slice);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      CHECK(std::abs(out.at(x, y, 0) - (input.at(x, y, 0) + 0.5f)) <= 1e-9);
      CHECK(std::abs(out.at(x, y, 1) - input.at(x, y, 1)) <= 1e-9);
      CHECK(std::abs(out.at(x, y, 2) - input.at(x, y, 2)) <= 1e-9);
    }
  }
}

TEST_CASE("slicing is linear in the grid coefficients") {
  const AffineBilateralGrid g1 = random_grid(3, 2, 4, 31);
  const AffineBilateralGrid g2 = random_grid(3, 2, 4, 32);
  AffineBilateralGrid g3 = g1;
  for (std::size_t i = 0; i < g3.cells.size(); ++i) {
    for (int k = 0; k < 12; ++k) {
      g3.cells[i][k] = 0.3f * g1.cells[i][k] + 0.7f * g2.cells[i][k];
    }
  }
  const LinearImage input = testutil::random_image(40, 28, 3, 33);
  const LinearImage slice = testutil::random_image(40, 28, 1, 34, 0.0f, 1.0f);
  const LinearImage o1 = slice_apply(g1, input, slice);
  const LinearImage o2 = slice_apply(g2, input, slice);
  const LinearImage o3 = slice_apply(g3, input, slice);
  for (int y = 0; y < 28; ++y) {
    for (int x = 0; x < 40; ++x) {
      for (int c = 0; c < 3; ++c) {
        CHECK(std::abs(o3.at(x, y, c) - (0.3 * o1.at(x, y, c) +
                                         0.7 * o2.at(x, y, c))) < 1e-5);
      }
    }
  }
}

TEST_CASE("slice values clamp to the outer planes") {
  AffineBilateralGrid grid = AffineBilateralGrid::identity(1, 1, 2, 8.0);
  grid.cell(0, 0, 1)[3] = 0.5f;  // top plane shifts red
  const LinearImage input = testutil::random_image(6, 6, 3, 44);
  const LinearImage top = slice_apply(grid, input,
                                      testutil::constant_image(6, 6, 1, 5.0f));
  const LinearImage bottom = slice_apply(
      grid, input, testutil::constant_image(6, 6, 1, -3.0f));
  for (int y = 0; y < 6; ++y) {
    for (int x = 0; x < 6; ++x) {
      CHECK(top.at(x, y, 0) == input.at(x, y, 0) + 0.5f);
      CHECK(bottom.at(x, y, 0) == input.at(x, y, 0));
    }
  }
}

TEST_CASE("grid and slice validation") {
  const LinearImage input = testutil::random_image(8, 8, 3, 3);
  const LinearImage slice = testutil::constant_image(8, 8, 1, 0.5f);

  CHECK_THROWS_AS(AffineBilateralGrid::identity(0, 2, 2, 8.0),
                  dimension_error);
  CHECK_THROWS_AS(AffineBilateralGrid::identity(2, 2, 1, 8.0),
                  dimension_error);
  CHECK_THROWS_AS(AffineBilateralGrid::identity(2, 2, 2, 0.0), domain_error);

  AffineBilateralGrid bad_count = AffineBilateralGrid::identity(2, 2, 2, 8.0);
  bad_count.cells.pop_back();
  CHECK_THROWS_AS(slice_apply(bad_count, input, slice), dimension_error);

  AffineBilateralGrid bad_cell = AffineBilateralGrid::identity(2, 2, 2, 8.0);
  bad_cell.cell(0, 0, 0)[0] = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(slice_apply(bad_cell, input, slice), domain_error);

  const AffineBilateralGrid grid = AffineBilateralGrid::identity(2, 2, 2, 8.0);
  CHECK_THROWS_AS(slice_apply(grid, testutil::random_image(8, 8, 1, 4), slice),
                  dimension_error);
  CHECK_THROWS_AS(slice_apply(grid, input,
                              testutil::constant_image(4, 8, 1, 0.5f)),
                  dimension_error);
  LinearImage bad_slice = slice;
  bad_slice.at(3, 3) = std::numeric_limits<float>::infinity();
  CHECK_THROWS_AS(slice_apply(grid, input, bad_slice), domain_error);
}

TEST_CASE("luma replacement keeps chroma and installs the new luma") {
  const LinearImage base = testutil::random_image(20, 14, 3, 8);
  const LinearImage target = testutil::random_image(20, 14, 1, 9, 0.2f, 0.8f);
  const LinearImage out = replace_luma(base, target);
  const LinearImage base_luma = luma(base);
  for (int y = 0; y < 14; ++y) {
    for (int x = 0; x < 20; ++x) {
      const float delta = target.at(x, y) - base_luma.at(x, y);
      for (int c = 0; c < 3; ++c) {
        CHECK(out.at(x, y, c) ==
              doctest::Approx(base.at(x, y, c) + delta).epsilon(1e-6));
      }
    }
  }
  // The result's luma is the requested one, and re-replacing is a no-op.
  CHECK(testutil::max_abs_diff(luma(out), target) < 1e-5);
  CHECK(testutil::max_abs_diff(replace_luma(out, target), out) < 1e-6);

  CHECK_THROWS_AS(replace_luma(target, target), dimension_error);
  CHECK_THROWS_AS(replace_luma(base, testutil::random_image(10, 14, 1, 4)),
                  dimension_error);
}

TEST_CASE("grids round-trip through disk") {
  const AffineBilateralGrid grid = random_grid(3, 2, 4, 50, 24.0);
  const fs::path dir = fs::temp_directory_path() / "darkflash_grid_rt";
  fs::create_directories(dir);
  const fs::path p = dir / "grid.json";
  save_grid(p, grid);
  const AffineBilateralGrid back = load_grid(p);
  CHECK(back.gw == grid.gw);
  CHECK(back.gh == grid.gh);
  CHECK(back.gd == grid.gd);
  CHECK(back.spatial_scale == grid.spatial_scale);
  CHECK(back.range_scale == grid.range_scale);
  REQUIRE(back.cells.size() == grid.cells.size());
  for (std::size_t i = 0; i < grid.cells.size(); ++i) {
    for (int k = 0; k < 12; ++k) {
      CHECK(back.cells[i][k] == grid.cells[i][k]);
    }
  }

  SUBCASE("a header that disagrees with the payload is rejected") {
    Json j = read_json_file(p);
    j["grid_d"] = 5;
    write_json_file(p, j);
    CHECK_THROWS_AS(load_grid(p), format_error);
  }
  SUBCASE("a header missing required keys is rejected") {
    Json j = read_json_file(p);
    j.erase("cells");
    write_json_file(p, j);
    CHECK_THROWS_AS(load_grid(p), format_error);
  }
  fs::remove_all(dir);
}

TEST_CASE("identity grid sources size themselves from the image") {
  const GridSource src = GridSource::identity_for(100, 64);
  CHECK(src.grid.gw == 4);
  CHECK(src.grid.gh == 3);
  CHECK(src.grid.gd == 8);
  CHECK(src.grid.spatial_scale == 32.0);
  CHECK(!src.slice.has_value());
  CHECK_THROWS_AS(GridSource::identity_for(0, 5), dimension_error);
}

TEST_CASE("the full pipeline composes its three stages") {
  const int w = 40, h = 32;
  const LinearImage blur2 =
      gaussian_blur(testutil::random_image(w, h, 1, 71), 2.0);
  LinearImage guide(w, h, 1);
  float lo = blur2.at(0, 0), hi = blur2.at(0, 0);
  for (const float v : blur2.data()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  for (int i = 0; i < w * h; ++i) {
    guide.data()[i] = 0.1f + 0.8f * (blur2.data()[i] - lo) / (hi - lo);
  }
  LinearImage noisy(w, h, 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      noisy.at(x, y, 0) = 0.5f * guide.at(x, y) + 0.2f;
      noisy.at(x, y, 1) = 0.3f * guide.at(x, y) + 0.3f;
      noisy.at(x, y, 2) = 0.2f * guide.at(x, y) + 0.1f;
    }
  }
  noisy = add_noise(noisy, 0.03f, 81);

  SUBCASE("an identity grid reduces the pipeline to the fusion stage") {
    const LinearImage fused = scale_map_fuse(noisy, guide);
    const LinearImage full =
        fuse_pipeline(noisy, guide, GridSource::identity_for(w, h));
    CHECK(testutil::max_abs_diff(full, fused) == 0.0);
  }

  SUBCASE("a color-rotating grid changes chroma but not luma") {
    GridSource src;
    src.grid = AffineBilateralGrid::identity(2, 2, 2, 32.0);
    const std::array<float, 12> rotate = {0, 1, 0, 0, 0, 0,
                                          1, 0, 1, 0, 0, 0};
    for (auto& cell : src.grid.cells) cell = rotate;
    const LinearImage fused = scale_map_fuse(noisy, guide);
    const LinearImage full = fuse_pipeline(noisy, guide, src);
    CHECK(testutil::max_abs_diff(luma(full), luma(fused)) < 1e-5);
    CHECK(testutil::max_abs_diff(full, fused) > 1e-3);
  }

  SUBCASE("an explicit slice plane overrides the fused luma") {
    GridSource src;
    src.grid = AffineBilateralGrid::identity(2, 2, 2, 32.0);
    src.grid.cell(0, 0, 1)[3] = 0.25f;
    src.grid.cell(1, 0, 1)[3] = 0.25f;
    src.grid.cell(0, 1, 1)[3] = 0.25f;
    src.grid.cell(1, 1, 1)[3] = 0.25f;
    src.slice = testutil::constant_image(w, h, 1, 1.0f);
    const LinearImage fused = scale_map_fuse(noisy, guide);
    const LinearImage want =
        replace_luma(slice_apply(src.grid, fused, *src.slice), luma(fused));
    const LinearImage full = fuse_pipeline(noisy, guide, src);
    CHECK(testutil::max_abs_diff(full, want) == 0.0);

    src.slice = testutil::constant_image(w / 2, h, 1, 1.0f);
    CHECK_THROWS_AS(fuse_pipeline(noisy, guide, src), dimension_error);
  }
}

TEST_CASE("the guide plane follows the flash band") {
  const LinearImage rgb = testutil::random_image(10, 8, 3, 91);
  const LinearImage nir = flash_guide_channel(rgb, FlashKind::nir);
  const LinearImage nuv = flash_guide_channel(rgb, FlashKind::nuv);
  const LinearImage both = flash_guide_channel(rgb, FlashKind::nir_nuv);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 10; ++x) {
      CHECK(nir.at(x, y) == rgb.at(x, y, 0));
      CHECK(nuv.at(x, y) == rgb.at(x, y, 2));
      CHECK(both.at(x, y) == 0.5f * (rgb.at(x, y, 0) + rgb.at(x, y, 2)));
    }
  }
  CHECK_THROWS_AS(flash_guide_channel(rgb, FlashKind::off), domain_error);
  CHECK_THROWS_AS(flash_guide_channel(rgb, FlashKind::white), domain_error);
  CHECK_THROWS_AS(flash_guide_channel(nir, FlashKind::nir), dimension_error);
}
