#include "darkflash/registration.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>

#include "darkflash/demosaic.hpp"
#include "darkflash/error.hpp"
#include "darkflash/image_io.hpp"
#include "darkflash/parallel.hpp"

namespace darkflash {

namespace {

int clamp_coord(int v, int lo, int hi) { return std::clamp(v, lo, hi); }

}  // namespace

TileMatches tile_match(const LinearImage& base_green,
                       const LinearImage& alt_green, int tile_size,
                       SearchRange search) {
  if (base_green.channels() != 1 || alt_green.channels() != 1) {
    throw dimension_error("tile_match: inputs must be single-channel");
  }
  if (!base_green.same_shape(alt_green)) {
    throw dimension_error("tile_match: shape mismatch");
  }
  if (tile_size < 4) {
    throw domain_error("tile_match: tile_size must be >= 4");
  }
  if (search.horiz < 0 || search.vert < 0) {
    throw domain_error("tile_match: negative search range");
  }
  const int w = base_green.width();
  const int h = base_green.height();
  TileMatches out;
  out.tiles_x = (w + tile_size - 1) / tile_size;
  out.tiles_y = (h + tile_size - 1) / tile_size;
  out.tile_size = tile_size;
  out.width = w;
  out.height = h;
  out.search = search;
  out.tiles.resize(static_cast<std::size_t>(out.tiles_x) * out.tiles_y);

  const int nx = 2 * search.horiz + 1;
  const int ny = 2 * search.vert + 1;

  parallel_ranges(out.tiles_y, [&](int ty_begin, int ty_end) {
    std::vector<double> costs(static_cast<std::size_t>(nx) * ny);
    for (int ty = ty_begin; ty < ty_end; ++ty) {
      for (int tx = 0; tx < out.tiles_x; ++tx) {
        const int x0 = tx * tile_size;
        const int y0 = ty * tile_size;
        const int x1 = std::min(x0 + tile_size, w);  // edge tiles are partial
        const int y1 = std::min(y0 + tile_size, h);
        const double area = static_cast<double>(x1 - x0) * (y1 - y0);
        int best_ix = 0, best_iy = 0;
        double best = std::numeric_limits<double>::infinity();
        for (int iy = 0; iy < ny; ++iy) {
          const int dy = iy - search.vert;
          for (int ix = 0; ix < nx; ++ix) {
            const int dx = ix - search.horiz;
            double sum = 0.0;
            for (int y = y0; y < y1; ++y) {
              const int sy = clamp_coord(y + dy, 0, h - 1);
              for (int x = x0; x < x1; ++x) {
                const int sx = clamp_coord(x + dx, 0, w - 1);
                sum += std::abs(base_green.at(x, y, 0) -
                                alt_green.at(sx, sy, 0));
              }
            }
            const double c = sum / area;
            costs[static_cast<std::size_t>(iy) * nx + ix] = c;
            if (c < best) {  // ties keep the earliest offset in scan order
              best = c;
              best_ix = ix;
              best_iy = iy;
            }
          }
        }

        TileMatch& m = out.at(tx, ty);
        const int bdx = best_ix - search.horiz;
        const int bdy = best_iy - search.vert;
        m.v = bdy;
        m.cost = best;
        m.border = x0 + bdx < 0 || x1 - 1 + bdx > w - 1 || y0 + bdy < 0 ||
                   y1 - 1 + bdy > h - 1;

        // Horizontal parabola refinement; a zero center cost is already an
        // exact minimum and must stay integer.
        double du = 0.0;
        if (best > 0.0 && best_ix > 0 && best_ix < nx - 1) {
          const double cm =
              costs[static_cast<std::size_t>(best_iy) * nx + best_ix - 1];
          const double cp =
              costs[static_cast<std::size_t>(best_iy) * nx + best_ix + 1];
          const double denom = cm - 2.0 * best + cp;
          if (denom > 0.0) {
            du = std::clamp(0.5 * (cm - cp) / denom, -0.5, 0.5);
          }
        }
        m.u = bdx + du;

        double second = std::numeric_limits<double>::infinity();
        for (int iy = 0; iy < ny; ++iy) {
          for (int ix = 0; ix < nx; ++ix) {
            if (std::abs(ix - best_ix) <= 1 && std::abs(iy - best_iy) <= 1) {
              continue;
            }
            second = std::min(
                second, costs[static_cast<std::size_t>(iy) * nx + ix]);
          }
        }
        if (!std::isfinite(second)) second = best;
        constexpr double kEps = 1e-6;
        m.confidence =
            std::clamp(1.0 - (best + kEps) / (second + kEps), 0.0, 1.0);
      }
    }
  });
  return out;
}

namespace {

// A = diag(conf) + lambda * L over the 4-connected grid; L's edge weights come
// from the guide luma. Stored as the diagonal plus horizontal/vertical edge
// weights so the matvec stays branch-light.
struct FlowSystem {
  int w = 0;
  int h = 0;
  double lambda = 0.0;
  std::vector<double> diag;  // conf + lambda * incident weight sum
  std::vector<double> wx;    // (w-1) * h, edge (x,y)-(x+1,y)
  std::vector<double> wy;    // w * (h-1), edge (x,y)-(x,y+1)

  double& ex(int x, int y) {
    return wx[static_cast<std::size_t>(y) * (w - 1) + x];
  }
  double ex(int x, int y) const {
    return wx[static_cast<std::size_t>(y) * (w - 1) + x];
  }
  double& ey(int x, int y) {
    return wy[static_cast<std::size_t>(y) * w + x];
  }
  double ey(int x, int y) const {
    return wy[static_cast<std::size_t>(y) * w + x];
  }

  void matvec(const std::vector<double>& f, std::vector<double>& out) const {
    parallel_ranges(h, [&](int y_begin, int y_end) {
      for (int y = y_begin; y < y_end; ++y) {
        for (int x = 0; x < w; ++x) {
          const std::size_t i = static_cast<std::size_t>(y) * w + x;
          double acc = diag[i] * f[i];
          if (x > 0) acc -= lambda * ex(x - 1, y) * f[i - 1];
          if (x < w - 1) acc -= lambda * ex(x, y) * f[i + 1];
          if (y > 0) acc -= lambda * ey(x, y - 1) * f[i - w];
          if (y < h - 1) acc -= lambda * ey(x, y) * f[i + w];
          out[i] = acc;
        }
      }
    });
  }
};

// Sequential fixed-order reduction keeps results identical across thread
// counts.
double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

FlowSystem build_system(const std::vector<double>& conf,
                        const LinearImage& guide_luma,
                        const SolverParams& params) {
  FlowSystem sys;
  sys.w = guide_luma.width();
  sys.h = guide_luma.height();
  sys.lambda = params.lambda_smooth;
  sys.diag.assign(conf.begin(), conf.end());
  sys.wx.resize(static_cast<std::size_t>(sys.w - 1) * sys.h);
  sys.wy.resize(static_cast<std::size_t>(sys.w) * (sys.h - 1));
  const double inv2sx = 1.0 / (2.0 * params.sigma_xy * params.sigma_xy);
  const double inv2sl = 1.0 / (2.0 * params.sigma_l * params.sigma_l);
  for (int y = 0; y < sys.h; ++y) {
    for (int x = 0; x < sys.w; ++x) {
      const double l0 = guide_luma.at(x, y, 0);
      if (x < sys.w - 1) {
        const double dl = l0 - guide_luma.at(x + 1, y, 0);
        sys.ex(x, y) = std::exp(-inv2sx - dl * dl * inv2sl);
      }
      if (y < sys.h - 1) {
        const double dl = l0 - guide_luma.at(x, y + 1, 0);
        sys.ey(x, y) = std::exp(-inv2sx - dl * dl * inv2sl);
      }
    }
  }
  for (int y = 0; y < sys.h; ++y) {
    for (int x = 0; x < sys.w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * sys.w + x;
      double wsum = 0.0;
      if (x > 0) wsum += sys.ex(x - 1, y);
      if (x < sys.w - 1) wsum += sys.ex(x, y);
      if (y > 0) wsum += sys.ey(x, y - 1);
      if (y < sys.h - 1) wsum += sys.ey(x, y);
      sys.diag[i] += sys.lambda * wsum;
    }
  }
  return sys;
}

struct CgResult {
  int iterations = 0;
  double residual = 0.0;
};

CgResult conjugate_gradient(const FlowSystem& sys, const std::vector<double>& b,
                            std::vector<double>& x, const SolverParams& params,
                            std::vector<double>* energies) {
  const std::size_t n = b.size();
  x.assign(n, 0.0);
  const double bnorm = std::sqrt(dot(b, b));
  CgResult res;
  if (bnorm == 0.0) return res;

  std::vector<double> inv_diag(n);
  for (std::size_t i = 0; i < n; ++i) {
    inv_diag[i] = sys.diag[i] > 0.0 ? 1.0 / sys.diag[i] : 1.0;
  }
  std::vector<double> r(b), z(n), p(n), ap(n), ax(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
  p = z;
  double rz = dot(r, z);

  for (int k = 1; k <= params.cg_max_iters; ++k) {
    sys.matvec(p, ap);
    const double pap = dot(p, ap);
    if (!(pap > 0.0)) {
      throw numeric_error("flow solve: loss of positive definiteness");
    }
    const double alpha = rz / pap;
    for (std::size_t i = 0; i < n; ++i) x[i] += alpha * p[i];
    for (std::size_t i = 0; i < n; ++i) r[i] -= alpha * ap[i];
    res.iterations = k;
    if (energies) {
      sys.matvec(x, ax);
      energies->push_back(0.5 * dot(x, ax) - dot(b, x));
    }
    res.residual = std::sqrt(dot(r, r)) / bnorm;
    if (res.residual < params.cg_tol) break;
    for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    const double rz_next = dot(r, z);
    const double beta = rz_next / rz;
    rz = rz_next;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  return res;
}

}  // namespace

FlowField solve_flow(const TileMatches& matches, const LinearImage& guide,
                     const SolverParams& params, SolveStats* stats) {
  if (guide.width() != matches.width || guide.height() != matches.height) {
    throw dimension_error("solve_flow: guide shape mismatch");
  }
  const LinearImage guide_luma =
      guide.channels() == 1 ? guide : luma(guide);
  const int w = matches.width;
  const int h = matches.height;
  const std::size_t n = static_cast<std::size_t>(w) * h;

  std::vector<double> conf(n, 0.0), tu(n, 0.0), tv(n, 0.0);
  bool any = false;
  for (int ty = 0; ty < matches.tiles_y; ++ty) {
    for (int tx = 0; tx < matches.tiles_x; ++tx) {
      const TileMatch& m = matches.at(tx, ty);
      const int x0 = tx * matches.tile_size;
      const int y0 = ty * matches.tile_size;
      const int cx = x0 + (std::min(x0 + matches.tile_size, w) - x0) / 2;
      const int cy = y0 + (std::min(y0 + matches.tile_size, h) - y0) / 2;
      const std::size_t i = static_cast<std::size_t>(cy) * w + cx;
      conf[i] = m.confidence;
      tu[i] = m.u;
      tv[i] = m.v;
      any = any || m.confidence > 0.0;
    }
  }
  if (!any) {
    throw numeric_error("flow solve: every tile confidence is zero");
  }

  const FlowSystem sys = build_system(conf, guide_luma, params);
  std::vector<double> b(n), x(n);
  FlowField flow{LinearImage(w, h, 1), LinearImage(w, h, 1)};

  for (std::size_t i = 0; i < n; ++i) b[i] = conf[i] * tu[i];
  const CgResult ru = conjugate_gradient(sys, b, x, params,
                                         stats ? &stats->energies_u : nullptr);
  for (std::size_t i = 0; i < n; ++i) {
    flow.u.data()[i] = static_cast<float>(x[i]);
  }

  for (std::size_t i = 0; i < n; ++i) b[i] = conf[i] * tv[i];
  const CgResult rv = conjugate_gradient(sys, b, x, params, nullptr);
  for (std::size_t i = 0; i < n; ++i) {
    flow.v.data()[i] = static_cast<float>(x[i]);
  }

  if (stats) {
    stats->iterations_u = ru.iterations;
    stats->iterations_v = rv.iterations;
    stats->residual_u = ru.residual;
    stats->residual_v = rv.residual;
  }
  return flow;
}

LinearImage warp_gather(const LinearImage& alt, const FlowField& flow) {
  if (alt.width() != flow.width() || alt.height() != flow.height()) {
    throw dimension_error("warp_gather: shape mismatch");
  }
  const int w = alt.width();
  const int h = alt.height();
  const int ch = alt.channels();
  LinearImage out(w, h, ch);
  parallel_ranges(h, [&](int y_begin, int y_end) {
    for (int y = y_begin; y < y_end; ++y) {
      for (int x = 0; x < w; ++x) {
        const double sx = std::clamp<double>(x + flow.u.at(x, y, 0), 0.0,
                                             w - 1.0);
        const double sy = std::clamp<double>(y + flow.v.at(x, y, 0), 0.0,
                                             h - 1.0);
        const int x0 = static_cast<int>(std::floor(sx));
        const int y0 = static_cast<int>(std::floor(sy));
        const int x1 = std::min(x0 + 1, w - 1);
        const int y1 = std::min(y0 + 1, h - 1);
        const double fx = sx - x0;
        const double fy = sy - y0;
        for (int c = 0; c < ch; ++c) {
          const double top = alt.at(x0, y0, c) +
                             fx * (alt.at(x1, y0, c) - alt.at(x0, y0, c));
          const double bot = alt.at(x0, y1, c) +
                             fx * (alt.at(x1, y1, c) - alt.at(x0, y1, c));
          out.at(x, y, c) = static_cast<float>(top + fy * (bot - top));
        }
      }
    }
  });
  return out;
}

namespace {

const ManifestEntry& frame_at(const SessionManifest& m, int t_index,
                              CameraId cam) {
  for (const ManifestEntry& e : m.frames) {
    if (e.spec.t_index == t_index && e.spec.camera == cam) return e;
  }
  throw format_error("manifest: no frame for t_index " +
                     std::to_string(t_index) + " " + to_string(cam));
}

}  // namespace

RegistrationResult register_pair(const SessionManifest& manifest,
                                 const std::filesystem::path& session_dir,
                                 int t_index,
                                 const RegistrationParams& params) {
  const ManifestEntry& off1 = frame_at(manifest, t_index, CameraId::cam1);
  const ManifestEntry& off2 = frame_at(manifest, t_index, CameraId::cam2);
  const ManifestEntry& on2 = frame_at(manifest, t_index + 1, CameraId::cam2);
  if (off1.spec.settings.flash != FlashKind::off ||
      off2.spec.settings.flash != FlashKind::off) {
    throw format_error("register_pair: frames at t_index are not flash-off");
  }
  if (on2.spec.settings.flash == FlashKind::off) {
    throw format_error("register_pair: frame at t_index + 1 is not flash-on");
  }

  const LinearImage alt_rgb =
      demosaic_malvar(read_raw_pgm(session_dir / off1.file));
  const LinearImage base_rgb =
      demosaic_malvar(read_raw_pgm(session_dir / off2.file));
  const LinearImage guide_rgb =
      demosaic_malvar(read_raw_pgm(session_dir / on2.file));

  const LinearImage base_green = extract_channel(base_rgb, 1);
  const LinearImage alt_green = extract_channel(alt_rgb, 1);

  RegistrationResult result;
  result.matches =
      tile_match(base_green, alt_green, params.tile_size, params.search);
  result.flow = solve_flow(result.matches, luma(guide_rgb), params.solver);

  double conf_sum = 0.0;
  for (const TileMatch& m : result.matches.tiles) conf_sum += m.confidence;
  const double conf_mean =
      conf_sum / static_cast<double>(result.matches.tiles.size());
  result.low_confidence = conf_mean < params.low_confidence_mean;
  return result;
}

void save_flow(const std::filesystem::path& path, const FlowField& flow) {
  if (!flow.u.same_shape(flow.v)) {
    throw dimension_error("save_flow: component shape mismatch");
  }
  LinearImage packed(flow.width(), flow.height(), 3);
  for (int y = 0; y < flow.height(); ++y) {
    for (int x = 0; x < flow.width(); ++x) {
      packed.at(x, y, 0) = flow.u.at(x, y, 0);
      packed.at(x, y, 1) = flow.v.at(x, y, 0);
      packed.at(x, y, 2) = 0.0f;
    }
  }
  write_pfm(path, packed);
}

FlowField load_flow(const std::filesystem::path& path) {
  const LinearImage packed = read_pfm(path);
  if (packed.channels() != 3) {
    throw format_error("flow file must have three channels");
  }
  FlowField flow{LinearImage(packed.width(), packed.height(), 1),
                 LinearImage(packed.width(), packed.height(), 1)};
  for (int y = 0; y < packed.height(); ++y) {
    for (int x = 0; x < packed.width(); ++x) {
      flow.u.at(x, y, 0) = packed.at(x, y, 0);
      flow.v.at(x, y, 0) = packed.at(x, y, 1);
    }
  }
  return flow;
}

}  // namespace darkflash
