#pragma once

#include <algorithm>
#include <limits>

#include "core.hpp"
#include "geometry.hpp"

namespace bcdnet {

/// Point on a ray plus its unit direction.
struct Ray {
  double px = 0.0, py = 0.0;
  double dx = 0.0, dy = 0.0;
};

inline Ray ray_through(const Geometry& g, int view, int det) {
  const double theta = g.angles[view];
  const double c = std::cos(theta), s = std::sin(theta);
  const double offset = (det - 0.5 * (g.n_detectors - 1)) * g.detector_spacing;
  return Ray{offset * c, offset * s, -s, c};
}

/// Top-level projector call counts, for cost accounting in solver traces.
/// Incremented once per forward_project / back_project invocation.
struct ProjectorCounters {
  long forward = 0;
  long back = 0;
};

inline ProjectorCounters& projector_counters() {
  static ProjectorCounters counters;
  return counters;
}

/// Walks the pixel grid along `ray`, calling visit(pixel, length_mm) for
/// every pixel the ray crosses, in traversal order. Pixels are half-open
/// boxes, so a ray running exactly along a shared edge is attributed to the
/// box on the +x / +y side and never counted twice. Expects a validated
/// geometry and a unit direction.
template <typename Visit>
void trace_ray(const Geometry& g, const Ray& ray, Visit&& visit) {
  const int w = g.image_width, h = g.image_height;
  const double step = g.pixel_size;
  const double x0 = -0.5 * w * step, y0 = -0.5 * h * step;
  const double x1 = x0 + w * step, y1 = y0 + h * step;
  constexpr double kInf = std::numeric_limits<double>::infinity();

  // Clip to the grid. A ray parallel to a slab is inside only on the
  // half-open side, matching the pixel convention above.
  double s_min = -kInf, s_max = kInf;
  if (ray.dx == 0.0) {
    if (!(ray.px >= x0 && ray.px < x1)) return;
  } else {
    const double a = (x0 - ray.px) / ray.dx;
    const double b = (x1 - ray.px) / ray.dx;
    s_min = std::max(s_min, std::min(a, b));
    s_max = std::min(s_max, std::max(a, b));
  }
  if (ray.dy == 0.0) {
    if (!(ray.py >= y0 && ray.py < y1)) return;
  } else {
    const double a = (y0 - ray.py) / ray.dy;
    const double b = (y1 - ray.py) / ray.dy;
    s_min = std::max(s_min, std::min(a, b));
    s_max = std::min(s_max, std::max(a, b));
  }
  if (!(s_min < s_max)) return;

  const double ex = ray.px + s_min * ray.dx;
  const double ey = ray.py + s_min * ray.dy;
  int ix = std::clamp(static_cast<int>(std::floor((ex - x0) / step)), 0, w - 1);
  int iy = std::clamp(static_cast<int>(std::floor((ey - y0) / step)), 0, h - 1);

  // Parameter at which the ray leaves the current cell through an x or y
  // gridline. Recomputed from the integer line index at every crossing so
  // no error accumulates along the march.
  const auto exit_x = [&](int cell) {
    return (x0 + (cell + (ray.dx > 0.0 ? 1 : 0)) * step - ray.px) / ray.dx;
  };
  const auto exit_y = [&](int cell) {
    return (y0 + (cell + (ray.dy > 0.0 ? 1 : 0)) * step - ray.py) / ray.dy;
  };
  double next_x = (ray.dx == 0.0) ? kInf : exit_x(ix);
  double next_y = (ray.dy == 0.0) ? kInf : exit_y(iy);
  const int step_x = ray.dx > 0.0 ? 1 : -1;
  const int step_y = ray.dy > 0.0 ? 1 : -1;

  double s_cur = s_min;
  while (s_cur < s_max) {
    const double s_end = std::min({next_x, next_y, s_max});
    if (s_end > s_cur) visit(static_cast<long>(iy) * w + ix, s_end - s_cur);
    if (s_end >= s_max) break;
    if (next_x == s_end) {
      ix += step_x;
      if (ix < 0 || ix >= w) break;
      next_x = exit_x(ix);
    }
    if (next_y == s_end) {
      iy += step_y;
      if (iy < 0 || iy >= h) break;
      next_y = exit_y(iy);
    }
    s_cur = s_end;
  }
}

/// Line-integral forward projection, (Ax)_m = sum of pixel values weighted
/// by exact intersection lengths in mm.
inline Sinogram forward_project(const Image& img, const Geometry& g) {
  validate(g);
  require_match(g, img, "forward_project");
  require(all_finite(img.values), "forward_project: image has non-finite values");
  projector_counters().forward += 1;
  Sinogram sino(g.n_detectors, g.n_views);
  parallel_for(g.n_rays(), [&](long m) {
    const int view = static_cast<int>(m / g.n_detectors);
    const int det = static_cast<int>(m % g.n_detectors);
    double acc = 0.0;
    trace_ray(g, ray_through(g, view, det), [&](long pixel, double len) {
      acc += img.values[static_cast<std::size_t>(pixel)] * len;
    });
    sino.values[static_cast<std::size_t>(m)] = acc;
  });
  return sino;
}

/// Exact adjoint of forward_project: scatters each ray value back along the
/// same intersection lengths. With one configured thread the accumulation
/// order is (view, detector); with more, each view fills its own scratch
/// image and the partials are reduced in view order, so the result is
/// independent of the worker count.
inline Image back_project(const Sinogram& sino, const Geometry& g) {
  validate(g);
  require_match(g, sino, "back_project");
  require(all_finite(sino.values), "back_project: sinogram has non-finite values");
  projector_counters().back += 1;
  Image out(g.image_width, g.image_height, g.pixel_size);
  const long n_pix = g.n_pixels();
  const auto scatter_view = [&](int view, double* dst) {
    for (int det = 0; det < g.n_detectors; ++det) {
      const double value = sino.at(view, det);
      trace_ray(g, ray_through(g, view, det), [&](long pixel, double len) {
        dst[pixel] += value * len;
      });
    }
  };
  if (thread_count() <= 1) {
    for (int view = 0; view < g.n_views; ++view) scatter_view(view, out.values.data());
  } else {
    std::vector<double> scratch(static_cast<std::size_t>(g.n_views) * n_pix, 0.0);
    parallel_for(g.n_views, [&](long view) {
      scatter_view(static_cast<int>(view), scratch.data() + view * n_pix);
    });
    for (long view = 0; view < g.n_views; ++view) {
      const double* part = scratch.data() + view * n_pix;
      for (long i = 0; i < n_pix; ++i) out.values[static_cast<std::size_t>(i)] += part[i];
    }
  }
  return out;
}

/// Materializes A as a dense row-major (n_rays x n_pixels) matrix by running
/// the same traversal per ray. Intended for small problems and cross-checks.
inline std::vector<double> dense_system_matrix(const Geometry& g) {
  validate(g);
  const long n = g.n_pixels();
  std::vector<double> a(static_cast<std::size_t>(g.n_rays()) * n, 0.0);
  for (long m = 0; m < g.n_rays(); ++m) {
    const int view = static_cast<int>(m / g.n_detectors);
    const int det = static_cast<int>(m % g.n_detectors);
    double* row = a.data() + m * n;
    trace_ray(g, ray_through(g, view, det), [&](long pixel, double len) { row[pixel] += len; });
  }
  return a;
}

}  // namespace bcdnet
