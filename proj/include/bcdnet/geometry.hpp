#pragma once

#include <numbers>

#include "core.hpp"

namespace bcdnet {

/// Parallel-beam acquisition geometry. Detector offsets are centered, so
/// detector d sits at (d - (n_detectors - 1)/2) * detector_spacing along the
/// axis perpendicular to the ray direction. View angles are in radians and
/// must be strictly increasing within [0, pi); a ray at angle theta travels
/// along (-sin theta, cos theta).
struct Geometry {
  int image_width = 0;
  int image_height = 0;
  double pixel_size = 1.0;       // mm
  int n_detectors = 0;
  double detector_spacing = 1.0;  // mm
  int n_views = 0;
  std::vector<double> angles;     // radians

  long n_rays() const { return static_cast<long>(n_detectors) * n_views; }
  long n_pixels() const { return static_cast<long>(image_width) * image_height; }
};

/// n_views angles evenly spaced over [0, pi).
inline std::vector<double> uniform_angles(int n_views) {
  require(n_views >= 1, "uniform_angles: n_views must be >= 1");
  std::vector<double> angles(n_views);
  for (int v = 0; v < n_views; ++v) angles[v] = std::numbers::pi * v / n_views;
  return angles;
}

inline void validate(const Geometry& g) {
  require(g.image_width >= 1 && g.image_height >= 1, "geometry: image dimensions must be >= 1");
  require(g.pixel_size > 0.0, "geometry: pixel_size must be positive");
  require(g.n_detectors >= 1, "geometry: n_detectors must be >= 1");
  require(g.detector_spacing > 0.0, "geometry: detector_spacing must be positive");
  require(g.n_views >= 1, "geometry: n_views must be >= 1");
  require(static_cast<int>(g.angles.size()) == g.n_views,
          "geometry: angles size must equal n_views");
  double prev = -1.0;
  for (double a : g.angles) {
    require(a >= 0.0 && a < std::numbers::pi, "geometry: angles must lie in [0, pi)");
    require(a > prev, "geometry: angles must be strictly increasing");
    prev = a;
  }
}

inline Geometry make_geometry(int image_width, int image_height, double pixel_size,
                              int n_detectors, double detector_spacing, int n_views) {
  Geometry g;
  g.image_width = image_width;
  g.image_height = image_height;
  g.pixel_size = pixel_size;
  g.n_detectors = n_detectors;
  g.detector_spacing = detector_spacing;
  g.n_views = n_views;
  g.angles = uniform_angles(n_views);
  validate(g);
  return g;
}

inline void require_match(const Geometry& g, const Image& img, const char* who) {
  require(img.width == g.image_width && img.height == g.image_height,
          std::string(who) + ": image shape does not match geometry");
}

template <typename Tag>
void require_match(const Geometry& g, const RayGrid<Tag>& grid, const char* who) {
  require(grid.n_detectors == g.n_detectors && grid.n_views == g.n_views,
          std::string(who) + ": ray grid shape does not match geometry");
}

}  // namespace bcdnet
