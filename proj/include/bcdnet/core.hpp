#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace bcdnet {

/// Thrown when an operation rejects its inputs (bad shape, bad parameter value).
struct validation_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Thrown on unreadable, unwritable, or truncated files.
struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw validation_error(message);
}

/// 2-D attenuation map on a square-pixel grid, values in mm^-1, row-major.
/// The grid is centered on the origin: column i spans
/// x in [(i - width/2) * pixel_size, (i + 1 - width/2) * pixel_size) and
/// row j spans the analogous y interval, so the row index grows with +y.
struct Image {
  int width = 0;
  int height = 0;
  double pixel_size = 1.0;  // mm
  std::vector<double> values;

  Image() = default;
  Image(int w, int h, double px, double fill = 0.0)
      : width(w),
        height(h),
        pixel_size(px),
        values(static_cast<std::size_t>(w < 0 ? 0 : w) * static_cast<std::size_t>(h < 0 ? 0 : h),
               fill) {}

  std::size_t size() const { return values.size(); }
  double& at(int row, int col) { return values[static_cast<std::size_t>(row) * width + col]; }
  double at(int row, int col) const { return values[static_cast<std::size_t>(row) * width + col]; }
  bool same_shape(const Image& other) const {
    return width == other.width && height == other.height;
  }
};

/// Per-ray data laid out view-major: entry (view, detector) lives at
/// values[view * n_detectors + detector]. The tag keeps sinograms, raw
/// counts, and statistical weights from being mixed up at compile time.
template <typename Tag>
struct RayGrid {
  int n_detectors = 0;
  int n_views = 0;
  std::vector<double> values;

  RayGrid() = default;
  RayGrid(int detectors, int views, double fill = 0.0)
      : n_detectors(detectors),
        n_views(views),
        values(static_cast<std::size_t>(detectors < 0 ? 0 : detectors) *
                   static_cast<std::size_t>(views < 0 ? 0 : views),
               fill) {}

  std::size_t size() const { return values.size(); }
  double& at(int view, int det) { return values[static_cast<std::size_t>(view) * n_detectors + det]; }
  double at(int view, int det) const {
    return values[static_cast<std::size_t>(view) * n_detectors + det];
  }
  template <typename OtherTag>
  bool same_shape(const RayGrid<OtherTag>& other) const {
    return n_detectors == other.n_detectors && n_views == other.n_views;
  }
};

using Sinogram = RayGrid<struct SinogramTag>;        // post-log line integrals
using PrelogCounts = RayGrid<struct PrelogTag>;      // measured photon counts
using StatWeights = RayGrid<struct WeightsTag>;      // diagonal of the data-fit weighting

template <typename To, typename From>
RayGrid<To> ray_grid_like(const RayGrid<From>& src, double fill = 0.0) {
  return RayGrid<To>(src.n_detectors, src.n_views, fill);
}

inline bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

inline double sq(double x) { return x * x; }

using Rng = std::mt19937_64;

/// Image with i.i.d. N(0, sigma^2) pixels, used for probing and tests.
inline Image gaussian_image(int width, int height, double pixel_size, double sigma, Rng& rng) {
  Image img(width, height, pixel_size);
  std::normal_distribution<double> noise(0.0, sigma);
  for (double& v : img.values) v = noise(rng);
  return img;
}

namespace detail {
inline int& thread_count_storage() {
  static int count = 1;
  return count;
}
}  // namespace detail

inline int thread_count() { return detail::thread_count_storage(); }

inline void set_thread_count(int count) {
  require(count >= 1, "set_thread_count: count must be >= 1");
  detail::thread_count_storage() = count;
}

/// Runs body(i) for i in [0, n). With more than one configured thread the
/// index range is split into contiguous chunks, one per worker; results must
/// therefore be written to disjoint locations. Chunk boundaries depend only
/// on n and the configured count, never on scheduling.
template <typename Body>
void parallel_for(long n, Body&& body) {
  const int workers = thread_count();
  if (workers <= 1 || n < 2L * workers) {
    for (long i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    const long lo = n * w / workers;
    const long hi = n * (w + 1) / workers;
    pool.emplace_back([lo, hi, &body] {
      for (long i = lo; i < hi; ++i) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

/// Deterministic stream splitter for deriving independent seeds.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace bcdnet
