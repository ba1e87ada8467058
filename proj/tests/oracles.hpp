#pragma once

// Reference implementations used to check the library from an independent
// direction: geometric set-ups are solved by direct per-pixel clipping,
// spatial operators by brute-force summation, and gradients by finite
// differences. Nothing here shares code with the library paths under test.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "bcdnet/core.hpp"
#include "bcdnet/denoiser.hpp"
#include "bcdnet/geometry.hpp"
#include "bcdnet/projector.hpp"
#include "bcdnet/training.hpp"

namespace oracle {

using bcdnet::AutoencoderParams;
using bcdnet::Geometry;
using bcdnet::Image;
using bcdnet::PatchMatrix;
using bcdnet::Ray;

/// Length of the ray inside one half-open axis-aligned box, by direct
/// slab clipping. A ray running parallel to a slab counts as inside only
/// when its coordinate lies in the half-open interval, matching the pixel
/// ownership convention.
inline double ray_box_length(const Ray& ray, double xa, double xb, double ya, double yb) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  double lo = -inf, hi = inf;
  if (ray.dx == 0.0) {
    if (!(ray.px >= xa && ray.px < xb)) return 0.0;
  } else {
    const double a = (xa - ray.px) / ray.dx;
    const double b = (xb - ray.px) / ray.dx;
    lo = std::max(lo, std::min(a, b));
    hi = std::min(hi, std::max(a, b));
  }
  if (ray.dy == 0.0) {
    if (!(ray.py >= ya && ray.py < yb)) return 0.0;
  } else {
    const double a = (ya - ray.py) / ray.dy;
    const double b = (yb - ray.py) / ray.dy;
    lo = std::max(lo, std::min(a, b));
    hi = std::min(hi, std::max(a, b));
  }
  return hi > lo ? hi - lo : 0.0;
}

/// Dense system matrix built pixel by pixel, no grid marching involved.
inline std::vector<double> system_matrix(const Geometry& g) {
  const long n_pix = g.n_pixels();
  std::vector<double> a(static_cast<std::size_t>(g.n_rays()) * n_pix, 0.0);
  const double x0 = -0.5 * g.image_width * g.pixel_size;
  const double y0 = -0.5 * g.image_height * g.pixel_size;
  for (int view = 0; view < g.n_views; ++view) {
    for (int det = 0; det < g.n_detectors; ++det) {
      const Ray ray = bcdnet::ray_through(g, view, det);
      double* row = a.data() + (static_cast<long>(view) * g.n_detectors + det) * n_pix;
      for (int j = 0; j < g.image_height; ++j) {
        for (int i = 0; i < g.image_width; ++i) {
          const double xa = x0 + i * g.pixel_size;
          const double ya = y0 + j * g.pixel_size;
          row[static_cast<long>(j) * g.image_width + i] =
              ray_box_length(ray, xa, xa + g.pixel_size, ya, ya + g.pixel_size);
        }
      }
    }
  }
  return a;
}

inline std::vector<double> matvec(const std::vector<double>& a, long rows, long cols,
                                  const std::vector<double>& x) {
  std::vector<double> y(rows, 0.0);
  for (long r = 0; r < rows; ++r)
    for (long c = 0; c < cols; ++c) y[r] += a[r * cols + c] * x[c];
  return y;
}

inline std::vector<double> matvec_t(const std::vector<double>& a, long rows, long cols,
                                    const std::vector<double>& y) {
  std::vector<double> x(cols, 0.0);
  for (long r = 0; r < rows; ++r)
    for (long c = 0; c < cols; ++c) x[c] += a[r * cols + c] * y[r];
  return x;
}

inline int wrap(int idx, int n) { return ((idx % n) + n) % n; }

/// Periodic cross-correlation by definition.
inline Image conv_circ(const Image& img, const std::vector<double>& filter, int side) {
  const int c = side / 2;
  Image out(img.width, img.height, img.pixel_size);
  for (int j = 0; j < img.height; ++j)
    for (int i = 0; i < img.width; ++i) {
      double acc = 0.0;
      for (int qr = 0; qr < side; ++qr)
        for (int qc = 0; qc < side; ++qc)
          acc += filter[static_cast<std::size_t>(qr) * side + qc] *
                 img.at(wrap(j + qr - c, img.height), wrap(i + qc - c, img.width));
      out.at(j, i) = acc;
    }
  return out;
}

/// The layer mapping computed in the patch domain instead of by cascaded
/// correlations: every wrapped patch is encoded against each filter,
/// thresholded, decoded, and the decoded taps are scattered back to the
/// pixels the patch covered (offset q lands at anchor minus q plus center).
inline Image denoise_patch_domain(const Image& img, const AutoencoderParams& p) {
  const int side = p.filter_side, c = side / 2, taps = p.taps();
  Image out(img.width, img.height, img.pixel_size);
  for (int pr = 0; pr < img.height; ++pr) {
    for (int pc = 0; pc < img.width; ++pc) {
      std::vector<double> patch(taps);
      for (int qr = 0; qr < side; ++qr)
        for (int qc = 0; qc < side; ++qc)
          patch[static_cast<std::size_t>(qr) * side + qc] =
              img.at(wrap(pr + qr - c, img.height), wrap(pc + qc - c, img.width));
      for (int k = 0; k < p.filter_count; ++k) {
        const double* enc = p.encode.data() + static_cast<std::size_t>(k) * taps;
        const double* dec = p.decode.data() + static_cast<std::size_t>(k) * taps;
        double code = 0.0;
        for (int q = 0; q < taps; ++q) code += enc[q] * patch[q];
        const double s = bcdnet::soft_threshold(code, std::exp(p.log_thresholds[k]));
        if (s == 0.0) continue;
        for (int qr = 0; qr < side; ++qr)
          for (int qc = 0; qc < side; ++qc)
            out.at(wrap(pr - (qr - c), img.height), wrap(pc - (qc - c), img.width)) +=
                dec[static_cast<std::size_t>(qr) * side + qc] * s;
      }
    }
  }
  for (double& v : out.values) v /= taps;
  return out;
}

/// Training loss computed through explicitly materialized matrices.
inline double training_loss(const AutoencoderParams& p, const PatchMatrix& target,
                            const PatchMatrix& input) {
  const int taps = p.taps();
  const long n = target.n_patches;
  // codes = E^T X, row k column p
  std::vector<double> sparse(static_cast<std::size_t>(p.filter_count) * n, 0.0);
  for (int k = 0; k < p.filter_count; ++k) {
    const double a = std::exp(p.log_thresholds[k]);
    for (long col = 0; col < n; ++col) {
      double code = 0.0;
      for (int q = 0; q < taps; ++q)
        code += p.encode[static_cast<std::size_t>(k) * taps + q] * input.column(col)[q];
      sparse[static_cast<std::size_t>(k) * n + col] = bcdnet::soft_threshold(code, a);
    }
  }
  double acc = 0.0;
  for (long col = 0; col < n; ++col) {
    for (int q = 0; q < taps; ++q) {
      double recon = 0.0;
      for (int k = 0; k < p.filter_count; ++k)
        recon += p.decode[static_cast<std::size_t>(k) * taps + q] *
                 sparse[static_cast<std::size_t>(k) * n + col];
      acc += bcdnet::sq(recon - target.column(col)[q]);
    }
  }
  return acc / (static_cast<double>(taps) * n);
}

/// Central finite differences of training_loss in every parameter,
/// treating the loss as a black box.
inline bcdnet::TrainingGradient fd_gradient(const AutoencoderParams& p,
                                            const PatchMatrix& target, const PatchMatrix& input,
                                            double step) {
  AutoencoderParams work = p;
  const auto central = [&](double& slot) {
    const double saved = slot;
    slot = saved + step;
    const double up = bcdnet::training_loss(work, target, input);
    slot = saved - step;
    const double down = bcdnet::training_loss(work, target, input);
    slot = saved;
    return (up - down) / (2.0 * step);
  };
  bcdnet::TrainingGradient g;
  g.decode.resize(p.decode.size());
  g.encode.resize(p.encode.size());
  g.log_thresholds.resize(p.log_thresholds.size());
  for (std::size_t i = 0; i < work.decode.size(); ++i) g.decode[i] = central(work.decode[i]);
  for (std::size_t i = 0; i < work.encode.size(); ++i) g.encode[i] = central(work.encode[i]);
  for (std::size_t i = 0; i < work.log_thresholds.size(); ++i)
    g.log_thresholds[i] = central(work.log_thresholds[i]);
  return g;
}

/// Operator-norm bound for the layer mapping: thresholding is elementwise
/// nonexpansive, so the map's Lipschitz constant is at most
/// (1/taps) * sum_k max|enc_hat_k| * max|dec_hat_k| over the probe grid's
/// frequencies. Transfer functions are evaluated by direct summation.
inline double lipschitz_upper_bound(const AutoencoderParams& p, int width, int height) {
  const int side = p.filter_side, c = side / 2, taps = p.taps();
  const auto transfer_peak = [&](const double* f) {
    double peak = 0.0;
    for (int fy = 0; fy < height; ++fy) {
      for (int fx = 0; fx < width; ++fx) {
        std::complex<double> acc = 0.0;
        for (int qr = 0; qr < side; ++qr)
          for (int qc = 0; qc < side; ++qc) {
            const double phase = 2.0 * std::numbers::pi *
                                 (double(fy) * (qr - c) / height + double(fx) * (qc - c) / width);
            acc += f[static_cast<std::size_t>(qr) * side + qc] *
                   std::complex<double>(std::cos(phase), std::sin(phase));
          }
        peak = std::max(peak, std::abs(acc));
      }
    }
    return peak;
  };
  double bound = 0.0;
  for (int k = 0; k < p.filter_count; ++k)
    bound += transfer_peak(p.encode.data() + static_cast<std::size_t>(k) * taps) *
             transfer_peak(p.decode.data() + static_cast<std::size_t>(k) * taps);
  return bound / taps;
}

/// Line integral through a centered disc of radius r and uniform value mu:
/// the chord at signed distance t from the center.
inline double disc_line_integral(double t, double radius, double mu) {
  const double d2 = radius * radius - t * t;
  return d2 > 0.0 ? 2.0 * mu * std::sqrt(d2) : 0.0;
}

inline double rel_l2_error(std::span<const double> got, std::span<const double> want) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    num += bcdnet::sq(got[i] - want[i]);
    den += bcdnet::sq(want[i]);
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

}  // namespace oracle
