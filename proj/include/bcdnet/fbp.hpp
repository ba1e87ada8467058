#pragma once

#include <complex>
#include <numbers>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "core.hpp"
#include "geometry.hpp"
#include "projector.hpp"

namespace bcdnet {

inline int next_pow2(int n) {
  int z = 1;
  while (z < n) z <<= 1;
  return z;
}

/// Ramp-filters each view in the frequency domain. Views are zero-padded to
/// a power of two at least twice the detector count so the circular
/// convolution matches the linear one over the retained samples, then the
/// spectrum is scaled by |f| with f in cycles per mm.
inline Sinogram ramp_filter(const Sinogram& sino, double detector_spacing) {
  require(detector_spacing > 0.0, "ramp_filter: detector spacing must be positive");
  require(sino.n_detectors >= 1 && sino.n_views >= 1, "ramp_filter: empty sinogram");
  require(all_finite(sino.values), "ramp_filter: non-finite sinogram");
  const int n = sino.n_detectors;
  const int padded = next_pow2(2 * n);

  Sinogram out = sino;
  Eigen::FFT<double> fft;
  std::vector<double> view(padded);
  std::vector<std::complex<double>> spectrum(padded);
  for (int v = 0; v < sino.n_views; ++v) {
    std::fill(view.begin(), view.end(), 0.0);
    for (int d = 0; d < n; ++d) view[d] = sino.at(v, d);
    fft.fwd(spectrum, view);
    for (int k = 0; k < padded; ++k) {
      const int signed_k = k <= padded / 2 ? k : k - padded;
      spectrum[k] *= std::abs(signed_k) / (padded * detector_spacing);
    }
    fft.inv(view, spectrum);
    for (int d = 0; d < n; ++d) out.at(v, d) = view[d];
  }
  return out;
}

/// Filtered backprojection: ramp-filter the views, apply the projector
/// adjoint, and rescale so the adjoint's length weighting together with the
/// view and detector sampling steps approximates the inverse transform.
/// Negative values are clipped since attenuation cannot be negative.
/// Assumes roughly uniform view spacing over [0, pi).
inline Image fbp(const Sinogram& sino, const Geometry& g) {
  validate(g);
  require_match(g, sino, "fbp");
  const Sinogram filtered = ramp_filter(sino, g.detector_spacing);
  Image img = back_project(filtered, g);
  const double scale =
      g.detector_spacing * (std::numbers::pi / g.n_views) / sq(g.pixel_size);
  for (double& v : img.values) v = std::max(v * scale, 0.0);
  return img;
}

}  // namespace bcdnet
