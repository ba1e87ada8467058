#pragma once

#include <span>

#include "core.hpp"

namespace bcdnet {

/// One layer's convolutional autoencoder: K encoding filters, K matched
/// decoding filters, and K log-domain thresholds. Filters are square with
/// odd side r; each filter's taps() = r * r coefficients are stored
/// contiguously, raster order, so filter k occupies [k * taps(), (k+1) *
/// taps()). Thresholds are stored as logs and exponentiated at use, which
/// keeps the effective thresholds positive for any parameter value.
struct AutoencoderParams {
  int filter_count = 0;                 // K
  int filter_side = 0;                  // r (odd)
  std::vector<double> decode;           // K * r * r
  std::vector<double> encode;           // K * r * r
  std::vector<double> log_thresholds;   // K

  int taps() const { return filter_side * filter_side; }
};

inline void validate(const AutoencoderParams& p) {
  require(p.filter_count >= 1, "autoencoder: filter count must be >= 1");
  require(p.filter_side >= 1 && p.filter_side % 2 == 1,
          "autoencoder: filter side must be odd and >= 1");
  const std::size_t want = static_cast<std::size_t>(p.filter_count) * p.taps();
  require(p.decode.size() == want && p.encode.size() == want,
          "autoencoder: filter storage does not match filter count and side");
  require(p.log_thresholds.size() == static_cast<std::size_t>(p.filter_count),
          "autoencoder: threshold count does not match filter count");
  require(all_finite(p.decode) && all_finite(p.encode) && all_finite(p.log_thresholds),
          "autoencoder: parameters must be finite");
}

/// K = 1 parameter set that reproduces its input up to the (negligible)
/// threshold exp(log_threshold): encode is a centered delta, decode is the
/// delta scaled by taps() to cancel the 1/taps() output normalization.
inline AutoencoderParams identity_autoencoder(int filter_side, double gain = 1.0,
                                              double log_threshold = -30.0) {
  require(filter_side >= 1 && filter_side % 2 == 1,
          "identity_autoencoder: filter side must be odd and >= 1");
  AutoencoderParams p;
  p.filter_count = 1;
  p.filter_side = filter_side;
  const int taps = p.taps();
  const int center = (filter_side / 2) * filter_side + filter_side / 2;
  p.decode.assign(taps, 0.0);
  p.encode.assign(taps, 0.0);
  p.decode[center] = gain * taps;
  p.encode[center] = 1.0;
  p.log_thresholds.assign(1, log_threshold);
  return p;
}

inline double soft_threshold(double u, double a) {
  if (u > a) return u - a;
  if (u < -a) return u + a;
  return 0.0;
}

/// Element-wise soft threshold with per-element positive thresholds.
inline std::vector<double> soft_threshold(std::span<const double> u, std::span<const double> a) {
  require(u.size() == a.size(), "soft_threshold: size mismatch");
  std::vector<double> out(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    require(a[i] > 0.0, "soft_threshold: thresholds must be positive");
    out[i] = soft_threshold(u[i], a[i]);
  }
  return out;
}

/// Periodic cross-correlation with a square filter of odd side:
/// out(p) = sum_q filter(q) * img(p + q - center), indices wrapped
/// circularly in both dimensions. The filter is applied without a flip,
/// so this is correlation rather than convolution proper.
inline Image conv_circ(const Image& img, std::span<const double> filter, int side) {
  require(side >= 1 && side % 2 == 1, "conv_circ: filter side must be odd and >= 1");
  require(filter.size() == static_cast<std::size_t>(side) * side,
          "conv_circ: filter size does not match side");
  require(img.width >= 1 && img.height >= 1, "conv_circ: empty image");
  const int w = img.width, h = img.height, c = side / 2;
  Image out(w, h, img.pixel_size);
  for (int j = 0; j < h; ++j) {
    for (int i = 0; i < w; ++i) {
      double acc = 0.0;
      for (int qr = 0; qr < side; ++qr) {
        const int row = (j + qr - c + h * side) % h;
        const double* img_row = img.values.data() + static_cast<std::size_t>(row) * w;
        const double* f_row = filter.data() + static_cast<std::size_t>(qr) * side;
        for (int qc = 0; qc < side; ++qc) {
          const int col = (i + qc - c + w * side) % w;
          acc += f_row[qc] * img_row[col];
        }
      }
      out.at(j, i) = acc;
    }
  }
  return out;
}

/// Applies the learned image mapping: encode each channel by periodic
/// cross-correlation, soft-threshold with exp(log_threshold), decode with
/// the matched filter, sum the channels, and divide by taps(). The 1/taps()
/// factor undoes the overcounting introduced by correlating over every
/// (wrapped) patch position.
inline Image denoise(const Image& x, const AutoencoderParams& p) {
  validate(p);
  require(all_finite(x.values), "denoise: image has non-finite values");
  const int taps = p.taps();
  Image acc(x.width, x.height, x.pixel_size);
  for (int k = 0; k < p.filter_count; ++k) {
    const std::span<const double> enc(p.encode.data() + static_cast<std::size_t>(k) * taps, taps);
    const std::span<const double> dec(p.decode.data() + static_cast<std::size_t>(k) * taps, taps);
    const double threshold = std::exp(p.log_thresholds[k]);
    Image code = conv_circ(x, enc, p.filter_side);
    for (double& v : code.values) v = soft_threshold(v, threshold);
    Image channel = conv_circ(code, dec, p.filter_side);
    for (std::size_t i = 0; i < acc.size(); ++i) acc.values[i] += channel.values[i];
  }
  const double scale = 1.0 / taps;
  for (double& v : acc.values) v *= scale;
  return acc;
}

/// Patch matrix: each column is one vectorized patch (raster order within
/// the patch), columns stored contiguously. Columns appear image by image,
/// row-major over anchor positions, so two extractions with the same
/// settings are column-aligned.
struct PatchMatrix {
  int patch_size = 0;   // taps per patch (side * side)
  long n_patches = 0;
  std::vector<double> values;  // column-major, patch_size x n_patches

  std::span<double> column(long p) {
    return {values.data() + static_cast<std::size_t>(p) * patch_size,
            static_cast<std::size_t>(patch_size)};
  }
  std::span<const double> column(long p) const {
    return {values.data() + static_cast<std::size_t>(p) * patch_size,
            static_cast<std::size_t>(patch_size)};
  }
};

/// Extracts square patches of side `patch_side` centered on anchor pixels
/// taken every `stride` pixels in both dimensions. With wrap = true the
/// anchors cover the whole image and out-of-range taps wrap circularly,
/// matching conv_circ; with wrap = false only fully interior patches are
/// kept. Patch layout mirrors the filter layout, so for a centered anchor
/// the dot product of an encoding filter with a column equals the
/// corresponding conv_circ output pixel.
inline PatchMatrix extract_patches(const std::vector<Image>& images, int patch_side, int stride,
                                   bool wrap = true) {
  require(patch_side >= 1, "extract_patches: patch side must be >= 1");
  require(stride >= 1, "extract_patches: stride must be >= 1");
  const int c = patch_side / 2;

  PatchMatrix m;
  m.patch_size = patch_side * patch_side;
  for (const Image& img : images) {
    require(img.width >= patch_side && img.height >= patch_side,
            "extract_patches: patch side exceeds image dimensions");
    const int row_lo = wrap ? 0 : c;
    const int row_hi = wrap ? img.height : img.height - patch_side + c + 1;
    const int col_lo = wrap ? 0 : c;
    const int col_hi = wrap ? img.width : img.width - patch_side + c + 1;
    for (int pr = row_lo; pr < row_hi; pr += stride) {
      for (int pc = col_lo; pc < col_hi; pc += stride) {
        for (int qr = 0; qr < patch_side; ++qr) {
          const int row = (pr + qr - c + img.height) % img.height;
          for (int qc = 0; qc < patch_side; ++qc) {
            const int col = (pc + qc - c + img.width) % img.width;
            m.values.push_back(img.at(row, col));
          }
        }
        ++m.n_patches;
      }
    }
  }
  require(m.n_patches >= 1, "extract_patches: no patches extracted");
  return m;
}

/// Lower bound on the Lipschitz constant of the mapping, probed with
/// seeded Gaussian image pairs (alternating independent and nearby pairs).
/// A reported value < 1 is evidence of, not proof of, nonexpansiveness.
inline double estimate_lipschitz(const AutoencoderParams& p, int width, int height,
                                 int probe_count, std::uint64_t seed) {
  validate(p);
  require(width >= 1 && height >= 1, "estimate_lipschitz: bad probe dimensions");
  require(probe_count >= 1, "estimate_lipschitz: probe count must be >= 1");
  Rng rng(seed);
  double best = 0.0;
  for (int i = 0; i < probe_count; ++i) {
    Image u = gaussian_image(width, height, 1.0, 1.0, rng);
    Image v = (i % 2 == 0) ? gaussian_image(width, height, 1.0, 1.0, rng) : u;
    if (i % 2 != 0) {
      Image nudge = gaussian_image(width, height, 1.0, 1e-4, rng);
      for (std::size_t n = 0; n < v.size(); ++n) v.values[n] += nudge.values[n];
    }
    const Image du = denoise(u, p);
    const Image dv = denoise(v, p);
    double num = 0.0, den = 0.0;
    for (std::size_t n = 0; n < u.size(); ++n) {
      num += sq(du.values[n] - dv.values[n]);
      den += sq(u.values[n] - v.values[n]);
    }
    if (den > 0.0) best = std::max(best, std::sqrt(num / den));
  }
  return best;
}

/// Largest observed value of |next(u) - prev(v)|^2 - |u - v|^2 over probe
/// pairs, floored at zero. This is the per-layer expansion excess that must
/// stay summable for the outer iteration to settle.
inline double estimate_epsilon(const AutoencoderParams& prev, const AutoencoderParams& next,
                               std::span<const std::pair<Image, Image>> probe_pairs) {
  validate(prev);
  validate(next);
  require(!probe_pairs.empty(), "estimate_epsilon: need at least one probe pair");
  double worst = 0.0;
  for (const auto& [u, v] : probe_pairs) {
    require(u.same_shape(v), "estimate_epsilon: probe pair shape mismatch");
    const Image du = denoise(u, next);
    const Image dv = denoise(v, prev);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t n = 0; n < u.size(); ++n) {
      lhs += sq(du.values[n] - dv.values[n]);
      rhs += sq(u.values[n] - v.values[n]);
    }
    worst = std::max(worst, lhs - rhs);
  }
  return std::max(worst, 0.0);
}

/// Convenience overload probing with seeded Gaussian pairs, half of them
/// identical (u = v) and half well separated.
inline double estimate_epsilon(const AutoencoderParams& prev, const AutoencoderParams& next,
                               int width, int height, int probe_count, std::uint64_t seed) {
  require(width >= 1 && height >= 1, "estimate_epsilon: bad probe dimensions");
  require(probe_count >= 1, "estimate_epsilon: probe count must be >= 1");
  Rng rng(seed);
  std::vector<std::pair<Image, Image>> pairs;
  pairs.reserve(probe_count);
  for (int i = 0; i < probe_count; ++i) {
    Image u = gaussian_image(width, height, 1.0, 1.0, rng);
    Image v = u;
    if (i % 2 != 0) {
      Image nudge = gaussian_image(width, height, 1.0, 0.5, rng);
      for (std::size_t n = 0; n < v.size(); ++n) v.values[n] += nudge.values[n];
    }
    pairs.emplace_back(std::move(u), std::move(v));
  }
  return estimate_epsilon(prev, next, pairs);
}

}  // namespace bcdnet
