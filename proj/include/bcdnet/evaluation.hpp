#pragma once

#include <numbers>

#include "core.hpp"

namespace bcdnet {

/// Additive ellipse: inside the (rotated) ellipse the attenuation rises by
/// delta_mu. Geometry is in mm in the image's centered coordinate frame.
struct Ellipse {
  double cx_mm = 0.0;
  double cy_mm = 0.0;
  double semi_a_mm = 1.0;
  double semi_b_mm = 1.0;
  double rotation_deg = 0.0;
  double delta_mu = 0.0;  // mm^-1
};

struct PhantomSpec {
  int width = 0;
  int height = 0;
  double pixel_size = 1.0;  // mm
  std::vector<Ellipse> ellipses;
};

inline void validate(const PhantomSpec& spec) {
  require(spec.width >= 1 && spec.height >= 1, "phantom spec: dimensions must be >= 1");
  require(spec.pixel_size > 0.0, "phantom spec: pixel size must be positive");
  for (const Ellipse& e : spec.ellipses)
    require(e.semi_a_mm > 0.0 && e.semi_b_mm > 0.0, "phantom spec: semi-axes must be positive");
}

/// Rasterizes the spec by sampling each ellipse indicator at pixel centers
/// and summing the deltas.
inline Image generate_phantom(const PhantomSpec& spec) {
  validate(spec);
  Image img(spec.width, spec.height, spec.pixel_size);
  for (const Ellipse& e : spec.ellipses) {
    const double phi = e.rotation_deg * std::numbers::pi / 180.0;
    const double c = std::cos(phi), s = std::sin(phi);
    for (int j = 0; j < spec.height; ++j) {
      const double y = (j + 0.5 - 0.5 * spec.height) * spec.pixel_size - e.cy_mm;
      for (int i = 0; i < spec.width; ++i) {
        const double x = (i + 0.5 - 0.5 * spec.width) * spec.pixel_size - e.cx_mm;
        const double u = (x * c + y * s) / e.semi_a_mm;
        const double w = (-x * s + y * c) / e.semi_b_mm;
        if (u * u + w * w <= 1.0) img.at(j, i) += e.delta_mu;
      }
    }
  }
  return img;
}

/// Random water-like phantom: a centered background disc at mu_background
/// with n_inner random contrast ellipses inside it. Deterministic in the
/// seed; re-draws (up to a bounded number of attempts) if stacked negative
/// contrasts would push any pixel below zero.
inline PhantomSpec random_phantom_spec(int width, int height, double pixel_size, int n_inner,
                                       std::uint64_t seed, double mu_background = 0.02) {
  require(width >= 1 && height >= 1, "random_phantom_spec: dimensions must be >= 1");
  require(pixel_size > 0.0, "random_phantom_spec: pixel size must be positive");
  require(n_inner >= 0, "random_phantom_spec: inner ellipse count must be >= 0");
  require(mu_background > 0.0, "random_phantom_spec: background attenuation must be positive");

  const double extent = std::min(width, height) * pixel_size;
  const double disc_radius = 0.44 * extent;
  for (int attempt = 0; attempt < 32; ++attempt) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(attempt)));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    PhantomSpec spec;
    spec.width = width;
    spec.height = height;
    spec.pixel_size = pixel_size;
    spec.ellipses.push_back({0.0, 0.0, disc_radius, disc_radius, 0.0, mu_background});
    for (int i = 0; i < n_inner; ++i) {
      Ellipse e;
      const double r = 0.55 * disc_radius * std::sqrt(unit(rng));
      const double angle = 2.0 * std::numbers::pi * unit(rng);
      e.cx_mm = r * std::cos(angle);
      e.cy_mm = r * std::sin(angle);
      e.semi_a_mm = (0.06 + 0.14 * unit(rng)) * extent;
      e.semi_b_mm = (0.06 + 0.14 * unit(rng)) * extent;
      e.rotation_deg = 180.0 * unit(rng);
      const double magnitude = (0.10 + 0.25 * unit(rng)) * mu_background;
      e.delta_mu = (unit(rng) < 0.5 ? -1.0 : 1.0) * magnitude;
      spec.ellipses.push_back(e);
    }
    const Image img = generate_phantom(spec);
    bool ok = true;
    for (double v : img.values)
      if (v < 0.0) ok = false;
    if (ok) return spec;
  }
  throw validation_error("random_phantom_spec: could not draw a non-negative phantom");
}

/// Pixel selection mask for error metrics.
struct Roi {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> mask;
};

inline Roi full_roi(int width, int height) {
  require(width >= 1 && height >= 1, "full_roi: dimensions must be >= 1");
  return Roi{width, height,
             std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height, 1)};
}

/// Centered disc covering radius_fraction of the half-extent.
inline Roi disc_roi(int width, int height, double radius_fraction) {
  require(width >= 1 && height >= 1, "disc_roi: dimensions must be >= 1");
  require(radius_fraction > 0.0, "disc_roi: radius fraction must be positive");
  Roi roi{width, height, std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height, 0)};
  const double radius = radius_fraction * 0.5 * std::min(width, height);
  for (int j = 0; j < height; ++j) {
    for (int i = 0; i < width; ++i) {
      const double dx = i + 0.5 - 0.5 * width;
      const double dy = j + 0.5 - 0.5 * height;
      if (dx * dx + dy * dy <= radius * radius)
        roi.mask[static_cast<std::size_t>(j) * width + i] = 1;
    }
  }
  return roi;
}

/// Linear attenuation to Hounsfield units: water maps to 0, vacuum to -1000.
inline Image mu_to_hu(const Image& mu, double mu_water) {
  require(mu_water > 0.0, "mu_to_hu: water attenuation must be positive");
  Image hu = mu;
  for (double& v : hu.values) v = 1000.0 * (v - mu_water) / mu_water;
  return hu;
}

/// Root mean squared error in Hounsfield units over the masked pixels.
inline double rmse_hu(const Image& recon, const Image& truth, const Roi& roi, double mu_water) {
  require(recon.same_shape(truth), "rmse_hu: image shapes differ");
  require(roi.width == recon.width && roi.height == recon.height,
          "rmse_hu: mask shape does not match images");
  require(mu_water > 0.0, "rmse_hu: water attenuation must be positive");
  double acc = 0.0;
  long count = 0;
  for (std::size_t i = 0; i < recon.size(); ++i) {
    if (!roi.mask[i]) continue;
    acc += sq(1000.0 * (recon.values[i] - truth.values[i]) / mu_water);
    ++count;
  }
  require(count >= 1, "rmse_hu: mask selects no pixels");
  return std::sqrt(acc / count);
}

}  // namespace bcdnet
