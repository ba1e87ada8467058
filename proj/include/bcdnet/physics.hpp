#pragma once

#include "core.hpp"
#include "geometry.hpp"
#include "projector.hpp"

namespace bcdnet {

/// Statistical weight for one ray: w = rho^2 / (rho + readout_variance),
/// the inverse variance of the post-log measurement under a
/// Poisson-plus-Gaussian count model. Rays with zero recorded counts get
/// zero weight (they carry no usable information), which also covers the
/// 0/0 case when the readout variance is zero.
inline StatWeights compute_weights(const PrelogCounts& counts, double readout_variance) {
  require(readout_variance >= 0.0, "compute_weights: readout variance must be >= 0");
  StatWeights w = ray_grid_like<WeightsTag>(counts);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double rho = counts.values[i];
    require(rho >= 0.0, "compute_weights: counts must be non-negative");
    w.values[i] = rho > 0.0 ? rho * rho / (rho + readout_variance) : 0.0;
  }
  return w;
}

struct SimulatedScan {
  PrelogCounts counts;   // recorded photon counts, clamped below at one
  Sinogram postlog;      // y = ln(incident / counts)
  StatWeights weights;   // diag(W) from the recorded counts
};

/// Simulates a low-dose scan of `truth`: ideal counts incident * exp(-Ax)
/// are corrupted by Poisson counting noise plus additive N(0, readout
/// variance) electronic noise, then clamped below at one count so the
/// post-log transform stays finite. Rays are drawn in index order from a
/// single seeded generator, so a fixed seed reproduces the scan exactly.
/// With noiseless = true the counts are the ideal means (unclamped) and
/// the post-log data equals the forward projection exactly.
inline SimulatedScan simulate_scan(const Image& truth, const Geometry& g, double incident_photons,
                                   double readout_variance, std::uint64_t seed,
                                   bool noiseless = false) {
  require(incident_photons > 0.0, "simulate_scan: incident photon count must be positive");
  require(readout_variance >= 0.0, "simulate_scan: readout variance must be >= 0");
  Sinogram line = forward_project(truth, g);

  SimulatedScan scan;
  scan.counts = PrelogCounts(g.n_detectors, g.n_views);
  scan.postlog = Sinogram(g.n_detectors, g.n_views);
  if (noiseless) {
    for (std::size_t i = 0; i < line.size(); ++i) {
      scan.counts.values[i] = incident_photons * std::exp(-line.values[i]);
      scan.postlog.values[i] = line.values[i];
    }
  } else {
    Rng rng(seed);
    const double sigma = std::sqrt(readout_variance);
    for (std::size_t i = 0; i < line.size(); ++i) {
      const double mean = incident_photons * std::exp(-line.values[i]);
      double rho = 0.0;
      if (mean > 0.0) {
        std::poisson_distribution<long long> poisson(mean);
        rho = static_cast<double>(poisson(rng));
      }
      if (sigma > 0.0) {
        std::normal_distribution<double> readout(0.0, sigma);
        rho += readout(rng);
      }
      rho = std::max(rho, 1.0);
      scan.counts.values[i] = rho;
      scan.postlog.values[i] = std::log(incident_photons / rho);
    }
  }
  scan.weights = compute_weights(scan.counts, readout_variance);
  return scan;
}

}  // namespace bcdnet
