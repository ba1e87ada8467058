#pragma once

#include <chrono>
#include <limits>

#include "core.hpp"
#include "dense.hpp"
#include "denoiser.hpp"
#include "evaluation.hpp"
#include "fbp.hpp"
#include "mbir.hpp"
#include "physics.hpp"
#include "projector.hpp"
#include "training.hpp"

namespace bcdnet {

/// A trained reconstruction network: one autoencoder per layer plus the
/// shared image-update settings. Layer l denoises the current image into
/// the prior z, then the weighted data-fit problem with that prior is
/// solved approximately, warm-started from the current image.
struct BcdNetModel {
  std::vector<AutoencoderParams> layers;
  double beta = 1.0;
  SolverConfig solver;
};

inline void validate(const BcdNetModel& model) {
  require(!model.layers.empty(), "model: needs at least one layer");
  for (const AutoencoderParams& p : model.layers) validate(p);
  require(model.beta > 0.0, "model: beta must be positive");
  require(model.solver.iterations >= 0, "model: solver iterations must be >= 0");
}

struct LayerRecord {
  int layer = 0;            // 1-based
  double rmse_hu = std::numeric_limits<double>::quiet_NaN();  // NaN when no truth given
  double objective = 0.0;   // F at the layer output, against this layer's prior
  double step_norm = 0.0;   // |x_l - x_{l-1}|
  double epsilon_hat = 0.0; // probed expansion excess vs the previous layer
  double seconds = 0.0;
  long projector_calls = 0;
};

struct LayerTrace {
  std::vector<LayerRecord> rows;
  long majorizer_projector_calls = 0;
};

inline std::vector<double> step_norm_series(const LayerTrace& trace) {
  std::vector<double> series;
  series.reserve(trace.rows.size());
  for (const LayerRecord& r : trace.rows) series.push_back(r.step_norm);
  return series;
}

enum class InitMethod { fbp, zero, wls };

/// Starting image for the layered reconstruction: filtered backprojection,
/// zeros, or a few unregularized weighted-least-squares descent steps
/// (identity weights unless given).
inline Image init_image(const Sinogram& y, const Geometry& g, InitMethod method,
                        const StatWeights* weights = nullptr) {
  validate(g);
  require_match(g, y, "init_image");
  switch (method) {
    case InitMethod::zero:
      return Image(g.image_width, g.image_height, g.pixel_size);
    case InitMethod::fbp:
      return fbp(y, g);
    case InitMethod::wls: {
      StatWeights w = weights ? *weights : StatWeights(g.n_detectors, g.n_views, 1.0);
      MbirProblem prob;
      prob.y = y;
      prob.weights = std::move(w);
      prob.z = Image(g.image_width, g.image_height, g.pixel_size);
      prob.geom = g;
      // Vanishing pull toward z = 0 keeps the subproblem well posed while
      // leaving the data term in charge.
      MajorizerDiag m = build_majorizer(g, prob.weights, 1.0);
      double top = 0.0;
      for (double d : m.diag) top = std::max(top, d - 1.0);
      prob.beta = 1e-8 * std::max(1.0, top);
      for (double& d : m.diag) d += prob.beta - 1.0;
      SolverConfig cfg;
      cfg.iterations = 20;
      cfg.variant = SolverVariant::pgm;
      return apgm_solve(prob, prob.z, m, cfg).image;
    }
  }
  throw validation_error("init_image: unknown method");
}

struct ReconstructOptions {
  const Image* truth = nullptr;  // enables the rmse_hu trace column
  double mu_water = 0.02;        // mm^-1
  int epsilon_probes = 4;
  std::uint64_t probe_seed = 0x626364ULL;
};

struct ReconstructResult {
  Image image;
  LayerTrace trace;
};

namespace detail {

/// Probe pairs for the expansion estimate, drawn from the images the layers
/// actually saw. Indices are sampled with replacement, so identical pairs
/// occur and keep the estimate honest at zero for frozen layers.
inline std::vector<std::pair<Image, Image>> probe_pairs_from(const std::vector<Image>& states,
                                                             int count, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, states.size() - 1);
  std::vector<std::pair<Image, Image>> pairs;
  pairs.reserve(count);
  for (int i = 0; i < count; ++i) pairs.emplace_back(states[pick(rng)], states[pick(rng)]);
  return pairs;
}

}  // namespace detail

/// Runs the layered reconstruction from x_init: for each layer, denoise the
/// current image, solve the weighted data-fit problem pulled toward that
/// denoised prior, and record per-layer diagnostics.
inline ReconstructResult reconstruct(const Sinogram& y, const StatWeights& w, const Geometry& g,
                                     const BcdNetModel& model, const Image& x_init,
                                     const ReconstructOptions& opts = {}) {
  validate(model);
  validate(g);
  require_match(g, y, "reconstruct (measurements)");
  require_match(g, w, "reconstruct (weights)");
  require_match(g, x_init, "reconstruct");
  require(opts.epsilon_probes >= 1, "reconstruct: epsilon probe count must be >= 1");
  if (opts.truth) require_match(g, *opts.truth, "reconstruct (truth)");

  ReconstructResult result;
  const ProjectorCounters at_start = projector_counters();
  const MajorizerDiag majorizer = build_majorizer(g, w, model.beta);
  result.trace.majorizer_projector_calls =
      (projector_counters().forward - at_start.forward) +
      (projector_counters().back - at_start.back);

  std::vector<Image> states;
  states.push_back(x_init);
  Image x = x_init;
  const Roi roi = opts.truth ? full_roi(g.image_width, g.image_height) : Roi{};

  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto clock_start = std::chrono::steady_clock::now();
    const ProjectorCounters before = projector_counters();

    MbirProblem prob;
    prob.y = y;
    prob.weights = w;
    prob.z = denoise(x, model.layers[l]);
    prob.beta = model.beta;
    prob.geom = g;
    SolveResult solved = apgm_solve(prob, x, majorizer, model.solver);

    LayerRecord rec;
    rec.layer = static_cast<int>(l) + 1;
    rec.objective = objective(solved.image, prob);
    double step = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) step += sq(solved.image.values[i] - x.values[i]);
    rec.step_norm = std::sqrt(step);
    if (l > 0) {
      const auto pairs = detail::probe_pairs_from(states, opts.epsilon_probes,
                                                  derive_seed(opts.probe_seed, l));
      rec.epsilon_hat = estimate_epsilon(model.layers[l - 1], model.layers[l], pairs);
    }
    if (opts.truth) rec.rmse_hu = rmse_hu(solved.image, *opts.truth, roi, opts.mu_water);
    const ProjectorCounters after = projector_counters();
    rec.projector_calls = (after.forward - before.forward) + (after.back - before.back);
    rec.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();

    x = std::move(solved.image);
    states.push_back(x);
    result.trace.rows.push_back(std::move(rec));
  }
  result.image = std::move(x);
  return result;
}

/// Everything needed to fit a network: a shared geometry and, per training
/// image, the truth, its measured sinogram, the statistical weights, and
/// the starting image.
struct TrainingSet {
  Geometry geom;
  std::vector<Image> truths;
  std::vector<Sinogram> measurements;
  std::vector<StatWeights> weights;
  std::vector<Image> inits;
};

inline void validate(const TrainingSet& ts) {
  validate(ts.geom);
  const std::size_t n = ts.truths.size();
  require(n >= 1, "training set: needs at least one image");
  require(ts.measurements.size() == n && ts.weights.size() == n && ts.inits.size() == n,
          "training set: per-image lists must have equal length");
  for (std::size_t i = 0; i < n; ++i) {
    require_match(ts.geom, ts.truths[i], "training set (truth)");
    require_match(ts.geom, ts.measurements[i], "training set (measurements)");
    require_match(ts.geom, ts.weights[i], "training set (weights)");
    require_match(ts.geom, ts.inits[i], "training set (init)");
  }
}

struct TrainedBcdNet {
  BcdNetModel model;
  std::vector<double> layer_initial_losses;  // patch loss at each layer's init
  std::vector<double> layer_losses;          // patch loss after each layer's training
  std::vector<double> layer_rmse_hu;         // mean training RMSE after each layer's update
};

/// Greedy layer-by-layer fit: at each layer, train an autoencoder to map
/// the current reconstructions toward the truths (on paired patches), then
/// advance every training image through that layer's update. Layer seeds
/// are derived from cfg.seed, so the whole fit is deterministic.
inline TrainedBcdNet train_bcdnet(const TrainingSet& ts, double beta, const SolverConfig& solver,
                                  const TrainConfig& cfg, int n_layers, int filter_count,
                                  int filter_side, int patch_stride = 1, double mu_water = 0.02) {
  validate(ts);
  require(n_layers >= 1, "train_bcdnet: need at least one layer");
  require(beta > 0.0, "train_bcdnet: beta must be positive");

  const std::size_t n_images = ts.truths.size();
  std::vector<MajorizerDiag> majorizers;
  majorizers.reserve(n_images);
  for (std::size_t i = 0; i < n_images; ++i)
    majorizers.push_back(build_majorizer(ts.geom, ts.weights[i], beta));

  const PatchMatrix target = extract_patches(ts.truths, filter_side, patch_stride, true);
  const Roi roi = full_roi(ts.geom.image_width, ts.geom.image_height);

  TrainedBcdNet out;
  out.model.beta = beta;
  out.model.solver = solver;
  std::vector<Image> states = ts.inits;

  for (int l = 0; l < n_layers; ++l) {
    const PatchMatrix input = extract_patches(states, filter_side, patch_stride, true);
    TrainConfig layer_cfg = cfg;
    layer_cfg.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(l));
    TrainLayerResult trained =
        train_layer(target, input, filter_count, filter_side, layer_cfg);
    out.layer_initial_losses.push_back(trained.initial_loss);
    out.layer_losses.push_back(trained.final_loss);

    double rmse_sum = 0.0;
    for (std::size_t i = 0; i < n_images; ++i) {
      MbirProblem prob;
      prob.y = ts.measurements[i];
      prob.weights = ts.weights[i];
      prob.z = denoise(states[i], trained.params);
      prob.beta = beta;
      prob.geom = ts.geom;
      states[i] = apgm_solve(prob, states[i], majorizers[i], solver).image;
      rmse_sum += rmse_hu(states[i], ts.truths[i], roi, mu_water);
    }
    out.layer_rmse_hu.push_back(rmse_sum / n_images);
    out.model.layers.push_back(std::move(trained.params));
  }
  return out;
}

/// Evidence that the layered iteration will settle: the weighted data fit
/// must have curvature everywhere (checked exactly by a dense eigenvalue
/// for small images, otherwise probed with Rayleigh quotients) and the
/// per-layer expansion excesses should be summable. This is a diagnostic,
/// not a proof; the probe-based branch can only find violations, not
/// certify their absence.
struct PreconditionReport {
  bool dense_check = false;
  double gram_min_eig = std::numeric_limits<double>::quiet_NaN();  // dense path only
  std::vector<double> rayleigh;                                    // probe path only
  bool gram_positive = false;
  std::vector<double> epsilon_hats;  // one per layer transition
  double epsilon_sum = 0.0;
  bool ok = false;
};

inline PreconditionReport check_convergence_preconditions(const BcdNetModel& model,
                                                          const Geometry& g,
                                                          const StatWeights& w,
                                                          int probe_count = 8,
                                                          std::uint64_t seed = 0x707265ULL) {
  validate(model);
  validate(g);
  require_match(g, w, "check_convergence_preconditions");
  require(probe_count >= 1, "check_convergence_preconditions: probe count must be >= 1");

  PreconditionReport report;
  if (g.n_pixels() <= 256) {
    report.dense_check = true;
    report.gram_min_eig = gram_min_eigenvalue(g, w);
    report.gram_positive = report.gram_min_eig > 0.0;
  } else {
    Rng rng(seed);
    report.gram_positive = true;
    for (int i = 0; i < probe_count; ++i) {
      const Image probe = gaussian_image(g.image_width, g.image_height, g.pixel_size, 1.0, rng);
      const Sinogram ap = forward_project(probe, g);
      double num = 0.0;
      for (std::size_t m = 0; m < ap.size(); ++m) num += w.values[m] * sq(ap.values[m]);
      const double den = dot(probe.values, probe.values);
      const double quotient = den > 0.0 ? num / den : 0.0;
      report.rayleigh.push_back(quotient);
      if (!(quotient > 0.0)) report.gram_positive = false;
    }
  }

  for (std::size_t l = 1; l < model.layers.size(); ++l) {
    const double eps =
        estimate_epsilon(model.layers[l - 1], model.layers[l], g.image_width, g.image_height,
                         probe_count, derive_seed(seed, l));
    report.epsilon_hats.push_back(eps);
    report.epsilon_sum += eps;
  }
  report.ok = report.gram_positive && std::isfinite(report.epsilon_sum);
  return report;
}

}  // namespace bcdnet
