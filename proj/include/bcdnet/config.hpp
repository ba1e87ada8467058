#pragma once

#include "core.hpp"
#include "geometry.hpp"
#include "io.hpp"
#include "mbir.hpp"
#include "pipeline.hpp"
#include "training.hpp"

namespace bcdnet {

inline SolverVariant parse_solver_variant(const std::string& name) {
  if (name == "apgm") return SolverVariant::apgm;
  if (name == "pgm") return SolverVariant::pgm;
  throw validation_error("unknown solver variant '" + name + "' (expected apgm or pgm)");
}

inline Optimizer parse_optimizer(const std::string& name) {
  if (name == "adam") return Optimizer::adam;
  if (name == "sgd") return Optimizer::sgd;
  throw validation_error("unknown optimizer '" + name + "' (expected adam or sgd)");
}

inline InitMethod parse_init_method(const std::string& name) {
  if (name == "fbp") return InitMethod::fbp;
  if (name == "zero") return InitMethod::zero;
  if (name == "wls") return InitMethod::wls;
  throw validation_error("unknown init method '" + name + "' (expected fbp, zero, or wls)");
}

/// Flat key = value experiment description shared by all subcommands; each
/// command reads the sections it needs. Units are spelled out in the key
/// names. Paths are resolved relative to the working directory, and the
/// per-experiment files live under out_dir by convention.
struct ExperimentConfig {
  std::string out_dir = "out";
  bool deterministic = false;
  int threads = 1;

  Geometry geom;

  // phantom generation
  int n_train = 2;
  int n_test = 1;
  int n_ellipses = 5;
  std::uint64_t phantom_seed = 1;
  double mu_water = 0.02;  // mm^-1, background attenuation and HU reference

  // measurement simulation
  double incident_photons = 1e4;
  double readout_variance = 25.0;
  std::uint64_t physics_seed = 2;
  bool noiseless = false;

  // network shape and image update
  int layers = 10;
  int filter_count = 16;
  int filter_side = 3;
  int patch_stride = 1;
  double beta = 1.0;
  SolverConfig solver;
  InitMethod init = InitMethod::fbp;
  TrainConfig train;

  // diagnostics
  int probe_count = 8;
  std::uint64_t probe_seed = 3;

  std::string model_path;  // defaults to <out_dir>/model.bcdm

  std::string model_file() const {
    return model_path.empty() ? out_dir + "/model.bcdm" : model_path;
  }
};

inline ExperimentConfig parse_experiment_config(const KeyValues& kv) {
  ExperimentConfig cfg;
  cfg.out_dir = kv.get_or("out_dir", cfg.out_dir);
  cfg.deterministic = kv.get_bool_or("deterministic", cfg.deterministic);
  cfg.threads = static_cast<int>(kv.get_int_or("threads", cfg.threads));

  cfg.geom.image_width = static_cast<int>(kv.get_int("geometry.image_width"));
  cfg.geom.image_height = static_cast<int>(kv.get_int("geometry.image_height"));
  cfg.geom.pixel_size = kv.get_double("geometry.pixel_size_mm");
  cfg.geom.n_detectors = static_cast<int>(kv.get_int("geometry.n_detectors"));
  cfg.geom.detector_spacing = kv.get_double("geometry.detector_spacing_mm");
  cfg.geom.n_views = static_cast<int>(kv.get_int("geometry.n_views"));
  if (kv.has("geometry.angles_deg")) {
    for (double deg : kv.get_double_list("geometry.angles_deg"))
      cfg.geom.angles.push_back(deg * std::numbers::pi / 180.0);
  } else {
    cfg.geom.angles = uniform_angles(cfg.geom.n_views);
  }
  validate(cfg.geom);

  cfg.n_train = static_cast<int>(kv.get_int_or("phantom.n_train", cfg.n_train));
  cfg.n_test = static_cast<int>(kv.get_int_or("phantom.n_test", cfg.n_test));
  cfg.n_ellipses = static_cast<int>(kv.get_int_or("phantom.n_ellipses", cfg.n_ellipses));
  cfg.phantom_seed = static_cast<std::uint64_t>(kv.get_int_or("phantom.seed", 1));
  cfg.mu_water = kv.get_double_or("phantom.mu_water_inv_mm", cfg.mu_water);

  cfg.incident_photons = kv.get_double_or("physics.incident_photons", cfg.incident_photons);
  cfg.readout_variance = kv.get_double_or("physics.readout_variance", cfg.readout_variance);
  cfg.physics_seed = static_cast<std::uint64_t>(kv.get_int_or("physics.seed", 2));
  cfg.noiseless = kv.get_bool_or("physics.noiseless", cfg.noiseless);

  cfg.layers = static_cast<int>(kv.get_int_or("model.layers", cfg.layers));
  cfg.filter_count = static_cast<int>(kv.get_int_or("model.filter_count", cfg.filter_count));
  cfg.filter_side = static_cast<int>(kv.get_int_or("model.filter_side", cfg.filter_side));
  cfg.patch_stride = static_cast<int>(kv.get_int_or("model.patch_stride", cfg.patch_stride));
  cfg.beta = kv.get_double_or("model.beta", cfg.beta);
  cfg.solver.iterations =
      static_cast<int>(kv.get_int_or("solver.iterations", cfg.solver.iterations));
  cfg.solver.variant = parse_solver_variant(kv.get_or("solver.variant", "apgm"));
  cfg.solver.record_trace = kv.get_bool_or("solver.record_trace", false);
  cfg.init = parse_init_method(kv.get_or("model.init", "fbp"));

  cfg.train.batch_size = static_cast<int>(kv.get_int_or("train.batch_size", cfg.train.batch_size));
  cfg.train.epochs = static_cast<int>(kv.get_int_or("train.epochs", cfg.train.epochs));
  cfg.train.lr_filters = kv.get_double_or("train.lr_filters", cfg.train.lr_filters);
  cfg.train.lr_thresholds = kv.get_double_or("train.lr_thresholds", cfg.train.lr_thresholds);
  cfg.train.lr_decay = kv.get_double_or("train.lr_decay", cfg.train.lr_decay);
  cfg.train.decay_every = static_cast<int>(kv.get_int_or("train.decay_every", cfg.train.decay_every));
  cfg.train.seed = static_cast<std::uint64_t>(kv.get_int_or("train.seed", 0));
  cfg.train.optimizer = parse_optimizer(kv.get_or("train.optimizer", "adam"));
  cfg.train.filter_init_scale =
      kv.get_double_or("train.filter_init_scale", cfg.train.filter_init_scale);
  cfg.train.threshold_init_log =
      kv.get_double_or("train.threshold_init_log", cfg.train.threshold_init_log);

  cfg.probe_count = static_cast<int>(kv.get_int_or("diagnose.probes", cfg.probe_count));
  cfg.probe_seed = static_cast<std::uint64_t>(kv.get_int_or("diagnose.seed", 3));
  cfg.model_path = kv.get_or("model.path", "");

  require(cfg.threads >= 1, "config: threads must be >= 1");
  require(cfg.n_train >= 0 && cfg.n_test >= 0, "config: phantom counts must be >= 0");
  require(cfg.mu_water > 0.0, "config: phantom.mu_water_inv_mm must be positive");
  require(cfg.beta > 0.0, "config: model.beta must be positive");
  require(cfg.layers >= 1, "config: model.layers must be >= 1");
  require(cfg.solver.iterations >= 0, "config: solver.iterations must be >= 0");
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  return parse_experiment_config(load_key_values(path));
}

}  // namespace bcdnet
