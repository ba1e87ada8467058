// Command-line driver for the layered CT reconstruction library. Each
// subcommand reads one key = value experiment config and works inside a
// single output directory, so a full run is:
//
//   bcdnet phantom     --config exp.cfg      geometry, truths, manifest
//   bcdnet simulate    --config exp.cfg      counts, sinograms, weights, inits
//   bcdnet train       --config exp.cfg      model.bcdm, training_loss.csv
//   bcdnet reconstruct --config exp.cfg      recon_*.bcdn, trace_*.csv
//   bcdnet evaluate    --config exp.cfg      metrics.csv
//   bcdnet diagnose    --config exp.cfg      diagnostics.csv
//
// Exit codes: 0 on success, 1 for bad inputs or configs, 2 for OS-level
// file trouble.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bcdnet/bcdnet.hpp"
#include "bcdnet/config.hpp"
#include "bcdnet/io.hpp"

namespace fs = std::filesystem;
using namespace bcdnet;

namespace {

struct ManifestEntry {
  std::string role;  // "train" or "test"
  std::string stem;
};

std::string out_path(const ExperimentConfig& cfg, const std::string& name) {
  return (fs::path(cfg.out_dir) / name).string();
}

std::string stem_name(const std::string& role, int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%03d", role.c_str(), index);
  return buf;
}

void save_manifest(const ExperimentConfig& cfg, const std::vector<ManifestEntry>& entries) {
  std::ofstream os(out_path(cfg, "manifest.txt"));
  if (!os) throw io_error(out_path(cfg, "manifest.txt") + ": cannot open for writing");
  for (const ManifestEntry& e : entries) os << e.role << " " << e.stem << "\n";
  os.flush();
  if (!os) throw io_error(out_path(cfg, "manifest.txt") + ": write failed");
}

std::vector<ManifestEntry> load_manifest(const ExperimentConfig& cfg) {
  const std::string path = out_path(cfg, "manifest.txt");
  std::ifstream is(path);
  if (!is) throw io_error(path + ": cannot open for reading (run the phantom step first?)");
  std::vector<ManifestEntry> entries;
  std::string role, stem;
  while (is >> role >> stem) {
    if (role != "train" && role != "test")
      throw validation_error(path + ": unknown manifest role '" + role + "'");
    entries.push_back({role, stem});
  }
  if (entries.empty()) throw validation_error(path + ": manifest lists no images");
  return entries;
}

std::vector<std::string> stems_with_role(const std::vector<ManifestEntry>& entries,
                                         const std::string& role) {
  std::vector<std::string> out;
  for (const ManifestEntry& e : entries)
    if (e.role == role) out.push_back(e.stem);
  return out;
}

void apply_runtime_options(ExperimentConfig& cfg) {
  if (cfg.deterministic) cfg.threads = 1;
  set_thread_count(cfg.threads);
}

// ---------------------------------------------------------------------------

int cmd_phantom(const ExperimentConfig& cfg) {
  require(cfg.n_train + cfg.n_test >= 1, "phantom: n_train + n_test must be >= 1");
  fs::create_directories(cfg.out_dir);
  save_geometry(out_path(cfg, "geometry.txt"), cfg.geom);

  std::vector<ManifestEntry> entries;
  int global = 0;
  for (const std::string& role : {std::string("train"), std::string("test")}) {
    const int count = role == "train" ? cfg.n_train : cfg.n_test;
    for (int i = 0; i < count; ++i, ++global) {
      const PhantomSpec spec = random_phantom_spec(
          cfg.geom.image_width, cfg.geom.image_height, cfg.geom.pixel_size, cfg.n_ellipses,
          derive_seed(cfg.phantom_seed, static_cast<std::uint64_t>(global)), cfg.mu_water);
      const std::string stem = stem_name(role, i);
      save_phantom_spec(out_path(cfg, stem + ".spec.txt"), spec);
      save_image(out_path(cfg, stem + ".truth.bcdn"), generate_phantom(spec));
      entries.push_back({role, stem});
    }
  }
  save_manifest(cfg, entries);
  std::cout << "wrote " << entries.size() << " phantoms to " << cfg.out_dir << "\n";
  return 0;
}

int cmd_simulate(const ExperimentConfig& cfg) {
  const std::vector<ManifestEntry> entries = load_manifest(cfg);
  const Geometry geom = load_geometry(out_path(cfg, "geometry.txt"));
  int global = 0;
  for (const ManifestEntry& e : entries) {
    const Image truth = load_image(out_path(cfg, e.stem + ".truth.bcdn"), geom.pixel_size);
    const SimulatedScan scan = simulate_scan(
        truth, geom, cfg.incident_photons, cfg.readout_variance,
        derive_seed(cfg.physics_seed, static_cast<std::uint64_t>(global)), cfg.noiseless);
    save_ray_grid(out_path(cfg, e.stem + ".counts.bcdn"), scan.counts);
    save_sinogram(out_path(cfg, e.stem + ".sino.bcdn"), scan.postlog);
    save_ray_grid(out_path(cfg, e.stem + ".weights.bcdn"), scan.weights);
    const Image init = init_image(scan.postlog, geom, cfg.init, &scan.weights);
    save_image(out_path(cfg, e.stem + ".init.bcdn"), init);
    ++global;
  }
  std::cout << "simulated " << entries.size() << " scans in " << cfg.out_dir << "\n";
  return 0;
}

int cmd_train(const ExperimentConfig& cfg) {
  const std::vector<std::string> stems = stems_with_role(load_manifest(cfg), "train");
  require(!stems.empty(), "train: manifest has no training images");

  TrainingSet ts;
  ts.geom = load_geometry(out_path(cfg, "geometry.txt"));
  for (const std::string& stem : stems) {
    ts.truths.push_back(load_image(out_path(cfg, stem + ".truth.bcdn"), ts.geom.pixel_size));
    ts.measurements.push_back(load_sinogram(out_path(cfg, stem + ".sino.bcdn")));
    ts.weights.push_back(load_ray_grid<WeightsTag>(out_path(cfg, stem + ".weights.bcdn")));
    ts.inits.push_back(load_image(out_path(cfg, stem + ".init.bcdn"), ts.geom.pixel_size));
  }

  const TrainedBcdNet fit =
      train_bcdnet(ts, cfg.beta, cfg.solver, cfg.train, cfg.layers, cfg.filter_count,
                   cfg.filter_side, cfg.patch_stride, cfg.mu_water);
  save_model(cfg.model_file(), fit.model);

  {
    std::ofstream os(out_path(cfg, "training_loss.csv"));
    if (!os) throw io_error(out_path(cfg, "training_loss.csv") + ": cannot open for writing");
    os << "layer,initial_loss,final_loss,mean_train_rmse_hu\n";
    for (std::size_t l = 0; l < fit.layer_losses.size(); ++l) {
      char line[160];
      std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%.17g\n", l + 1,
                    fit.layer_initial_losses[l], fit.layer_losses[l], fit.layer_rmse_hu[l]);
      os << line;
    }
    os.flush();
    if (!os) throw io_error(out_path(cfg, "training_loss.csv") + ": write failed");
  }

  for (std::size_t l = 0; l < fit.layer_losses.size(); ++l)
    require(fit.layer_losses[l] <= fit.layer_initial_losses[l],
            "train: layer " + std::to_string(l + 1) + " finished worse than it started");
  std::cout << "trained " << cfg.layers << " layers on " << stems.size() << " images -> "
            << cfg.model_file() << "\n";
  return 0;
}

int cmd_reconstruct(const ExperimentConfig& cfg, std::vector<std::string> stems) {
  const std::vector<ManifestEntry> entries = load_manifest(cfg);
  if (stems.empty()) stems = stems_with_role(entries, "test");
  if (stems.empty()) stems = stems_with_role(entries, "train");
  require(!stems.empty(), "reconstruct: no stems to reconstruct");

  const Geometry geom = load_geometry(out_path(cfg, "geometry.txt"));
  BcdNetModel model = load_model(cfg.model_file());
  model.solver = cfg.solver;  // model files carry weights, not solver settings

  for (const std::string& stem : stems) {
    const Sinogram y = load_sinogram(out_path(cfg, stem + ".sino.bcdn"));
    const StatWeights w = load_ray_grid<WeightsTag>(out_path(cfg, stem + ".weights.bcdn"));
    const Image x0 = load_image(out_path(cfg, stem + ".init.bcdn"), geom.pixel_size);

    ReconstructOptions opts;
    opts.mu_water = cfg.mu_water;
    opts.epsilon_probes = cfg.probe_count;
    opts.probe_seed = cfg.probe_seed;
    Image truth;
    const std::string truth_path = out_path(cfg, stem + ".truth.bcdn");
    if (fs::exists(truth_path)) {
      truth = load_image(truth_path, geom.pixel_size);
      opts.truth = &truth;
    }

    const ReconstructResult res = reconstruct(y, w, geom, model, x0, opts);
    save_image(out_path(cfg, "recon_" + stem + ".bcdn"), res.image);
    write_layer_trace_csv(out_path(cfg, "trace_" + stem + ".csv"), res.trace,
                          cfg.deterministic);
  }
  std::cout << "reconstructed " << stems.size() << " images with "
            << model.layers.size() << " layers\n";
  return 0;
}

int cmd_evaluate(const ExperimentConfig& cfg, std::vector<std::string> stems) {
  const std::vector<ManifestEntry> entries = load_manifest(cfg);
  if (stems.empty()) stems = stems_with_role(entries, "test");
  require(!stems.empty(), "evaluate: no stems to evaluate");

  const Geometry geom = load_geometry(out_path(cfg, "geometry.txt"));
  const Roi roi = full_roi(geom.image_width, geom.image_height);
  const std::string metrics = out_path(cfg, "metrics.csv");

  for (const std::string& stem : stems) {
    const Image truth = load_image(out_path(cfg, stem + ".truth.bcdn"), geom.pixel_size);
    const Image init = load_image(out_path(cfg, stem + ".init.bcdn"), geom.pixel_size);
    const Image recon = load_image(out_path(cfg, "recon_" + stem + ".bcdn"), geom.pixel_size);
    const double rmse_init = rmse_hu(init, truth, roi, cfg.mu_water);
    const double rmse_recon = rmse_hu(recon, truth, roi, cfg.mu_water);
    append_metrics_csv(metrics, stem + ".init", rmse_init);
    append_metrics_csv(metrics, stem, rmse_recon);
    std::cout << stem << ": init " << rmse_init << " HU, recon " << rmse_recon << " HU\n";
  }
  return 0;
}

int cmd_diagnose(const ExperimentConfig& cfg, const std::string& weights_path) {
  const BcdNetModel model = load_model(cfg.model_file());
  const Geometry& g = cfg.geom;
  StatWeights w(g.n_detectors, g.n_views, 1.0);
  if (!weights_path.empty()) w = load_ray_grid<WeightsTag>(weights_path);

  const PreconditionReport rep =
      check_convergence_preconditions(model, g, w, cfg.probe_count, cfg.probe_seed);

  fs::create_directories(cfg.out_dir);
  const std::string path = out_path(cfg, "diagnostics.csv");
  std::ofstream os(path);
  if (!os) throw io_error(path + ": cannot open for writing");
  os << "metric,index,value\n";
  auto row = [&os](const char* metric, std::size_t index, double value) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s,%zu,%.17g\n", metric, index, value);
    os << buf;
  };
  for (std::size_t l = 0; l < model.layers.size(); ++l)
    row("lipschitz", l + 1,
        estimate_lipschitz(model.layers[l], g.image_width, g.image_height, cfg.probe_count,
                           derive_seed(cfg.probe_seed, 0x4c50 + l)));
  for (std::size_t l = 0; l < rep.epsilon_hats.size(); ++l)
    row("epsilon_hat", l + 1, rep.epsilon_hats[l]);
  row("epsilon_sum", 0, rep.epsilon_sum);
  if (rep.dense_check)
    row("gram_min_eig", 0, rep.gram_min_eig);
  else
    for (std::size_t i = 0; i < rep.rayleigh.size(); ++i) row("rayleigh", i + 1, rep.rayleigh[i]);
  row("preconditions_ok", 0, rep.ok ? 1.0 : 0.0);
  os.flush();
  if (!os) throw io_error(path + ": write failed");

  std::cout << "preconditions " << (rep.ok ? "hold" : "FAIL") << "; wrote " << path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Layered CT reconstruction: phantoms, scans, training, and analysis"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand name

  std::string config_path;
  std::string out_dir_override;
  int threads_override = 0;
  bool deterministic = false;
  app.add_option("-c,--config", config_path, "experiment config (key = value lines)")
      ->required();
  app.add_option("--out-dir", out_dir_override, "override the config's output directory")
      ->envname("BCDNET_OUT_DIR");
  app.add_option("--threads", threads_override, "override the config's worker count")
      ->envname("BCDNET_THREADS");
  app.add_flag("--deterministic", deterministic,
               "single worker, timing columns zeroed; output is byte-reproducible");

  CLI::App* phantom = app.add_subcommand("phantom", "generate truth images and a manifest");
  CLI::App* simulate = app.add_subcommand("simulate", "simulate low-dose scans of the truths");
  CLI::App* train = app.add_subcommand("train", "fit the layered denoising network");
  CLI::App* reconstruct_cmd =
      app.add_subcommand("reconstruct", "run the trained network on measured data");
  CLI::App* evaluate = app.add_subcommand("evaluate", "score reconstructions against truths");
  CLI::App* diagnose = app.add_subcommand("diagnose", "probe convergence preconditions");

  std::vector<std::string> stems;
  reconstruct_cmd->add_option("--stems", stems, "image stems (default: manifest test entries)")
      ->delimiter(',');
  evaluate->add_option("--stems", stems, "image stems (default: manifest test entries)")
      ->delimiter(',');
  std::string weights_path;
  diagnose->add_option("--weights", weights_path,
                       "statistical weights for the curvature check (default: uniform)");

  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentConfig cfg = load_experiment_config(config_path);
    if (!out_dir_override.empty()) cfg.out_dir = out_dir_override;
    if (threads_override > 0) cfg.threads = threads_override;
    if (deterministic) cfg.deterministic = true;
    apply_runtime_options(cfg);

    if (*phantom) return cmd_phantom(cfg);
    if (*simulate) return cmd_simulate(cfg);
    if (*train) return cmd_train(cfg);
    if (*reconstruct_cmd) return cmd_reconstruct(cfg, stems);
    if (*evaluate) return cmd_evaluate(cfg, stems);
    if (*diagnose) return cmd_diagnose(cfg, weights_path);
  } catch (const io_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const validation_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
