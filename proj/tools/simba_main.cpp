// simba: simulate, reconstruct and evaluate free-running radial acquisitions.

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "simba/config.hpp"
#include "simba/error.hpp"
#include "simba/io.hpp"
#include "simba/parallel.hpp"
#include "simba/pipeline.hpp"

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kFormat = 3, kPipeline = 4, kMetric = 5 };

struct GlobalOptions {
  std::string config_file;
  std::vector<std::string> overrides;
  int threads = -1;
  std::optional<bool> deterministic;
  std::optional<std::uint64_t> seed;
  std::optional<double> noise;
  std::string output_dir;
  bool lenient = false;
  bool png = false;
  double window = 0.0;
  double level = 0.0;
};

simba::RunConfig build_config(const GlobalOptions& g) {
  simba::RunConfig cfg;
  if (!g.config_file.empty()) cfg = simba::load_config(g.config_file);
  for (const auto& kv : g.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw simba::ConfigError("--set expects key=value, got '" + kv + "'");
    simba::set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (g.deterministic) cfg.gridding.deterministic = *g.deterministic;
  if (g.seed) cfg.scene.seed = *g.seed;
  if (g.noise) cfg.scene.noise_sigma = *g.noise;
  if (!g.output_dir.empty()) cfg.output_dir = g.output_dir;
  cfg.validate();

  int threads = g.threads >= 0 ? g.threads : simba::thread_count_from_env();
  simba::set_thread_count(threads);
  return cfg;
}

void print_timings(const std::vector<simba::StageTiming>& timings) {
  double total = 0.0;
  for (const auto& t : timings) {
    std::cout << "  time " << std::left << std::setw(16) << t.stage << std::fixed << std::setprecision(2)
              << t.seconds << " s\n";
    total += t.seconds;
  }
  std::cout << "  time " << std::left << std::setw(16) << "total" << std::fixed << std::setprecision(2) << total
            << " s\n";
}

int cmd_simulate(const simba::RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto traj = simba::make_trajectory(cfg);
  const auto acq = simba::simulate(cfg, traj);
  std::filesystem::create_directories(cfg.output_dir);
  const auto kspace_path = cfg.output_dir / "kspace.bin";
  const auto bytes = simba::encode_kspace(acq.kspace, acq.labels);
  simba::write_file(kspace_path, bytes);
  simba::write_file(cfg.output_dir / "labels.bin", simba::encode_labels(acq.labels));
  simba::write_file(cfg.output_dir / "trajectory.bin", simba::encode_trajectory(traj));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::cout << "simulated " << traj.n_spokes() << " spokes (" << traj.n_interleaves << " interleaves x "
            << traj.n_readouts << " readouts x " << traj.n_samples << " samples), " << acq.kspace.n_coils
            << " coils\n";
  std::cout << "  scan duration " << std::fixed << std::setprecision(2) << traj.timestamp(traj.n_spokes() - 1) + traj.tr
            << " s, " << acq.labels.r_wave_times.size() << " R-waves, noise sigma " << std::setprecision(4)
            << cfg.scene.noise_sigma << "\n";
  std::cout << "  wrote " << kspace_path.string() << " (" << bytes.size() << " bytes)\n";
  std::cout << "  time simulate " << std::setprecision(2) << secs << " s\n";
  return kOk;
}

int cmd_reconstruct(const simba::RunConfig& cfg_in, const std::string& kspace_path, const std::string& method,
                    const std::string& coils, bool export_reference, const GlobalOptions& g) {
  simba::RunConfig cfg = cfg_in;
  if (method == "simba") simba::set_config_value(cfg, "coil_ids", coils);
  cfg.validate();
  const auto file = simba::decode_kspace(simba::read_file(kspace_path));
  std::filesystem::create_directories(cfg.output_dir);

  simba::ReconOutput out;
  if (method == "alldata") {
    out = simba::reconstruct_alldata(file.kspace, cfg);
  } else {
    out = simba::reconstruct_simba(file.kspace, cfg);
    const auto& sel = *out.selection;
    simba::write_file(cfg.output_dir / "simba_clusters.csv",
                      simba::encode_cluster_report(out.reduced->data, sel, out.spokes.size(),
                                                   simba::imaging_spokes(simba::trajectory_for(file.kspace)).size()));
    if (export_reference) {
      simba::write_file(cfg.output_dir / "reference.csv", simba::encode_reference_csv(*out.reference));
      simba::write_file(cfg.output_dir / "reference.bin", simba::encode_reference_binary(*out.reference));
    }
    std::cout << "k* = " << sel.k_star << " (criteria";
    for (std::size_t i = 0; i < sel.k_values.size(); ++i) {
      std::cout << " k" << sel.k_values[i] << "=" << std::setprecision(4) << sel.criteria[i];
    }
    std::cout << ")\n";
    for (const auto& w : out.reduced->warnings) std::cerr << "warning: " << w << "\n";
  }
  const auto stem = cfg.output_dir / method;
  simba::write_volume(stem, out.volume, out.meta);
  if (g.png) simba::write_center_slices(stem, out.volume.voxels, g.window, g.level);

  std::cout << method << ": " << out.spokes.size() << " readouts, selected fraction " << std::fixed
            << std::setprecision(2) << 100.0 * out.selected_fraction << "% of imaging readouts\n";
  std::cout << "  wrote " << stem.string() << ".raw/.json\n";
  print_timings(out.timings);
  return kOk;
}

int cmd_metrics(const simba::RunConfig& cfg, const std::vector<std::string>& volumes, const std::string& labels_path,
                bool want_provenance, bool lenient) {
  std::optional<simba::GroundTruthLabels> labels;
  if (!labels_path.empty()) labels = simba::decode_labels(simba::read_file(labels_path));
  std::vector<simba::VolumeMetrics> ms;
  for (const auto& path : volumes) {
    const auto vf = simba::read_volume(path);
    std::string name = std::filesystem::path(path).stem().string();
    for (const auto& m : ms) {
      if (m.name == name) name += "_" + std::to_string(ms.size() + 1);
    }
    ms.push_back(simba::compute_metrics(name, vf, cfg, labels ? &*labels : nullptr, want_provenance));
  }
  std::filesystem::create_directories(cfg.output_dir);
  const auto text = simba::metrics_text(ms);
  simba::write_file(cfg.output_dir / "metrics.csv", simba::metrics_csv(ms));
  simba::write_file(cfg.output_dir / "metrics.txt", text);
  std::cout << text;
  bool failed = false;
  for (const auto& m : ms) failed = failed || !m.errors.empty();
  if (failed && !lenient) {
    std::cerr << "error: metric failures (rerun with --lenient to accept partial results)\n";
    return kMetric;
  }
  return kOk;
}

int cmd_report(const simba::RunConfig& cfg, const GlobalOptions& g) {
  const auto result = simba::run_experiment(cfg);
  simba::write_experiment(result, cfg, g.png);
  std::cout << result.report_text;
  std::cout << "alldata timing\n";
  print_timings(result.alldata.timings);
  std::cout << "simba timing\n";
  print_timings(result.simba.timings);
  std::cout << "wrote outputs to " << cfg.output_dir.string() << "\n";
  const bool failed = !result.alldata_metrics.errors.empty() || !result.simba_metrics.errors.empty();
  if (failed && !g.lenient) {
    std::cerr << "error: metric failures (rerun with --lenient to accept partial results)\n";
    return kMetric;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SIMBA: similarity-based clustering and gridding reconstruction of free-running 3D radial data"};
  app.require_subcommand(1);
  app.fallthrough();
  app.footer("Configuration keys (file: 'key = value', '#' comments; flags override the file):\n" +
             simba::describe_config_keys() +
             "\nExit codes: 0 success, 2 config error, 3 format error, 4 pipeline error, 5 metric failure.\n"
             "SIMBA_THREADS sets the worker count when --threads is not given.");

  GlobalOptions g;
  app.add_option("-c,--config", g.config_file, "Configuration file")->check(CLI::ExistingFile);
  app.add_option("--set", g.overrides, "Override a configuration key (key=value), repeatable");
  app.add_option("--threads", g.threads, "Worker thread cap (0 = runtime default)")->check(CLI::NonNegativeNumber);
  app.add_flag("--deterministic,!--no-deterministic", g.deterministic, "Fixed-order gridding reduction (default on)");
  app.add_option("--seed", g.seed, "Simulation and clustering seed");
  app.add_option("--noise", g.noise, "Noise sd per real/imaginary component");
  app.add_option("-o,--output", g.output_dir, "Output directory");
  app.add_flag("--lenient", g.lenient, "Exit 0 even if some metrics fail");
  app.add_flag("--png", g.png, "Also write PNG center slices");
  app.add_option("--window", g.window, "PNG window width (0 = full range)");
  app.add_option("--level", g.level, "PNG window center");

  auto* sim = app.add_subcommand("simulate", "Sample the moving phantom and write k-space, labels and trajectory");

  auto* rec = app.add_subcommand("reconstruct", "Reconstruct a k-space file with SIMBA or all data");
  std::string kspace_path;
  std::string method = "simba";
  std::string coils;
  bool export_reference = false;
  rec->add_option("kspace", kspace_path, "k-space file")->required()->check(CLI::ExistingFile);
  rec->add_option("-m,--method", method, "simba or alldata")->check(CLI::IsMember({"simba", "alldata"}));
  rec->add_option("--coils", coils, "Four comma-separated coil indices for the reference data (simba)");
  rec->add_flag("--export-reference", export_reference, "Write the reference matrix as CSV and binary");

  auto* met = app.add_subcommand("metrics", "Sharpness, contrast, SNR/CNR, uniformity and provenance of volumes");
  std::vector<std::string> volumes;
  std::string labels_path;
  bool no_provenance = false;
  met->add_option("volumes", volumes, "One or two volume stems (<stem>.raw + <stem>.json)")
      ->required()
      ->expected(1, 2);
  met->add_option("-l,--labels", labels_path, "Ground-truth labels file for provenance");
  met->add_flag("--no-provenance", no_provenance, "Skip the provenance report");

  auto* rep = app.add_subcommand("report", "End-to-end phantom experiment: simulate, both reconstructions, metrics");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    const auto cfg = build_config(g);
    if (*sim) return cmd_simulate(cfg);
    if (*rec) {
      if (method == "simba" && coils.empty()) throw simba::ConfigError("reconstruct --method simba requires --coils");
      return cmd_reconstruct(cfg, kspace_path, method, coils, export_reference, g);
    }
    if (*met) return cmd_metrics(cfg, volumes, labels_path, !no_provenance, g.lenient);
    if (*rep) return cmd_report(cfg, g);
  } catch (const simba::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const simba::FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kFormat;
  } catch (const simba::UndefinedResult& e) {
    std::cerr << "metric error: " << e.what() << "\n";
    return kMetric;
  } catch (const simba::FitFailure& e) {
    std::cerr << "metric error: " << e.what() << "\n";
    return kMetric;
  } catch (const std::exception& e) {
    std::cerr << "pipeline error: " << e.what() << "\n";
    return kPipeline;
  }
  return kOk;
}
