#include "simba/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "simba/error.hpp"

namespace simba {

namespace {

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - start_).count();
    start_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

VolumeMeta meta_for(const KSpaceData& kspace, const RunConfig& cfg) {
  VolumeMeta m;
  m.fov_mm = cfg.geometry.fov_mm;
  m.n_coils = kspace.n_coils;
  m.n_interleaves = kspace.n_interleaves;
  m.n_readouts = kspace.n_readouts;
  m.n_samples = kspace.n_samples;
  m.tr = kspace.tr;
  m.include_si = cfg.include_si;
  return m;
}

std::vector<std::size_t> all_spokes(const RadialTrajectory& traj, bool include_si) {
  if (!include_si) return imaging_spokes(traj);
  std::vector<std::size_t> out(traj.n_spokes());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = i;
  return out;
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

}  // namespace

RadialTrajectory make_trajectory(const RunConfig& cfg) {
  return generate_phyllotaxis(cfg.n_interleaves, cfg.n_readouts, cfg.n_samples, cfg.tr);
}

RadialTrajectory trajectory_for(const KSpaceData& kspace) {
  return generate_phyllotaxis(kspace.n_interleaves, kspace.n_readouts, kspace.n_samples, kspace.tr);
}

SimulatedAcquisition simulate(const RunConfig& cfg, const RadialTrajectory& traj) {
  auto acq = sample_kspace(cfg.scene, traj, cfg.geometry);
  return acq;
}

ReconOutput reconstruct_alldata(const KSpaceData& kspace, const RunConfig& cfg) {
  Stopwatch sw;
  ReconOutput out;
  const auto traj = trajectory_for(kspace);
  out.spokes = all_spokes(traj, cfg.include_si);
  out.volume = reconstruct(kspace, traj, out.spokes, cfg.gridding, cfg.geometry, "alldata", 0);
  out.timings.push_back({"gridding", sw.lap()});
  out.meta = meta_for(kspace, cfg);
  out.selected_fraction = static_cast<double>(out.spokes.size()) / static_cast<double>(imaging_spokes(traj).size());
  return out;
}

ReconOutput reconstruct_simba(const KSpaceData& kspace, const RunConfig& cfg) {
  Stopwatch sw;
  ReconOutput out;
  const auto traj = trajectory_for(kspace);
  if (cfg.k_max > kspace.n_interleaves) throw PipelineError("k_max exceeds the number of interleaves");
  for (auto c : cfg.coil_ids) {
    if (c >= kspace.n_coils) throw PipelineError("coil_ids refer to coil " + std::to_string(c) + " but the data has " +
                                                 std::to_string(kspace.n_coils));
  }

  out.reference = build_reference_matrix(kspace, cfg.coil_ids);
  out.timings.push_back({"reference data", sw.lap()});
  out.reduced = reduce(out.reference->data, cfg.n_pc, cfg.discard_first_pc);
  out.timings.push_back({"PCA", sw.lap()});
  out.selection = select_k(out.reduced->data, cfg.k_min, cfg.k_max, cfg.seed(), cfg.kmeans);
  out.timings.push_back({"clustering", sw.lap()});
  out.spokes = expand_to_readouts(out.selection->assignment, traj, cfg.include_si);
  if (out.spokes.empty()) throw PipelineError("largest cluster selected no readouts");
  out.volume = reconstruct(kspace, traj, out.spokes, cfg.gridding, cfg.geometry, "simba", out.selection->k_star);
  out.timings.push_back({"gridding", sw.lap()});
  out.meta = meta_for(kspace, cfg);
  out.meta.selected_interleaves = out.selection->assignment.largest_cluster;
  out.selected_fraction = static_cast<double>(out.spokes.size()) / static_cast<double>(imaging_spokes(traj).size());
  return out;
}

std::vector<std::size_t> spokes_from_meta(const VolumeMeta& meta, const RadialTrajectory& traj) {
  if (meta.selected_interleaves.empty()) return all_spokes(traj, meta.include_si);
  std::vector<std::size_t> out;
  for (auto il : meta.selected_interleaves) {
    if (il >= traj.n_interleaves) throw FormatError("selected interleaf out of range in sidecar", 0);
    for (std::size_t ro = 0; ro < traj.n_readouts; ++ro) {
      if (!meta.include_si && ro == traj.si_index) continue;
      out.push_back(traj.spoke_index(il, ro));
    }
  }
  return out;
}

VolumeMetrics compute_metrics(const std::string& name, const VolumeFile& file, const RunConfig& cfg_in,
                              const GroundTruthLabels* labels, bool provenance_requested) {
  RunConfig cfg = cfg_in;
  cfg.derive_defaults();
  const auto& vol = file.volume;
  const auto& v = vol.voxels;
  VolumeMetrics m;
  m.name = name;
  m.method = vol.provenance.method;
  m.n_spokes_used = vol.provenance.n_spokes_used;

  auto check_roi = [&](const Box& b, const std::string& roi) {
    if (b.count() == 0) throw ConfigError("ROI 'roi." + roi + "' is not set and cannot be derived from the scene");
    try {
      check_box(v, b, roi);
    } catch (const std::invalid_argument&) {
      throw ConfigError("ROI 'roi." + roi + "' is empty or outside the " + std::to_string(v.nx()) + "x" +
                        std::to_string(v.ny()) + "x" + std::to_string(v.nz()) + " volume");
    }
  };
  check_roi(cfg.roi_blood, "blood");
  check_roi(cfg.roi_myocardium, "myocardium");
  check_roi(cfg.roi_background, "background");
  if (cfg.lines.empty()) throw ConfigError("no sharpness lines configured");
  for (std::size_t i = 0; i < cfg.lines.size(); ++i) {
    for (const Vec3& p : {cfg.lines[i].start, cfg.lines[i].end}) {
      if (p.x < 0 || p.y < 0 || p.z < 0 || p.x > static_cast<double>(v.nx() - 1) ||
          p.y > static_cast<double>(v.ny() - 1) || p.z > static_cast<double>(v.nz() - 1)) {
        throw ConfigError("line." + std::to_string(i + 1) + " leaves the volume");
      }
    }
  }

  try {
    SigmoidFitOptions opts;
    opts.max_slope = cfg.max_slope;
    m.sharpness = interface_sharpness(vol, cfg.lines, cfg.samples_per_voxel, opts);
    for (const auto& w : m.sharpness->warnings) m.warnings.push_back("sharpness: " + w);
  } catch (const FitFailure& e) {
    m.errors.push_back(std::string("sharpness: ") + e.what());
  }
  try {
    m.contrast_ratio = contrast_ratio(v, cfg.roi_blood, cfg.roi_myocardium);
  } catch (const UndefinedResult& e) {
    m.errors.push_back(std::string("contrast ratio: ") + e.what());
  }
  try {
    const std::size_t n_coils = file.meta.n_coils > 0 ? file.meta.n_coils : cfg.scene.coils.size();
    m.snr_cnr = snr_cnr(v, cfg.roi_blood, cfg.roi_myocardium, cfg.roi_background, n_coils);
  } catch (const UndefinedResult& e) {
    m.errors.push_back(std::string("snr/cnr: ") + e.what());
  }

  std::vector<std::size_t> spokes;
  if (file.meta.n_interleaves > 0) {
    const auto traj = generate_phyllotaxis(file.meta.n_interleaves, file.meta.n_readouts, file.meta.n_samples,
                                           file.meta.tr);
    spokes = spokes_from_meta(file.meta, traj);
    const auto dirs = gather_directions(traj, spokes);
    if (dirs.size() > 4) m.uniformity = great_circle_uniformity(dirs);
  }
  if (provenance_requested) {
    if (labels == nullptr) {
      m.errors.push_back("provenance: no labels file given");
    } else if (labels->n_interleaves != file.meta.n_interleaves || labels->n_readouts != file.meta.n_readouts) {
      m.errors.push_back("provenance: labels do not match the volume's acquisition");
    } else {
      m.provenance = cfg.ecg_provenance ? provenance_from_ecg(spokes, *labels, cfg.qt_k) : provenance(spokes, *labels);
    }
  }
  return m;
}

namespace {

struct Row {
  std::string key;
  std::vector<std::optional<double>> values;
};

std::vector<Row> metric_rows(const std::vector<VolumeMetrics>& ms) {
  std::vector<Row> rows;
  auto add = [&](const std::string& key, auto getter) {
    Row r{key, {}};
    for (const auto& m : ms) r.values.push_back(getter(m));
    rows.push_back(std::move(r));
  };
  using O = std::optional<double>;
  add("n_spokes_used", [](const VolumeMetrics& m) -> O { return static_cast<double>(m.n_spokes_used); });
  add("sharpness_mean", [](const VolumeMetrics& m) -> O {
    return m.sharpness ? O(m.sharpness->average) : std::nullopt;
  });
  std::size_t n_lines = 0;
  for (const auto& m : ms) {
    if (m.sharpness) n_lines = std::max(n_lines, m.sharpness->fits.size());
  }
  for (std::size_t i = 0; i < n_lines; ++i) {
    add("sharpness_fit_" + std::to_string(i + 1), [i](const VolumeMetrics& m) -> O {
      return m.sharpness && i < m.sharpness->fits.size() ? O(m.sharpness->fits[i].slope) : std::nullopt;
    });
    add("sharpness_residual_" + std::to_string(i + 1), [i](const VolumeMetrics& m) -> O {
      return m.sharpness && i < m.sharpness->fits.size() ? O(m.sharpness->fits[i].residual) : std::nullopt;
    });
  }
  add("contrast_ratio", [](const VolumeMetrics& m) -> O { return m.contrast_ratio; });
  add("snr", [](const VolumeMetrics& m) -> O { return m.snr_cnr ? O(m.snr_cnr->snr) : std::nullopt; });
  add("cnr", [](const VolumeMetrics& m) -> O { return m.snr_cnr ? O(m.snr_cnr->cnr) : std::nullopt; });
  add("noise_sigma", [](const VolumeMetrics& m) -> O { return m.snr_cnr ? O(m.snr_cnr->sigma) : std::nullopt; });
  add("uniformity_mean_distance", [](const VolumeMetrics& m) -> O {
    return m.uniformity ? O(m.uniformity->mean_distance) : std::nullopt;
  });
  add("uniformity_rsd", [](const VolumeMetrics& m) -> O { return m.uniformity ? O(m.uniformity->rsd) : std::nullopt; });
  add("systolic_fraction", [](const VolumeMetrics& m) -> O {
    return m.provenance ? O(m.provenance->systolic_fraction) : std::nullopt;
  });
  add("diastolic_fraction", [](const VolumeMetrics& m) -> O {
    return m.provenance ? O(m.provenance->diastolic_fraction) : std::nullopt;
  });
  add("end_expiratory_fraction", [](const VolumeMetrics& m) -> O {
    return m.provenance ? O(m.provenance->end_expiratory_fraction) : std::nullopt;
  });
  return rows;
}

}  // namespace

std::string metrics_csv(const std::vector<VolumeMetrics>& ms) {
  std::ostringstream os;
  os << "metric";
  for (const auto& m : ms) os << ',' << m.name;
  if (ms.size() == 2) os << ",delta";
  os << '\n';
  for (const auto& r : metric_rows(ms)) {
    os << r.key;
    for (const auto& v : r.values) os << ',' << (v ? format_double(*v) : std::string());
    if (ms.size() == 2) {
      os << ',';
      if (r.values[0] && r.values[1]) os << format_double(*r.values[1] - *r.values[0]);
    }
    os << '\n';
  }
  os << "cardiac_category";
  for (const auto& m : ms) os << ',' << (m.provenance ? to_string(m.provenance->cardiac_category) : "");
  os << '\n' << "respiratory_majority";
  for (const auto& m : ms) os << ',' << (m.provenance ? to_string(m.provenance->respiratory_majority) : "");
  os << '\n';
  return os.str();
}

std::string metrics_text(const std::vector<VolumeMetrics>& ms) {
  std::ostringstream os;
  for (const auto& m : ms) {
    os << "== " << m.name << " (" << m.method << ", " << m.n_spokes_used << " spokes)\n";
    if (m.sharpness) {
      os << "  sharpness        " << fixed(m.sharpness->average) << " 1/mm over " << m.sharpness->fits.size()
         << " lines\n";
      for (std::size_t i = 0; i < m.sharpness->fits.size(); ++i) {
        const auto& f = m.sharpness->fits[i];
        os << "    fit " << i + 1 << "  slope " << fixed(f.slope) << "  residual " << fixed(f.residual)
           << (f.capped ? "  (capped)" : "") << '\n';
      }
    }
    if (m.contrast_ratio) os << "  contrast ratio   " << fixed(*m.contrast_ratio) << '\n';
    if (m.snr_cnr) {
      os << "  SNR              " << fixed(m.snr_cnr->snr, 2) << '\n';
      os << "  CNR              " << fixed(m.snr_cnr->cnr, 2) << '\n';
      os << "  noise sigma      " << fixed(m.snr_cnr->sigma, 6) << '\n';
    }
    if (m.uniformity) {
      os << "  uniformity       mean NN distance " << fixed(m.uniformity->mean_distance, 6) << " rad, RSD "
         << fixed(100.0 * m.uniformity->rsd, 2) << "%\n";
    }
    if (m.provenance) {
      const auto& p = *m.provenance;
      os << "  cardiac          systolic " << fixed(100.0 * p.systolic_fraction, 1) << "%, diastolic "
         << fixed(100.0 * p.diastolic_fraction, 1) << "% -> " << to_string(p.cardiac_category) << '\n';
      os << "  respiratory      end-expiratory bins " << fixed(100.0 * p.end_expiratory_fraction, 1) << "% -> "
         << to_string(p.respiratory_majority) << '\n';
    }
    for (const auto& w : m.warnings) os << "  warning: " << w << '\n';
    for (const auto& e : m.errors) os << "  error: " << e << '\n';
  }
  if (ms.size() == 2) {
    os << "== comparison (" << ms[1].name << " - " << ms[0].name << ")\n";
    for (const auto& r : metric_rows(ms)) {
      if (!r.values[0] || !r.values[1]) continue;
      os << "  " << std::left << std::setw(26) << r.key << fixed(*r.values[1] - *r.values[0], 6);
      if (*r.values[0] != 0.0) os << "  (ratio " << fixed(*r.values[1] / *r.values[0]) << ")";
      os << '\n';
    }
  }
  return os.str();
}

ExperimentResult run_experiment(const RunConfig& cfg) {
  cfg.validate();
  ExperimentResult r;
  r.trajectory = make_trajectory(cfg);
  r.acquisition = simulate(cfg, r.trajectory);
  r.alldata = reconstruct_alldata(r.acquisition.kspace, cfg);
  r.simba = reconstruct_simba(r.acquisition.kspace, cfg);
  r.alldata_metrics =
      compute_metrics("alldata", VolumeFile{r.alldata.volume, r.alldata.meta}, cfg, &r.acquisition.labels);
  r.simba_metrics = compute_metrics("simba", VolumeFile{r.simba.volume, r.simba.meta}, cfg, &r.acquisition.labels);
  const std::vector<VolumeMetrics> both{r.alldata_metrics, r.simba_metrics};
  r.report_csv = metrics_csv(both);
  std::ostringstream text;
  const auto& sel = *r.simba.selection;
  text << "k* = " << sel.k_star << ", largest cluster " << sel.assignment.largest_cluster.size() << " of "
       << r.acquisition.kspace.n_interleaves << " interleaves, " << r.simba.spokes.size() << " readouts ("
       << fixed(100.0 * r.simba.selected_fraction, 2) << "% of imaging readouts, "
       << fixed(100.0 * radial_nyquist_fraction(r.simba.spokes.size(), cfg.geometry.matrix_size), 1)
       << "% of radial Nyquist)\n";
  text << metrics_text(both);
  r.report_text = text.str();
  r.cluster_report = encode_cluster_report(sel.assignment.labels.empty() ? Eigen::MatrixXd() : r.simba.reduced->data,
                                           sel, r.simba.spokes.size(), r.alldata.spokes.size());
  return r;
}

void write_experiment(const ExperimentResult& r, const RunConfig& cfg, bool png) {
  const auto& dir = cfg.output_dir;
  std::filesystem::create_directories(dir);
  write_file(dir / "kspace.bin", encode_kspace(r.acquisition.kspace, r.acquisition.labels));
  write_file(dir / "labels.bin", encode_labels(r.acquisition.labels));
  write_file(dir / "trajectory.bin", encode_trajectory(r.trajectory));
  write_volume(dir / "alldata", r.alldata.volume, r.alldata.meta);
  write_volume(dir / "simba", r.simba.volume, r.simba.meta);
  write_file(dir / "clusters.csv", r.cluster_report);
  write_file(dir / "report.csv", r.report_csv);
  write_file(dir / "report.txt", r.report_text);
  if (png) {
    write_center_slices(dir / "alldata", r.alldata.volume.voxels, 0.0, 0.0);
    write_center_slices(dir / "simba", r.simba.volume.voxels, 0.0, 0.0);
  }
}

}  // namespace simba
