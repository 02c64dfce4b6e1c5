#pragma once

#include <optional>
#include <string>
#include <vector>

#include "simba/cluster.hpp"
#include "simba/config.hpp"
#include "simba/io.hpp"
#include "simba/metrics.hpp"
#include "simba/pca.hpp"
#include "simba/phantom.hpp"
#include "simba/recon.hpp"
#include "simba/refvec.hpp"
#include "simba/trajectory.hpp"

namespace simba {

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

RadialTrajectory make_trajectory(const RunConfig& cfg);
/// Trajectory matching the dimensions of an acquisition.
RadialTrajectory trajectory_for(const KSpaceData& kspace);

SimulatedAcquisition simulate(const RunConfig& cfg, const RadialTrajectory& traj);

struct ReconOutput {
  Volume volume;
  VolumeMeta meta;
  std::vector<std::size_t> spokes;
  std::vector<StageTiming> timings;
  double selected_fraction = 1.0;  // of the non-SI imaging spokes

  // Only filled by the simba method.
  std::optional<ReferenceMatrix> reference;
  std::optional<ReducedMatrix> reduced;
  std::optional<KSelection> selection;
};

ReconOutput reconstruct_alldata(const KSpaceData& kspace, const RunConfig& cfg);
ReconOutput reconstruct_simba(const KSpaceData& kspace, const RunConfig& cfg);

/// Spokes a volume was reconstructed from, recovered from its sidecar.
std::vector<std::size_t> spokes_from_meta(const VolumeMeta& meta, const RadialTrajectory& traj);

struct VolumeMetrics {
  std::string name;
  std::string method;
  std::size_t n_spokes_used = 0;
  std::optional<SharpnessResult> sharpness;
  std::optional<double> contrast_ratio;
  std::optional<SnrCnr> snr_cnr;
  std::optional<UniformityReport> uniformity;
  std::optional<ProvenanceReport> provenance;
  std::vector<std::string> errors;    // metric failures (fit failure, undefined result)
  std::vector<std::string> warnings;
};

/// Computes every metric that the inputs allow. ROI or line problems throw
/// ConfigError; fit failures and undefined results are recorded in errors.
/// labels may be null, in which case provenance is reported as an error.
VolumeMetrics compute_metrics(const std::string& name, const VolumeFile& volume, const RunConfig& cfg,
                              const GroundTruthLabels* labels, bool provenance_requested = true);

std::string metrics_csv(const std::vector<VolumeMetrics>& metrics);
std::string metrics_text(const std::vector<VolumeMetrics>& metrics);

struct ExperimentResult {
  RadialTrajectory trajectory;
  SimulatedAcquisition acquisition;
  ReconOutput alldata;
  ReconOutput simba;
  VolumeMetrics alldata_metrics;
  VolumeMetrics simba_metrics;
  std::string report_text;
  std::string report_csv;
  std::string cluster_report;
};

/// simulate -> alldata and simba reconstructions -> metrics, all in memory.
ExperimentResult run_experiment(const RunConfig& cfg);

/// Writes the experiment outputs into cfg.output_dir.
void write_experiment(const ExperimentResult& result, const RunConfig& cfg, bool png = false);

}  // namespace simba
