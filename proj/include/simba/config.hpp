#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "simba/cluster.hpp"
#include "simba/metrics.hpp"
#include "simba/phantom.hpp"
#include "simba/recon.hpp"

namespace simba {

struct RunConfig {
  PhantomScene scene = default_scene();

  // Trajectory (desk scale).
  std::size_t n_interleaves = 1000;
  std::size_t n_readouts = 22;
  std::size_t n_samples = 128;
  double tr = 0.00334;

  AcquisitionGeometry geometry;
  GriddingConfig gridding;

  // Reference data and clustering.
  std::array<std::size_t, 4> coil_ids{0, 1, 2, 3};
  std::size_t n_pc = 20;
  bool discard_first_pc = true;
  std::size_t k_min = 10;
  std::size_t k_max = 14;
  KMeansOptions kmeans;
  bool include_si = false;

  // Metrics. Empty ROIs / lines are derived from the scene.
  Box roi_blood;
  Box roi_myocardium;
  Box roi_background;
  std::vector<LineSegment> lines;
  double samples_per_voxel = 4.0;
  double max_slope = 50.0;
  double qt_k = 0.39;
  bool ecg_provenance = false;

  std::filesystem::path output_dir = "simba_out";

  std::uint64_t seed() const { return scene.seed; }
  void validate() const;
  /// Fills ROIs and sharpness lines that were not set explicitly.
  void derive_defaults();
};

/// Parses "key = value" lines; '#' starts a comment. Unknown keys are
/// rejected with a ConfigError naming the line.
RunConfig parse_config(const std::string& text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

/// Applies a single key/value pair (also used for command-line overrides).
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);

/// One line per documented key with its default.
std::string describe_config_keys();

/// Voxel-coordinate position of a point given in scene millimetres.
Vec3 mm_to_voxel(const Vec3& p, const AcquisitionGeometry& geometry);

}  // namespace simba
