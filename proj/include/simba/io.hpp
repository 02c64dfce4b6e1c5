#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "simba/cluster.hpp"
#include "simba/kspace.hpp"
#include "simba/recon.hpp"
#include "simba/refvec.hpp"
#include "simba/trajectory.hpp"

namespace simba {

// All binary formats are little-endian. Decoders throw FormatError with the
// byte offset of the first inconsistency.

std::string encode_trajectory(const RadialTrajectory& traj);
RadialTrajectory decode_trajectory(std::string_view bytes);

std::string encode_labels(const GroundTruthLabels& labels);
GroundTruthLabels decode_labels(std::string_view bytes);

struct KSpaceFile {
  KSpaceData kspace;
  GroundTruthLabels labels;
};

/// Header, complex f32 samples in (coil, interleaf, readout, sample) order,
/// then the label block (same bytes as a labels file).
std::string encode_kspace(const KSpaceData& kspace, const GroundTruthLabels& labels);
KSpaceFile decode_kspace(std::string_view bytes);

/// Expected size of a k-space file, header arithmetic only.
std::size_t kspace_file_size(const KSpaceData& kspace, const GroundTruthLabels& labels);

/// Everything the sidecar records besides the voxels.
struct VolumeMeta {
  double fov_mm = 0.0;
  std::size_t n_coils = 0;
  std::size_t n_interleaves = 0;
  std::size_t n_readouts = 0;
  std::size_t n_samples = 0;
  double tr = 0.0;
  bool include_si = false;
  std::vector<std::size_t> selected_interleaves;  // empty: every interleaf

  bool operator==(const VolumeMeta&) const = default;
};

struct VolumeFile {
  Volume volume;
  VolumeMeta meta;
};

std::string encode_volume_raw(const RealVolume& voxels);
std::string encode_volume_sidecar(const Volume& volume, const VolumeMeta& meta);
VolumeFile decode_volume(std::string_view raw, std::string_view sidecar);

/// Writes <stem>.raw and <stem>.json.
void write_volume(const std::filesystem::path& stem, const Volume& volume, const VolumeMeta& meta);
VolumeFile read_volume(const std::filesystem::path& stem);

/// One interleaf column per line.
std::string encode_reference_csv(const ReferenceMatrix& s);
/// Magic, u32 rows, u32 cols, then row-major f32.
std::string encode_reference_binary(const ReferenceMatrix& s);

/// interleaf,label,distance_to_centroid rows followed by '#' summary lines.
std::string encode_cluster_report(const Eigen::MatrixXd& points, const KSelection& selection,
                                  std::size_t n_selected_readouts, std::size_t n_total_readouts);

/// Axial, coronal and sagittal center slices as 8-bit PNGs (<stem>_axial.png, ...).
/// window <= 0 selects the full range of the volume.
void write_center_slices(const std::filesystem::path& stem, const RealVolume& volume, double window,
                         double level);

void write_file(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

/// Shortest round-trip decimal form.
std::string format_double(double v);

}  // namespace simba
