#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "simba/array3.hpp"
#include "simba/geometry.hpp"
#include "simba/kspace.hpp"
#include "simba/phantom.hpp"
#include "simba/trajectory.hpp"

namespace simba {

using ComplexVolume = Array3<std::complex<double>>;
using RealVolume = Array3<double>;

struct Provenance {
  std::string method = "alldata";  // "alldata" or "simba"
  std::size_t n_spokes_used = 0;
  std::size_t k_selected = 0;      // 0 when no clustering took place

  bool operator==(const Provenance&) const = default;
};

/// Combined magnitude image.
struct Volume {
  RealVolume voxels;
  double voxel_mm = 1.0;
  Provenance provenance;
};

struct GriddingConfig {
  double oversampling = 2.0;
  double kernel_width = 4.0;
  std::size_t matrix_size = 96;
  /// Fixed-order accumulation (bit-reproducible). When false, samples are
  /// accumulated with atomics in whatever order the threads reach them.
  bool deterministic = true;

  void validate() const;
  /// Oversampled grid size, rounded up to the next even integer.
  std::size_t grid_size() const;
};

/// Inverse of the phyllotaxis angular spoke density at a spoke direction,
/// normalized to mean 1 over a complete pattern: (pi^2 / 8) sin(theta) / theta.
double phyllotaxis_angular_weight(const Vec3& direction);

/// Analytic 3D radial density compensation for every sample of the listed
/// spokes (spoke-major, sample fastest). Off-center samples get the shell
/// weight 4 pi r^2 dr / (2 n_spokes), the center gets its ball volume
/// shared across spokes. Off-center weights are multiplied by the
/// phyllotaxis angular weight of their spoke. Weights are normalized to sum
/// to the number of samples and scaled by n_reference_spokes / n_spokes.
std::vector<double> density_compensation(const RadialTrajectory& traj,
                                         std::span<const std::size_t> spokes,
                                         std::size_t n_reference_spokes);

/// Gridding adjoint NUFFT: Kaiser-Bessel convolution onto the oversampled
/// grid, inverse FFT, crop to matrix_size and roll-off correction. Output
/// value at voxel x is sum_i w_i s_i exp(+2 pi i k_i . x) with x in voxels
/// relative to the volume center (index matrix_size / 2).
/// coords are in cycles per voxel and must lie in [-0.5, 0.5].
std::vector<ComplexVolume> grid_nufft(std::span<const std::vector<std::complex<double>>> coil_samples,
                                      std::span<const Vec3> coords, std::span<const double> weights,
                                      const GriddingConfig& cfg);

/// Convolution onto the oversampled Cartesian grid only (no FFT). Grid
/// index g maps to frequency (g - G/2) / G for g in [0, G).
ComplexVolume grid_samples(std::span<const std::complex<double>> samples, std::span<const Vec3> coords,
                           std::span<const double> weights, const GriddingConfig& cfg);

/// Transpose of grid_samples: interpolates the grid at every coordinate
/// (without weights).
std::vector<std::complex<double>> degrid_samples(const ComplexVolume& grid, std::span<const Vec3> coords,
                                                 const GriddingConfig& cfg);

/// Voxelwise sqrt(sum_c |v_c|^2).
RealVolume sos_combine(std::span<const ComplexVolume> coils);

/// density_compensation -> grid_nufft -> sos_combine over the listed spokes.
/// Intensity is scaled so that a uniform object of amplitude A reconstructs to about A.
Volume reconstruct(const KSpaceData& kspace, const RadialTrajectory& traj,
                   std::span<const std::size_t> spokes, const GriddingConfig& cfg,
                   const AcquisitionGeometry& geometry, const std::string& method = "alldata",
                   std::size_t k_selected = 0);

/// Global intensity scale applied by reconstruct().
double reconstruction_scale(const RadialTrajectory& traj, std::size_t n_reference_spokes,
                            const AcquisitionGeometry& geometry);

}  // namespace simba
