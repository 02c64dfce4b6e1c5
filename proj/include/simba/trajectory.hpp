#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "simba/geometry.hpp"

namespace simba {

/// Golden angle in radians (137.50776... degrees).
inline const double kGoldenAngle = kPi * (3.0 - std::sqrt(5.0));

/// Interleaved 3D radial trajectory. Spokes are stored interleaf-major:
/// spoke = interleaf * n_readouts + readout, acquired at spoke * tr seconds.
/// Sample radii are in cycles per voxel of the reconstruction grid.
struct RadialTrajectory {
  std::size_t n_interleaves = 0;
  std::size_t n_readouts = 0;
  std::size_t n_samples = 0;
  double tr = 0.0;
  std::size_t si_index = 0;
  std::vector<Vec3> directions;
  std::vector<double> radii;

  std::size_t n_spokes() const { return directions.size(); }
  std::size_t spoke_index(std::size_t interleaf, std::size_t readout) const {
    return interleaf * n_readouts + readout;
  }
  std::size_t interleaf_of(std::size_t spoke) const { return spoke / n_readouts; }
  bool is_si(std::size_t spoke) const { return spoke % n_readouts == si_index; }
  double timestamp(std::size_t spoke) const { return static_cast<double>(spoke) * tr; }
  std::span<const Vec3> interleaf(std::size_t i) const {
    return std::span<const Vec3>(directions).subspan(i * n_readouts, n_readouts);
  }
  /// Normalized k-space location of one sample.
  Vec3 sample_location(std::size_t spoke, std::size_t sample) const {
    return directions[spoke] * radii[sample];
  }
};

/// Sample radii for a spoke of n samples: (j - floor(n/2)) / n, so the
/// k-space center sits at index floor(n/2) and all radii lie in [-0.5, 0.5).
std::vector<double> spoke_radii(std::size_t n_samples);

/// Spiral phyllotaxis trajectory on the upper hemisphere. The nominal spoke n
/// has polar angle (pi/2) sqrt(n / N) and azimuth n times the golden angle;
/// spoke n belongs to interleaf n mod n_interleaves. The first readout of
/// every interleaf is replaced by an exact +z (superior-inferior) readout.
RadialTrajectory generate_phyllotaxis(std::size_t n_interleaves, std::size_t n_readouts,
                                      std::size_t n_samples, double tr);

/// Directions of the listed spokes.
std::vector<Vec3> gather_directions(const RadialTrajectory& traj,
                                    std::span<const std::size_t> spokes);

/// All spokes except the SI readouts.
std::vector<std::size_t> imaging_spokes(const RadialTrajectory& traj);

struct UniformityReport {
  double mean_distance = 0.0;  // radians
  double rsd = 0.0;            // stddev / mean of the per-point neighbor means
  std::size_t n_neighbors = 0;
};

/// Per-point mean great-circle distance to the n nearest distinct neighbors
/// (ties broken by lower index). Uses a cell grid for large inputs; the result
/// is identical to exhaustive search.
std::vector<double> neighbor_mean_distances(std::span<const Vec3> directions,
                                            std::size_t n_neighbors = 4);

/// Exhaustive O(n^2) variant of neighbor_mean_distances.
std::vector<double> neighbor_mean_distances_exhaustive(std::span<const Vec3> directions,
                                                       std::size_t n_neighbors = 4);

UniformityReport great_circle_uniformity(std::span<const Vec3> directions,
                                         std::size_t n_neighbors = 4);

/// Fraction of the 3D radial Nyquist spoke count pi * N^2 / 2 covered by n_spokes.
double radial_nyquist_fraction(std::size_t n_spokes, std::size_t matrix_size);

}  // namespace simba
