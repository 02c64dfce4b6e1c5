#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "simba/geometry.hpp"
#include "simba/kspace.hpp"
#include "simba/trajectory.hpp"

namespace simba {

struct Ellipsoid {
  std::string name;
  Vec3 center;                 // mm
  Vec3 semi_axes;              // mm
  double amplitude = 1.0;
  double cardiac_scaling = 0.0;  // fractional semi-axis shrink at peak contraction
  Vec3 respiratory_shift;      // mm displacement at peak inspiration
};

/// Gaussian receive sensitivity centered on the chest wall.
struct CoilProfile {
  Vec3 center;
  double width = 80.0;  // mm, Gaussian standard deviation

  double sensitivity(const Vec3& p) const {
    const Vec3 d = p - center;
    return std::exp(-d.dot(d) / (2.0 * width * width));
  }
};

struct PhantomScene {
  std::vector<Ellipsoid> ellipsoids;
  double cardiac_period = 0.9;      // s
  double respiratory_period = 4.0;  // s
  double rr_jitter = 0.05;          // fractional half-width of the uniform RR spread
  double systolic_fraction = 0.35;  // phase of peak contraction
  Vec3 fov{256.0, 256.0, 256.0};    // mm
  std::array<CoilProfile, 4> coils;
  bool unit_coils = false;          // all sensitivities 1 (test scenes)
  double noise_sigma = 0.0;         // sd of each real/imag noise component
  std::uint64_t seed = 0;                   // RR jitter (and noise unless noise_seed is set)
  std::optional<std::uint64_t> noise_seed;

  void validate() const;
};

/// Default desk-scale thorax: body, liver, ventricle shell pair and a 3 mm vessel.
PhantomScene default_scene();

/// Reconstruction geometry shared by simulation and gridding: normalized
/// k-space radius r maps to r * matrix_size / fov_mm cycles per mm.
struct AcquisitionGeometry {
  double fov_mm = 256.0;
  std::size_t matrix_size = 96;

  double voxel_mm() const { return fov_mm / static_cast<double>(matrix_size); }
  double k_scale() const { return static_cast<double>(matrix_size) / fov_mm; }
};

struct EllipsoidState {
  Vec3 center;
  Vec3 semi_axes;
};

/// Cardiac timing with per-beat RR jitter. Beat b has period
/// cardiac_period * (1 + U(-rr_jitter, rr_jitter)) drawn from a counter
/// stream keyed on the scene seed, so it never depends on the noise.
class Physiology {
 public:
  Physiology(const PhantomScene& scene, double duration);

  double cardiac_phase(double t) const;
  double respiratory_phase(double t) const;
  /// Raised-cosine contraction in [0, 1], peaking at the systolic fraction.
  double cardiac_activation(double t) const;
  /// (1 - cos(2 pi t / T))^2 / 4, zero at end-expiration.
  double respiratory_activation(double t) const;
  const std::vector<double>& r_wave_times() const { return onsets_; }

 private:
  const PhantomScene* scene_;
  std::vector<double> onsets_;
};

/// Instantaneous geometry of every ellipsoid.
std::vector<EllipsoidState> motion_state(const PhantomScene& scene, const Physiology& physio,
                                         double t);
std::vector<EllipsoidState> motion_state(const PhantomScene& scene, double t);

/// Closed-form Fourier transform of a uniform ellipsoid of unit amplitude at
/// k (cycles/mm): V * 3 (sin p - p cos p) / p^3 * exp(-2 pi i k.c).
std::complex<double> ellipsoid_ft(const EllipsoidState& e, const Vec3& k);

struct SimulatedAcquisition {
  KSpaceData kspace;
  GroundTruthLabels labels;
};

/// Samples every coil on the trajectory with ground-truth labels attached.
/// Noise is keyed on (seed, coil, spoke, sample).
SimulatedAcquisition sample_kspace(const PhantomScene& scene, const RadialTrajectory& traj,
                                   const AcquisitionGeometry& geometry);

/// Fills cardiac and respiratory bins. Respiratory bins are equal-count
/// quantiles of the displacement; ties go to the lower bin.
void ground_truth_bins(GroundTruthLabels& labels, double systole_fraction,
                       std::size_t n_resp_bins = 4);

}  // namespace simba
