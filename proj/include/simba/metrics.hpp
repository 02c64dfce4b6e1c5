#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "simba/geometry.hpp"
#include "simba/kspace.hpp"
#include "simba/recon.hpp"

namespace simba {

// ---- Edge sharpness ----------------------------------------------------

struct SigmoidFitOptions {
  double max_slope = 50.0;  // 1/mm
  std::size_t max_iter = 500;
};

/// Fit of s(x) = a + b / (1 + exp(-c (x - x0))) with x in mm.
struct SigmoidFit {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double x0 = 0.0;
  double slope = 0.0;     // |c|, 1/mm
  double residual = 0.0;  // RMS residual in units of the profile range
  bool capped = false;    // slope pinned at the upper bound
};

/// Least-squares sigmoid fit by projected BFGS from eight starts
/// (sign of b times four x0 positions). A flat profile returns slope 0.
/// Throws FitFailure when no start produces a finite fit.
SigmoidFit sigmoid_fit(std::span<const double> profile, double spacing_mm,
                       const SigmoidFitOptions& options = {});

/// Segment in voxel coordinates.
struct LineSegment {
  Vec3 start;
  Vec3 end;
};

struct SharpnessResult {
  std::vector<double> slope_parameters;  // per successful line
  std::vector<SigmoidFit> fits;
  std::vector<std::string> warnings;
  double average = 0.0;
};

/// Trilinear interpolation at a voxel-coordinate position.
double sample_trilinear(const RealVolume& volume, const Vec3& p);

/// Profile along a segment with the given number of samples per voxel of length.
std::vector<double> extract_profile(const RealVolume& volume, const LineSegment& line,
                                    double samples_per_voxel, double* spacing_voxels = nullptr);

/// Average sigmoid slope over the segments (normally 3 medial-lateral and 3
/// superior-inferior). Failed fits are skipped with a warning; throws
/// FitFailure if every line fails.
SharpnessResult interface_sharpness(const Volume& volume, std::span<const LineSegment> lines,
                                    double samples_per_voxel = 4.0,
                                    const SigmoidFitOptions& options = {});

// ---- Contrast and noise -------------------------------------------------

/// Inclusive-exclusive voxel box [lo, hi).
struct Box {
  std::array<std::size_t, 3> lo{};
  std::array<std::size_t, 3> hi{};

  std::size_t count() const { return (hi[0] - lo[0]) * (hi[1] - lo[1]) * (hi[2] - lo[2]); }
};

void check_box(const RealVolume& volume, const Box& box, const std::string& name);
double roi_mean(const RealVolume& volume, const Box& box);
std::vector<double> roi_values(const RealVolume& volume, const Box& box);

/// (mean_blood - mean_myo) / mean_myo.
double contrast_ratio(const RealVolume& volume, const Box& blood, const Box& myocardium);

/// Mean of a central chi distribution with dof degrees of freedom and unit scale.
double central_chi_mean(std::size_t dof);

/// Per-channel Gaussian sd from background magnitudes of an n_coils SoS image.
double estimate_noise_sigma(std::span<const double> background, std::size_t n_coils);

struct SnrCnr {
  double snr = 0.0;
  double cnr = 0.0;
  double sigma = 0.0;
};

SnrCnr snr_cnr(const RealVolume& volume, const Box& signal, const Box& myocardium,
               const Box& background, std::size_t n_coils);

// ---- Physiological provenance ------------------------------------------

enum class CardiacCategory { systolic, diastolic, mixed };
enum class RespiratoryMajority { expiration, inspiration };

struct ProvenanceReport {
  double systolic_fraction = 0.0;
  double diastolic_fraction = 0.0;
  CardiacCategory cardiac_category = CardiacCategory::mixed;
  double end_expiratory_fraction = 0.0;  // respiratory bins 1 and 2
  RespiratoryMajority respiratory_majority = RespiratoryMajority::expiration;
  std::size_t n_readouts = 0;
};

std::string to_string(CardiacCategory c);
std::string to_string(RespiratoryMajority r);

/// Categorizes the selected readouts from their ground-truth bins.
ProvenanceReport provenance(std::span<const std::size_t> selected, const GroundTruthLabels& labels);

/// Empirical QT estimate K * sqrt(RR), seconds.
double qt_estimate(double rr, double k = 0.39);

/// Same as provenance() but classifies the cardiac phase from R-wave times:
/// a readout is systolic if acquired less than QT(RR) - 50 ms after its R-wave.
ProvenanceReport provenance_from_ecg(std::span<const std::size_t> selected, const GroundTruthLabels& labels,
                                     double qt_k = 0.39);

/// Largest fraction of phases in [0, 1) covered by any circular window of the given width.
double max_cardiac_window_fraction(std::span<const double> phases, double width);

}  // namespace simba
