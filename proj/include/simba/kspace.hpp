#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace simba {

enum class CardiacBin : std::uint8_t { systole = 0, diastole = 1 };

/// Ground truth physiology for one readout.
struct ReadoutLabel {
  double cardiac_phase = 0.0;             // [0, 1) since the last R-wave
  double respiratory_phase = 0.0;         // [0, 1)
  double respiratory_displacement = 0.0;  // mm, 0 at end-expiration
  CardiacBin cardiac_bin = CardiacBin::diastole;
  std::uint8_t respiratory_bin = 1;       // 1 = end-expiration

  bool operator==(const ReadoutLabel&) const = default;
};

struct GroundTruthLabels {
  std::size_t n_interleaves = 0;
  std::size_t n_readouts = 0;
  double tr = 0.0;
  std::vector<ReadoutLabel> readouts;  // one per spoke, acquisition order
  std::vector<double> r_wave_times;    // seconds, beat onsets covering the scan

  bool operator==(const GroundTruthLabels&) const = default;
};

/// Complex radial samples indexed (coil, interleaf, readout, sample), sample fastest.
struct KSpaceData {
  std::size_t n_coils = 0;
  std::size_t n_interleaves = 0;
  std::size_t n_readouts = 0;
  std::size_t n_samples = 0;
  double tr = 0.0;
  std::size_t si_index = 0;
  std::vector<std::complex<float>> samples;

  std::size_t n_spokes() const { return n_interleaves * n_readouts; }
  std::size_t offset(std::size_t coil, std::size_t spoke) const {
    return (coil * n_spokes() + spoke) * n_samples;
  }
  std::span<std::complex<float>> readout(std::size_t coil, std::size_t spoke) {
    return std::span<std::complex<float>>(samples).subspan(offset(coil, spoke), n_samples);
  }
  std::span<const std::complex<float>> readout(std::size_t coil, std::size_t spoke) const {
    return std::span<const std::complex<float>>(samples).subspan(offset(coil, spoke), n_samples);
  }

  bool operator==(const KSpaceData&) const = default;
};

}  // namespace simba
