#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "simba/kspace.hpp"

namespace simba {

/// Standardized gradients of SI projections, one column per interleaf in
/// acquisition order. Each column stacks one block of n_samples - 1 rows per coil.
struct ReferenceMatrix {
  Eigen::MatrixXd data;
  std::vector<std::size_t> coil_ids;
  std::size_t block_length = 0;
};

/// Magnitude of the centered inverse DFT of one readout (normalized by 1/n).
/// The DC component of the projection lands at index floor(n/2).
std::vector<double> si_projection(std::span<const std::complex<float>> si_samples);
std::vector<double> si_projection(std::span<const std::complex<double>> si_samples);

/// Forward difference g[j] = p[j+1] - p[j].
std::vector<double> forward_difference(std::span<const double> projection);

/// Zero mean, unit population variance. Constant input becomes all zeros.
void standardize(std::span<double> block);

ReferenceMatrix build_reference_matrix(const KSpaceData& kspace,
                                       std::span<const std::size_t> coil_ids);

}  // namespace simba
