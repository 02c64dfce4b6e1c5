#include "simba/refvec.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <stdexcept>

#include "simba/error.hpp"

namespace simba {

namespace {

std::mutex g_planner_mutex;

// Centered inverse DFT magnitude: p[m] = |sum_j s_j exp(+2 pi i (j-c)(m-c)/n)| / n, c = floor(n/2).
template <typename T>
std::vector<double> centered_projection(std::span<const std::complex<T>> samples) {
  const std::size_t n = samples.size();
  if (n < 2) throw std::invalid_argument("si_projection: readout needs at least 2 samples");
  const std::size_t c = n / 2;
  auto* buf = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t shifted = (j + n - c) % n;
    buf[shifted][0] = static_cast<double>(samples[j].real());
    buf[shifted][1] = static_cast<double>(samples[j].imag());
  }
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(g_planner_mutex);
    plan = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  std::vector<double> out(n);
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t m = 0; m < n; ++m) {
    const std::size_t shifted = (m + n - c) % n;
    out[m] = std::hypot(buf[shifted][0], buf[shifted][1]) * scale;
  }
  {
    std::lock_guard<std::mutex> lock(g_planner_mutex);
    fftw_destroy_plan(plan);
  }
  fftw_free(buf);
  return out;
}

}  // namespace

std::vector<double> si_projection(std::span<const std::complex<float>> si_samples) {
  return centered_projection(si_samples);
}

std::vector<double> si_projection(std::span<const std::complex<double>> si_samples) {
  return centered_projection(si_samples);
}

std::vector<double> forward_difference(std::span<const double> projection) {
  if (projection.size() < 2) return {};
  std::vector<double> g(projection.size() - 1);
  for (std::size_t j = 0; j + 1 < projection.size(); ++j) g[j] = projection[j + 1] - projection[j];
  return g;
}

void standardize(std::span<double> block) {
  if (block.empty()) return;
  const double n = static_cast<double>(block.size());
  double mean = 0.0;
  for (double v : block) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : block) var += (v - mean) * (v - mean);
  var /= n;
  // Variance at rounding level of the values counts as constant.
  double scale = 0.0;
  for (double v : block) scale = std::max(scale, std::abs(v));
  if (var <= 1e-24 * std::max(1.0, scale * scale)) {
    std::fill(block.begin(), block.end(), 0.0);
    return;
  }
  const double inv_sd = 1.0 / std::sqrt(var);
  for (double& v : block) v = (v - mean) * inv_sd;
}

ReferenceMatrix build_reference_matrix(const KSpaceData& kspace,
                                       std::span<const std::size_t> coil_ids) {
  if (coil_ids.empty()) throw std::invalid_argument("build_reference_matrix: no coils selected");
  for (std::size_t i = 0; i < coil_ids.size(); ++i) {
    if (coil_ids[i] >= kspace.n_coils) {
      throw std::invalid_argument("build_reference_matrix: coil id out of range");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (coil_ids[i] == coil_ids[j]) throw std::invalid_argument("build_reference_matrix: duplicate coil id");
    }
  }
  if (kspace.n_readouts == 0 || kspace.si_index >= kspace.n_readouts) {
    throw MalformedInput("build_reference_matrix: interleaves carry no SI readout");
  }
  if (kspace.n_samples < 2) throw MalformedInput("build_reference_matrix: readouts need >= 2 samples");
  if (kspace.samples.size() != kspace.n_coils * kspace.n_spokes() * kspace.n_samples) {
    throw MalformedInput("build_reference_matrix: sample buffer does not match dimensions");
  }

  ReferenceMatrix ref;
  ref.coil_ids.assign(coil_ids.begin(), coil_ids.end());
  ref.block_length = kspace.n_samples - 1;
  const std::size_t rows = ref.block_length * coil_ids.size();
  ref.data.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(kspace.n_interleaves));

#pragma omp parallel for schedule(static)
  for (std::size_t il = 0; il < kspace.n_interleaves; ++il) {
    const std::size_t spoke = il * kspace.n_readouts + kspace.si_index;
    for (std::size_t b = 0; b < coil_ids.size(); ++b) {
      const auto projection = si_projection(kspace.readout(coil_ids[b], spoke));
      auto gradient = forward_difference(projection);
      standardize(gradient);
      for (std::size_t j = 0; j < gradient.size(); ++j) {
        ref.data(static_cast<Eigen::Index>(b * ref.block_length + j), static_cast<Eigen::Index>(il)) =
            gradient[j];
      }
    }
  }
  return ref;
}

}  // namespace simba
