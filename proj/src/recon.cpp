#include "simba/recon.hpp"

#include <fftw3.h>
#include <omp.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <stdexcept>

#include "simba/kaiser_bessel.hpp"

namespace simba {

namespace {

std::mutex g_fft_planner_mutex;

struct Footprint {
  long start[3];      // first integer grid offset per axis (relative to center)
  int count[3];       // number of grid points per axis
  double w[3][8];     // kernel values
};

Footprint footprint(const Vec3& k, double grid, const KaiserBesselKernel& kernel) {
  Footprint f{};
  const double half = kernel.width() / 2.0;
  const double u[3] = {k.x * grid, k.y * grid, k.z * grid};
  for (int a = 0; a < 3; ++a) {
    const long lo = static_cast<long>(std::ceil(u[a] - half));
    const long hi = static_cast<long>(std::floor(u[a] + half));
    f.start[a] = lo;
    f.count[a] = static_cast<int>(std::min<long>(hi - lo + 1, 8));
    for (int i = 0; i < f.count[a]; ++i) f.w[a][i] = kernel(static_cast<double>(lo + i) - u[a]);
  }
  return f;
}

std::size_t wrap(long m, std::size_t g) {
  const long gl = static_cast<long>(g);
  long v = (m + gl / 2) % gl;
  if (v < 0) v += gl;
  return static_cast<std::size_t>(v);
}

void check_coords(std::span<const Vec3> coords) {
  for (const auto& c : coords) {
    if (!(std::abs(c.x) <= 0.5 && std::abs(c.y) <= 0.5 && std::abs(c.z) <= 0.5)) {
      throw std::invalid_argument("grid_nufft: k-space coordinate outside [-0.5, 0.5]^3");
    }
  }
}

// Inverse FFT of a centered grid, crop to the matrix, divide by the kernel transform.
ComplexVolume image_from_grid(ComplexVolume grid, const GriddingConfig& cfg,
                              const KaiserBesselKernel& kernel) {
  const std::size_t g = grid.nx();
  const int gi = static_cast<int>(g);
  auto* data = reinterpret_cast<fftw_complex*>(grid.data());
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(g_fft_planner_mutex);
    plan = fftw_plan_dft_3d(gi, gi, gi, data, data, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(g_fft_planner_mutex);
    fftw_destroy_plan(plan);
  }

  const std::size_t n = cfg.matrix_size;
  std::vector<double> rolloff(n);
  std::vector<std::size_t> source(n);
  std::vector<double> sign(n);
  for (std::size_t i = 0; i < n; ++i) {
    const long x = static_cast<long>(i) - static_cast<long>(n / 2);
    rolloff[i] = 1.0 / kernel.fourier(static_cast<double>(x) / static_cast<double>(g));
    const long p = ((x % static_cast<long>(g)) + static_cast<long>(g)) % static_cast<long>(g);
    source[i] = static_cast<std::size_t>(p);
    // The grid is stored with DC at index g/2, which modulates the image by (-1)^p.
    sign[i] = (p % 2 == 0) ? 1.0 : -1.0;
  }
  ComplexVolume image(n, n, n);
#pragma omp parallel for schedule(static)
  for (std::size_t z = 0; z < n; ++z) {
    for (std::size_t y = 0; y < n; ++y) {
      const double fzy = rolloff[z] * rolloff[y] * sign[z] * sign[y];
      for (std::size_t x = 0; x < n; ++x) {
        image(x, y, z) = grid(source[x], source[y], source[z]) * (fzy * rolloff[x] * sign[x]);
      }
    }
  }
  return image;
}

template <typename SampleAt>
ComplexVolume grid_impl(std::size_t n_samples, SampleAt sample_at, std::span<const Vec3> coords,
                        std::span<const double> weights, const GriddingConfig& cfg,
                        const KaiserBesselKernel& kernel) {
  const std::size_t g = cfg.grid_size();
  const double gd = static_cast<double>(g);
  ComplexVolume grid(g, g, g);
  std::complex<double>* out = grid.data();

  if (cfg.deterministic) {
    // Each thread owns a slab of z-planes and visits samples in input order,
    // so every grid point sums its contributions in the same order.
#pragma omp parallel
    {
      const auto nthreads = static_cast<std::size_t>(omp_get_num_threads());
      const auto tid = static_cast<std::size_t>(omp_get_thread_num());
      const std::size_t z_begin = g * tid / nthreads;
      const std::size_t z_end = g * (tid + 1) / nthreads;
      for (std::size_t i = 0; i < n_samples; ++i) {
        const Footprint f = footprint(coords[i], gd, kernel);
        bool touches = nthreads == 1;
        for (int c = 0; c < f.count[2] && !touches; ++c) {
          const std::size_t zz = wrap(f.start[2] + c, g);
          touches = zz >= z_begin && zz < z_end;
        }
        if (!touches) continue;
        const std::complex<double> value = sample_at(i) * weights[i];
        for (int c = 0; c < f.count[2]; ++c) {
          const std::size_t zz = wrap(f.start[2] + c, g);
          if (zz < z_begin || zz >= z_end) continue;
          for (int b = 0; b < f.count[1]; ++b) {
            const std::size_t yy = wrap(f.start[1] + b, g);
            const std::complex<double> vzy = value * (f.w[2][c] * f.w[1][b]);
            std::complex<double>* row = out + (zz * g + yy) * g;
            for (int a = 0; a < f.count[0]; ++a) row[wrap(f.start[0] + a, g)] += vzy * f.w[0][a];
          }
        }
      }
    }
  } else {
    auto* raw = reinterpret_cast<double*>(out);
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n_samples; ++i) {
      const Footprint f = footprint(coords[i], gd, kernel);
      const std::complex<double> value = sample_at(i) * weights[i];
      for (int c = 0; c < f.count[2]; ++c) {
        const std::size_t zz = wrap(f.start[2] + c, g);
        for (int b = 0; b < f.count[1]; ++b) {
          const std::size_t yy = wrap(f.start[1] + b, g);
          for (int a = 0; a < f.count[0]; ++a) {
            const std::complex<double> v = value * (f.w[2][c] * f.w[1][b] * f.w[0][a]);
            const std::size_t idx = 2 * ((zz * g + yy) * g + wrap(f.start[0] + a, g));
#pragma omp atomic
            raw[idx] += v.real();
#pragma omp atomic
            raw[idx + 1] += v.imag();
          }
        }
      }
    }
  }
  return grid;
}

}  // namespace

void GriddingConfig::validate() const {
  if (!(oversampling >= 1.25)) throw std::invalid_argument("GriddingConfig: oversampling must be >= 1.25");
  if (!(kernel_width >= 2.0) || kernel_width > 7.0) {
    throw std::invalid_argument("GriddingConfig: kernel width must be in [2, 7]");
  }
  if (matrix_size < 2) throw std::invalid_argument("GriddingConfig: matrix_size must be >= 2");
}

std::size_t GriddingConfig::grid_size() const {
  auto g = static_cast<std::size_t>(std::ceil(oversampling * static_cast<double>(matrix_size) - 1e-9));
  if (g % 2 != 0) ++g;
  return g;
}

double phyllotaxis_angular_weight(const Vec3& direction) {
  // Spokes at polar angle theta = (pi/2) sqrt(n/N) have density ~ theta / sin(theta)
  // per solid angle; the inverse, scaled to unit mean over the full pattern.
  const double theta = std::acos(std::clamp(std::abs(direction.z) / direction.norm(), 0.0, 1.0));
  const double sinc = theta > 1e-8 ? std::sin(theta) / theta : 1.0;
  return kPi * kPi / 8.0 * sinc;
}

std::vector<double> density_compensation(const RadialTrajectory& traj,
                                         std::span<const std::size_t> spokes,
                                         std::size_t n_reference_spokes) {
  if (spokes.empty()) throw std::invalid_argument("density_compensation: empty spoke subset");
  const std::size_t ns = traj.n_samples;
  const double dr = 1.0 / static_cast<double>(ns);
  std::vector<double> per_sample(ns);
  double spoke_sum = 0.0;
  for (std::size_t j = 0; j < ns; ++j) {
    const double r = std::abs(traj.radii[j]);
    per_sample[j] = r > 0.0 ? 2.0 * kPi * r * r * dr : (4.0 / 3.0) * kPi * std::pow(dr / 2.0, 3);
    spoke_sum += per_sample[j];
  }
  // Normalize to one per sample on average, then rescale to the reference spoke count.
  const double scale = static_cast<double>(ns) / spoke_sum * static_cast<double>(n_reference_spokes) /
                       static_cast<double>(spokes.size());
  std::vector<double> weights(spokes.size() * ns);
  for (std::size_t s = 0; s < spokes.size(); ++s) {
    const double a = phyllotaxis_angular_weight(traj.directions.at(spokes[s]));
    for (std::size_t j = 0; j < ns; ++j) {
      weights[s * ns + j] = per_sample[j] * scale * (traj.radii[j] == 0.0 ? 1.0 : a);
    }
  }
  return weights;
}

ComplexVolume grid_samples(std::span<const std::complex<double>> samples, std::span<const Vec3> coords,
                           std::span<const double> weights, const GriddingConfig& cfg) {
  cfg.validate();
  if (samples.size() != coords.size() || weights.size() != coords.size()) {
    throw std::invalid_argument("grid_samples: samples, coords and weights differ in length");
  }
  check_coords(coords);
  const KaiserBesselKernel kernel(cfg.kernel_width, cfg.oversampling);
  return grid_impl(samples.size(), [&](std::size_t i) { return samples[i]; }, coords, weights, cfg, kernel);
}

std::vector<std::complex<double>> degrid_samples(const ComplexVolume& grid, std::span<const Vec3> coords,
                                                 const GriddingConfig& cfg) {
  cfg.validate();
  check_coords(coords);
  const std::size_t g = cfg.grid_size();
  if (grid.nx() != g || grid.ny() != g || grid.nz() != g) {
    throw std::invalid_argument("degrid_samples: grid does not match the configured size");
  }
  const KaiserBesselKernel kernel(cfg.kernel_width, cfg.oversampling);
  std::vector<std::complex<double>> out(coords.size());
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const Footprint f = footprint(coords[i], static_cast<double>(g), kernel);
    std::complex<double> acc = 0.0;
    for (int c = 0; c < f.count[2]; ++c) {
      const std::size_t zz = wrap(f.start[2] + c, g);
      for (int b = 0; b < f.count[1]; ++b) {
        const std::size_t yy = wrap(f.start[1] + b, g);
        for (int a = 0; a < f.count[0]; ++a) {
          acc += grid(wrap(f.start[0] + a, g), yy, zz) * (f.w[2][c] * f.w[1][b] * f.w[0][a]);
        }
      }
    }
    out[i] = acc;
  }
  return out;
}

std::vector<ComplexVolume> grid_nufft(std::span<const std::vector<std::complex<double>>> coil_samples,
                                      std::span<const Vec3> coords, std::span<const double> weights,
                                      const GriddingConfig& cfg) {
  cfg.validate();
  if (weights.size() != coords.size()) throw std::invalid_argument("grid_nufft: weights length mismatch");
  check_coords(coords);
  const KaiserBesselKernel kernel(cfg.kernel_width, cfg.oversampling);
  std::vector<ComplexVolume> images;
  images.reserve(coil_samples.size());
  for (const auto& samples : coil_samples) {
    if (samples.size() != coords.size()) throw std::invalid_argument("grid_nufft: samples length mismatch");
    auto grid = grid_impl(samples.size(), [&](std::size_t i) { return samples[i]; }, coords, weights, cfg, kernel);
    images.push_back(image_from_grid(std::move(grid), cfg, kernel));
  }
  return images;
}

RealVolume sos_combine(std::span<const ComplexVolume> coils) {
  if (coils.empty()) throw std::invalid_argument("sos_combine: no coil volumes");
  for (const auto& c : coils) {
    if (!c.same_shape(coils.front())) throw std::invalid_argument("sos_combine: coil volume shapes differ");
  }
  const auto& first = coils.front();
  RealVolume out(first.nx(), first.ny(), first.nz());
  auto& dst = out.values();
  for (const auto& c : coils) {
    const auto& src = c.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += std::norm(src[i]);
  }
  for (double& v : dst) v = std::sqrt(v);
  return out;
}

double reconstruction_scale(const RadialTrajectory& traj, std::size_t n_reference_spokes,
                            const AcquisitionGeometry& geometry) {
  // Physical k-space volume represented by one spoke's weights (cycles/voxel units).
  const std::size_t ns = traj.n_samples;
  const double dr = 1.0 / static_cast<double>(ns);
  double kvolume = 0.0;
  for (double r : traj.radii) {
    kvolume += r != 0.0 ? 2.0 * kPi * r * r * dr : (4.0 / 3.0) * kPi * std::pow(dr / 2.0, 3);
  }
  const double voxel = geometry.voxel_mm();
  return kvolume / (static_cast<double>(n_reference_spokes) * static_cast<double>(ns)) /
         (voxel * voxel * voxel);
}

Volume reconstruct(const KSpaceData& kspace, const RadialTrajectory& traj,
                   std::span<const std::size_t> spokes, const GriddingConfig& cfg,
                   const AcquisitionGeometry& geometry, const std::string& method,
                   std::size_t k_selected) {
  cfg.validate();
  if (spokes.empty()) throw std::invalid_argument("reconstruct: empty spoke selection");
  if (kspace.n_spokes() != traj.n_spokes() || kspace.n_samples != traj.n_samples) {
    throw std::invalid_argument("reconstruct: k-space and trajectory dimensions differ");
  }
  if (cfg.matrix_size != geometry.matrix_size) {
    throw std::invalid_argument("reconstruct: gridding matrix differs from the acquisition geometry");
  }
  for (auto s : spokes) {
    if (s >= traj.n_spokes()) throw std::invalid_argument("reconstruct: spoke index out of range");
  }

  const std::size_t ns = traj.n_samples;
  const std::size_t n_reference = traj.n_spokes() - traj.n_interleaves;
  const auto weights = density_compensation(traj, spokes, std::max<std::size_t>(n_reference, 1));
  std::vector<Vec3> coords(spokes.size() * ns);
  for (std::size_t s = 0; s < spokes.size(); ++s) {
    for (std::size_t j = 0; j < ns; ++j) coords[s * ns + j] = traj.sample_location(spokes[s], j);
  }
  check_coords(coords);

  const KaiserBesselKernel kernel(cfg.kernel_width, cfg.oversampling);
  const double scale = reconstruction_scale(traj, std::max<std::size_t>(n_reference, 1), geometry);
  const std::size_t n = cfg.matrix_size;
  RealVolume power(n, n, n);
  std::vector<std::complex<double>> samples(coords.size());
  for (std::size_t coil = 0; coil < kspace.n_coils; ++coil) {
    for (std::size_t s = 0; s < spokes.size(); ++s) {
      const auto src = kspace.readout(coil, spokes[s]);
      for (std::size_t j = 0; j < ns; ++j) samples[s * ns + j] = std::complex<double>(src[j]) * scale;
    }
    auto grid = grid_impl(samples.size(), [&](std::size_t i) { return samples[i]; }, coords, weights, cfg, kernel);
    const ComplexVolume image = image_from_grid(std::move(grid), cfg, kernel);
    auto& dst = power.values();
    const auto& src = image.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += std::norm(src[i]);
  }
  for (double& v : power.values()) v = std::sqrt(v);

  Volume vol;
  vol.voxels = std::move(power);
  vol.voxel_mm = geometry.voxel_mm();
  vol.provenance = {method, spokes.size(), k_selected};
  return vol;
}

}  // namespace simba
