#include "simba/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "simba/rng.hpp"

namespace simba {

namespace {

constexpr std::uint64_t kRrStream = 0x5252;     // "RR"
constexpr std::uint64_t kNoiseStream = 0x4e4f;  // "NO"

double max_respiratory_shift(const PhantomScene& scene) {
  double m = 0.0;
  for (const auto& e : scene.ellipsoids) m = std::max(m, e.respiratory_shift.norm());
  return m;
}

}  // namespace

void PhantomScene::validate() const {
  if (ellipsoids.empty()) throw std::invalid_argument("scene: no ellipsoids");
  for (const auto& e : ellipsoids) {
    if (!(e.semi_axes.x > 0 && e.semi_axes.y > 0 && e.semi_axes.z > 0)) {
      throw std::invalid_argument("scene: ellipsoid '" + e.name + "' needs positive semi-axes");
    }
    if (e.cardiac_scaling < 0.0 || e.cardiac_scaling >= 1.0) {
      throw std::invalid_argument("scene: cardiac_scaling of '" + e.name + "' must be in [0, 1)");
    }
  }
  if (!(fov.x > 0 && fov.y > 0 && fov.z > 0)) throw std::invalid_argument("scene: fov must be positive");
  if (!(cardiac_period > 0) || !(respiratory_period > 0)) {
    throw std::invalid_argument("scene: periods must be positive");
  }
  if (!(cardiac_period < respiratory_period)) {
    throw std::invalid_argument("scene: cardiac_period must be shorter than respiratory_period");
  }
  if (rr_jitter < 0.0 || rr_jitter >= 1.0) throw std::invalid_argument("scene: rr_jitter must be in [0, 1)");
  if (!(systolic_fraction > 0.0 && systolic_fraction <= 0.5)) {
    throw std::invalid_argument("scene: systolic_fraction must be in (0, 0.5]");
  }
  if (noise_sigma < 0.0) throw std::invalid_argument("scene: noise_sigma must be >= 0");
  for (const auto& c : coils) {
    if (!(c.width > 0)) throw std::invalid_argument("scene: coil width must be positive");
  }
}

PhantomScene default_scene() {
  PhantomScene scene;
  // x: right-left (medial-lateral), y: posterior-anterior, z: inferior-superior.
  scene.ellipsoids = {
      {"thorax", {0, 0, 0}, {110, 80, 118}, 0.2, 0.0, {0, 0, 0}},
      {"liver", {-15, -5, -72}, {75, 55, 42}, 0.8, 0.0, {0, 0, -12}},
      {"myocardium", {10, 5, 35}, {42, 36, 50}, 1.0, 0.15, {0, 0, -7}},
      {"blood_pool", {10, 5, 35}, {26, 21, 34}, 2.4, 0.15, {0, 0, -7}},
      {"vessel", {48, 30, 50}, {1.5, 1.5, 12}, 3.4, 0.0, {0, 0, -7}},
  };
  scene.coils = {CoilProfile{{-45, 85, 45}, 90.0}, CoilProfile{{45, 85, 45}, 90.0},
                 CoilProfile{{-45, 85, -45}, 90.0}, CoilProfile{{45, 85, -45}, 90.0}};
  scene.noise_sigma = 0.05;
  return scene;
}

Physiology::Physiology(const PhantomScene& scene, double duration) : scene_(&scene) {
  const double horizon = std::max(duration, 0.0) + 2.0 * scene.cardiac_period;
  const std::uint64_t key = hash_key(scene.seed, kRrStream);
  double t = 0.0;
  for (std::uint64_t beat = 0; t <= horizon; ++beat) {
    onsets_.push_back(t);
    if (scene.rr_jitter == 0.0) {
      t = static_cast<double>(beat + 1) * scene.cardiac_period;
    } else {
      const double u = 2.0 * counter_uniform(key, beat) - 1.0;
      t += scene.cardiac_period * (1.0 + scene.rr_jitter * u);
    }
  }
  onsets_.push_back(t);
}

double Physiology::cardiac_phase(double t) const {
  if (t < 0.0 || t >= onsets_.back()) throw std::out_of_range("cardiac_phase: time outside simulated span");
  const auto it = std::upper_bound(onsets_.begin(), onsets_.end(), t);
  const double start = *(it - 1);
  const double phase = (t - start) / (*it - start);
  return std::clamp(phase, 0.0, std::nextafter(1.0, 0.0));
}

double Physiology::respiratory_phase(double t) const {
  const double cycles = t / scene_->respiratory_period;
  return cycles - std::floor(cycles);
}

double Physiology::cardiac_activation(double t) const {
  const double phase = cardiac_phase(t);
  const double peak = scene_->systolic_fraction;
  if (phase >= 2.0 * peak) return 0.0;
  return 0.5 * (1.0 - std::cos(kPi * phase / peak));
}

double Physiology::respiratory_activation(double t) const {
  const double c = 1.0 - std::cos(2.0 * kPi * t / scene_->respiratory_period);
  return 0.25 * c * c;
}

std::vector<EllipsoidState> motion_state(const PhantomScene& scene, const Physiology& physio,
                                         double t) {
  const double cardiac = physio.cardiac_activation(t);
  const double resp = physio.respiratory_activation(t);
  std::vector<EllipsoidState> states;
  states.reserve(scene.ellipsoids.size());
  for (const auto& e : scene.ellipsoids) {
    states.push_back({e.center + e.respiratory_shift * resp,
                      e.semi_axes * (1.0 - e.cardiac_scaling * cardiac)});
  }
  return states;
}

std::vector<EllipsoidState> motion_state(const PhantomScene& scene, double t) {
  return motion_state(scene, Physiology(scene, t), t);
}

std::complex<double> ellipsoid_ft(const EllipsoidState& e, const Vec3& k) {
  const Vec3& a = e.semi_axes;
  const double volume = 4.0 / 3.0 * kPi * a.x * a.y * a.z;
  const Vec3 scaled = k.hadamard(a);
  const double rho = 2.0 * kPi * scaled.norm();
  double shape;
  if (rho < 1e-3) {
    const double r2 = rho * rho;
    shape = 1.0 - r2 / 10.0 + r2 * r2 / 280.0;
  } else {
    shape = 3.0 * (std::sin(rho) - rho * std::cos(rho)) / (rho * rho * rho);
  }
  const double phase = -2.0 * kPi * k.dot(e.center);
  return volume * shape * std::complex<double>(std::cos(phase), std::sin(phase));
}

SimulatedAcquisition sample_kspace(const PhantomScene& scene, const RadialTrajectory& traj,
                                   const AcquisitionGeometry& geometry) {
  scene.validate();
  const Vec3 fov = scene.fov;
  if (std::abs(fov.x - geometry.fov_mm) > 1e-9 || std::abs(fov.y - geometry.fov_mm) > 1e-9 ||
      std::abs(fov.z - geometry.fov_mm) > 1e-9) {
    throw std::invalid_argument("sample_kspace: acquisition FOV does not match the scene FOV");
  }

  const std::size_t n_coils = scene.coils.size();
  const std::size_t n_spokes = traj.n_spokes();
  const std::size_t n_samples = traj.n_samples;
  const std::size_t n_ell = scene.ellipsoids.size();
  const double duration = static_cast<double>(n_spokes) * traj.tr;
  const Physiology physio(scene, duration);

  SimulatedAcquisition out;
  KSpaceData& ks = out.kspace;
  ks.n_coils = n_coils;
  ks.n_interleaves = traj.n_interleaves;
  ks.n_readouts = traj.n_readouts;
  ks.n_samples = n_samples;
  ks.tr = traj.tr;
  ks.si_index = traj.si_index;
  ks.samples.assign(n_coils * n_spokes * n_samples, {});

  const std::uint64_t noise_key = hash_key(scene.noise_seed.value_or(scene.seed), kNoiseStream);
  const double k_scale = geometry.k_scale();

#pragma omp parallel for schedule(static)
  for (std::size_t spoke = 0; spoke < n_spokes; ++spoke) {
    const double t = traj.timestamp(spoke);
    const auto states = motion_state(scene, physio, t);
    std::vector<double> weights(n_coils * n_ell, 1.0);
    if (!scene.unit_coils) {
      for (std::size_t c = 0; c < n_coils; ++c) {
        for (std::size_t e = 0; e < n_ell; ++e) {
          weights[c * n_ell + e] = scene.coils[c].sensitivity(states[e].center);
        }
      }
    }
    std::vector<std::complex<double>> per_ellipsoid(n_ell);
    for (std::size_t j = 0; j < n_samples; ++j) {
      const Vec3 k = traj.sample_location(spoke, j) * k_scale;
      for (std::size_t e = 0; e < n_ell; ++e) {
        per_ellipsoid[e] = scene.ellipsoids[e].amplitude * ellipsoid_ft(states[e], k);
      }
      for (std::size_t c = 0; c < n_coils; ++c) {
        std::complex<double> value = 0.0;
        for (std::size_t e = 0; e < n_ell; ++e) value += weights[c * n_ell + e] * per_ellipsoid[e];
        const std::size_t index = ks.offset(c, spoke) + j;
        if (scene.noise_sigma > 0.0) {
          const auto [gr, gi] = counter_gaussian_pair(noise_key, index);
          value += scene.noise_sigma * std::complex<double>(gr, gi);
        }
        ks.samples[index] = std::complex<float>(value);
      }
    }
  }

  GroundTruthLabels& labels = out.labels;
  labels.n_interleaves = traj.n_interleaves;
  labels.n_readouts = traj.n_readouts;
  labels.tr = traj.tr;
  labels.readouts.resize(n_spokes);
  const double max_shift = max_respiratory_shift(scene);
  for (std::size_t spoke = 0; spoke < n_spokes; ++spoke) {
    const double t = traj.timestamp(spoke);
    ReadoutLabel& l = labels.readouts[spoke];
    l.cardiac_phase = physio.cardiac_phase(t);
    l.respiratory_phase = physio.respiratory_phase(t);
    l.respiratory_displacement = physio.respiratory_activation(t) * max_shift;
  }
  for (double onset : physio.r_wave_times()) {
    if (onset <= duration) labels.r_wave_times.push_back(onset);
  }
  ground_truth_bins(labels, scene.systolic_fraction);
  return out;
}

void ground_truth_bins(GroundTruthLabels& labels, double systole_fraction,
                       std::size_t n_resp_bins) {
  if (!(systole_fraction > 0.0 && systole_fraction < 1.0)) {
    throw std::invalid_argument("ground_truth_bins: systole_fraction must be in (0, 1)");
  }
  if (n_resp_bins < 1 || n_resp_bins > 255) throw std::invalid_argument("ground_truth_bins: bad bin count");
  auto& readouts = labels.readouts;
  for (auto& l : readouts) {
    l.cardiac_bin = l.cardiac_phase < systole_fraction ? CardiacBin::systole : CardiacBin::diastole;
  }
  if (readouts.empty()) return;

  std::vector<double> sorted(readouts.size());
  for (std::size_t i = 0; i < readouts.size(); ++i) sorted[i] = readouts[i].respiratory_displacement;
  std::sort(sorted.begin(), sorted.end());
  // Upper edge of bin b is the value at rank ceil(b * n / n_bins) - 1.
  std::vector<double> edges;
  const std::size_t n = sorted.size();
  for (std::size_t b = 1; b < n_resp_bins; ++b) {
    const std::size_t rank = (b * n + n_resp_bins - 1) / n_resp_bins;
    edges.push_back(sorted[rank == 0 ? 0 : rank - 1]);
  }
  for (auto& l : readouts) {
    const auto above = static_cast<std::size_t>(
        std::lower_bound(edges.begin(), edges.end(), l.respiratory_displacement) - edges.begin());
    l.respiratory_bin = static_cast<std::uint8_t>(1 + above);
  }
}

}  // namespace simba
