#include <doctest.h>

#include <omp.h>

#include <cmath>
#include <complex>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "simba/kaiser_bessel.hpp"
#include "simba/recon.hpp"
#include "simba/trajectory.hpp"

using namespace simba;

namespace {

using cvec = std::vector<std::complex<double>>;

struct Samples {
  std::vector<Vec3> k;
  cvec s;
  std::vector<double> w;
};

Samples random_samples(std::size_t n, double kmax, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-kmax, kmax);
  std::normal_distribution<double> g;
  Samples out;
  for (std::size_t i = 0; i < n; ++i) {
    out.k.push_back({u(rng), u(rng), u(rng)});
    out.s.push_back({g(rng), g(rng)});
    out.w.push_back(0.5 + std::abs(g(rng)));
  }
  return out;
}

GriddingConfig small(std::size_t n) {
  GriddingConfig cfg;
  cfg.matrix_size = n;
  return cfg;
}

ComplexVolume nufft1(const Samples& in, const GriddingConfig& cfg) {
  const std::vector<cvec> coils{in.s};
  return grid_nufft(coils, in.k, in.w, cfg).front();
}

double rel_diff(const ComplexVolume& a, const ComplexVolume& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += std::norm(a.values()[i] - b.values()[i]);
    den += std::norm(b.values()[i]);
  }
  return std::sqrt(num / den);
}

}  // namespace

TEST_SUITE("recon") {

TEST_CASE("Kaiser-Bessel table and transform") {
  const KaiserBesselKernel k(4.0, 2.0);
  CHECK(k(0.0) == doctest::Approx(1.0));
  CHECK(k(2.0) == 0.0);
  CHECK(k(-2.5) == 0.0);
  double worst = 0.0;
  for (int i = -2000; i <= 2000; ++i) {
    const double d = i * 0.000999;
    worst = std::max(worst, std::abs(k(d) - k.exact(d)));
  }
  CHECK(worst < 1e-6);
  // Closed-form transform against a numerical integral of the kernel.
  for (double nu : {0.0, 0.1, 0.25, 0.4, 0.7}) {
    const int n = 20000;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = -2.0 + (i + 0.5) * 4.0 / n;
      acc += k.exact(d) * std::cos(2.0 * kPi * nu * d);
    }
    acc *= 4.0 / n;
    CHECK(k.fourier(nu) == doctest::Approx(acc).epsilon(1e-6));
  }
}

TEST_CASE("gridding agrees with a direct non-uniform DFT") {
  const auto in = random_samples(400, 0.5, 1);
  const auto cfg = small(16);
  const auto fast = nufft1(in, cfg);
  const auto slow = oracle::ndft(in.s, in.k, in.w, 16);
  CHECK(rel_diff(fast, slow) < 2e-3);
}

TEST_CASE("a DC sample reconstructs to a flat image") {
  Samples in;
  in.k = {{0, 0, 0}};
  in.s = {{1.0, 0.0}};
  in.w = {1.0};
  // Central 50% of the spherical radial FOV.
  auto spread = [](const ComplexVolume& img, bool cube) {
    const double c = static_cast<double>(img.nx() / 2), r = 0.25 * static_cast<double>(img.nx());
    double lo = 1e9, hi = 0.0;
    for (std::size_t z = 0; z < img.nz(); ++z)
      for (std::size_t y = 0; y < img.ny(); ++y)
        for (std::size_t x = 0; x < img.nx(); ++x) {
          const Vec3 d{x - c, y - c, z - c};
          const bool inside = cube ? std::max({std::abs(d.x), std::abs(d.y), std::abs(d.z)}) < r : d.norm() < r;
          if (!inside) continue;
          lo = std::min(lo, std::abs(img(x, y, z)));
          hi = std::max(hi, std::abs(img(x, y, z)));
        }
    return hi / lo;
  };
  const auto img = nufft1(in, small(32));
  CHECK(spread(img, false) < 1.001);
  CHECK(std::abs(img(16, 16, 16) - 1.0) < 3e-3);
  // A wider kernel is flat over the whole central cube too.
  auto wide = small(32);
  wide.kernel_width = 6.0;
  CHECK(spread(nufft1(in, wide), true) < 1.001);
}

TEST_CASE("gridding and degridding are adjoint") {
  const auto in = random_samples(500, 0.5, 2);
  const auto cfg = small(16);
  const std::size_t g = cfg.grid_size();
  std::vector<double> ones(in.k.size(), 1.0);
  const auto grid = grid_samples(in.s, in.k, ones, cfg);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  ComplexVolume other(g, g, g);
  for (auto& v : other.values()) v = {n(rng), n(rng)};
  const auto back = degrid_samples(other, in.k, cfg);
  std::complex<double> lhs{}, rhs{};
  for (std::size_t i = 0; i < grid.size(); ++i) lhs += std::conj(other.values()[i]) * grid.values()[i];
  for (std::size_t i = 0; i < back.size(); ++i) rhs += std::conj(back[i]) * in.s[i];
  CHECK(std::abs(lhs - rhs) < 1e-10 * std::abs(lhs));
}

TEST_CASE("a linear phase shifts the image") {
  auto in = random_samples(300, 0.2, 4);
  const auto cfg = small(24);
  const auto base = nufft1(in, cfg);
  const int d[3] = {3, -2, 1};
  for (std::size_t i = 0; i < in.k.size(); ++i) {
    in.s[i] *= std::polar(1.0, 2.0 * kPi * (in.k[i].x * d[0] + in.k[i].y * d[1] + in.k[i].z * d[2]));
  }
  const auto moved = nufft1(in, cfg);
  double num = 0.0, den = 0.0;
  for (std::size_t z = 6; z < 18; ++z)
    for (std::size_t y = 6; y < 18; ++y)
      for (std::size_t x = 6; x < 18; ++x) {
        num += std::norm(moved(x, y, z) - base(x + 3, y - 2, z + 1));
        den += std::norm(base(x + 3, y - 2, z + 1));
      }
  CHECK(std::sqrt(num / den) < 2e-3);
}

TEST_CASE("gridding is linear and composes over subsets") {
  const auto a = random_samples(200, 0.5, 5);
  auto b = random_samples(200, 0.5, 6);
  b.k = a.k;
  b.w = a.w;
  const auto cfg = small(16);
  Samples mix = a;
  const std::complex<double> alpha(2.0, -0.5), beta(-1.25, 0.0);
  for (std::size_t i = 0; i < mix.s.size(); ++i) mix.s[i] = alpha * a.s[i] + beta * b.s[i];
  const auto ia = nufft1(a, cfg), ib = nufft1(b, cfg), im = nufft1(mix, cfg);
  double worst = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < im.size(); ++i) {
    worst = std::max(worst, std::abs(im.values()[i] - (alpha * ia.values()[i] + beta * ib.values()[i])));
    scale = std::max(scale, std::abs(im.values()[i]));
  }
  CHECK(worst < 1e-12 * scale);

  // The grid of a union is the sum of the grids of its parts.
  Samples first = a, second = a;
  first.k.resize(120), first.s.resize(120), first.w.resize(120);
  second.k.erase(second.k.begin(), second.k.begin() + 120);
  second.s.erase(second.s.begin(), second.s.begin() + 120);
  second.w.erase(second.w.begin(), second.w.begin() + 120);
  const auto whole = grid_samples(a.s, a.k, a.w, cfg);
  const auto g1 = grid_samples(first.s, first.k, first.w, cfg);
  const auto g2 = grid_samples(second.s, second.k, second.w, cfg);
  double gw = 0.0, gs = 0.0;
  for (std::size_t i = 0; i < whole.size(); ++i) {
    gw = std::max(gw, std::abs(whole.values()[i] - g1.values()[i] - g2.values()[i]));
    gs = std::max(gs, std::abs(whole.values()[i]));
  }
  CHECK(gw < 1e-13 * gs);
}

TEST_CASE("deterministic gridding does not depend on the thread count") {
  const auto in = random_samples(3000, 0.5, 7);
  auto cfg = small(16);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const auto one = nufft1(in, cfg);
  omp_set_num_threads(3);
  const auto three = nufft1(in, cfg);
  cfg.deterministic = false;
  const auto atomic = nufft1(in, cfg);
  omp_set_num_threads(saved);
  CHECK(one == three);
  CHECK(rel_diff(atomic, one) < 1e-12);
}

TEST_CASE("sum of squares combination") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  ComplexVolume a(4, 5, 6);
  for (auto& v : a.values()) v = {g(rng), g(rng)};
  const std::vector<ComplexVolume> one{a};
  const auto s1 = sos_combine(one);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(s1.values()[i] == doctest::Approx(std::abs(a.values()[i])));
  const std::vector<ComplexVolume> twice{a, a};
  const auto s2 = sos_combine(twice);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(s2.values()[i] == doctest::Approx(std::sqrt(2.0) * std::abs(a.values()[i])));
  }
  const std::vector<ComplexVolume> mismatched{a, ComplexVolume(4, 5, 5)};
  CHECK_THROWS_AS(sos_combine(mismatched), std::invalid_argument);
  CHECK_THROWS_AS(sos_combine(std::span<const ComplexVolume>{}), std::invalid_argument);
}

TEST_CASE("sum of squares of Gaussian noise follows a chi distribution") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(0.0, 1.5);
  std::vector<ComplexVolume> coils(4, ComplexVolume(100, 100, 100));
  for (auto& c : coils)
    for (auto& v : c.values()) v = {g(rng), g(rng)};
  const auto s = sos_combine(coils);
  const double mean = std::accumulate(s.values().begin(), s.values().end(), 0.0) / static_cast<double>(s.size());
  const double chi8 = std::sqrt(2.0) * std::tgamma(4.5) / std::tgamma(4.0);
  CHECK(mean == doctest::Approx(1.5 * chi8).epsilon(0.01));
}

TEST_CASE("density compensation") {
  const auto traj = generate_phyllotaxis(200, 22, 64, 0.004);
  const auto all = imaging_spokes(traj);
  const auto w = density_compensation(traj, all, all.size());
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  CHECK(total == doctest::Approx(64.0 * static_cast<double>(all.size())).epsilon(0.03));

  std::vector<std::size_t> subset;
  for (std::size_t i = 0; i < all.size(); i += 7) subset.push_back(all[i]);
  const auto ws = density_compensation(traj, subset, all.size());
  const double ratio = static_cast<double>(all.size()) / static_cast<double>(subset.size());
  for (std::size_t s = 0; s < subset.size(); ++s) {
    for (std::size_t j = 0; j < 64; ++j) {
      CHECK(ws[s * 64 + j] == doctest::Approx(w[s * 7 * 64 + j] * ratio).epsilon(1e-12));
    }
  }
  // Weights grow with the square of the radius off center.
  CHECK(w[64 + 40] / w[64 + 36] == doctest::Approx(64.0 / 16.0));
  CHECK_THROWS_AS(density_compensation(traj, std::vector<std::size_t>{}, 10), std::invalid_argument);
}

TEST_CASE("point spread function of the compensated trajectory") {
  // Long interleaves leave only a small polar cap to the SI readouts.
  const auto traj = generate_phyllotaxis(30, 220, 64, 0.004);
  const auto spokes = imaging_spokes(traj);
  const auto w = density_compensation(traj, spokes, spokes.size());
  Samples in;
  for (std::size_t s = 0; s < spokes.size(); ++s) {
    for (std::size_t j = 0; j < 64; ++j) {
      in.k.push_back(traj.sample_location(spokes[s], j));
      in.s.push_back({1.0, 0.0});
      in.w.push_back(w[s * 64 + j]);
    }
  }
  const auto psf = nufft1(in, small(64));
  // Transform of the ball |k| < 1/2, normalized at the origin.
  auto ball = [](double r) {
    const double p = kPi * r;
    return p < 1e-9 ? 1.0 : 3.0 * (std::sin(p) - p * std::cos(p)) / (p * p * p);
  };
  const double peak = psf(32, 32, 32).real();
  for (const auto& [x, y, z] : std::vector<std::array<std::size_t, 3>>{{33, 32, 32}, {32, 33, 32}, {32, 32, 33}, {33, 33, 32}, {33, 33, 33}}) {
    const double r = Vec3{x - 32.0, y - 32.0, z - 32.0}.norm();
    CHECK(std::abs(psf(x, y, z).real() / peak - ball(r)) < 0.05);
  }
}

TEST_CASE("angular weight has unit mean over the pattern") {
  const auto traj = generate_phyllotaxis(2000, 25, 8, 0.004);
  const auto spokes = imaging_spokes(traj);
  double sum = 0.0;
  for (auto s : spokes) sum += phyllotaxis_angular_weight(traj.directions[s]);
  CHECK(sum / static_cast<double>(spokes.size()) == doctest::Approx(1.0).epsilon(0.01));
  CHECK(phyllotaxis_angular_weight({0, 0, 1}) == doctest::Approx(kPi * kPi / 8.0));
  CHECK(phyllotaxis_angular_weight({1, 0, 0}) == doctest::Approx(kPi / 4.0));
}

TEST_CASE("uniform ball reconstructs to its amplitude") {
  PhantomScene s;
  s.ellipsoids = {{"ball", {0, 0, 0}, {70, 70, 70}, 1.7, 0.0, {}}};
  s.unit_coils = true;
  const AcquisitionGeometry geom{256.0, 32};
  const auto traj = generate_phyllotaxis(100, 40, 64, 0.004);
  const auto acq = sample_kspace(s, traj, geom);
  auto cfg = small(32);
  const auto spokes = imaging_spokes(traj);
  const auto vol = reconstruct(acq.kspace, traj, spokes, cfg, geom);
  // One coil of unit sensitivity contributes per coil; four identical coils add in quadrature.
  double mean = 0.0;
  for (std::size_t z = 14; z < 18; ++z)
    for (std::size_t y = 14; y < 18; ++y)
      for (std::size_t x = 14; x < 18; ++x) mean += vol.voxels(x, y, z);
  mean /= 64.0;
  CHECK(mean / 2.0 == doctest::Approx(1.7).epsilon(0.05));
  CHECK(vol.provenance.n_spokes_used == spokes.size());
  CHECK(vol.voxel_mm == doctest::Approx(8.0));

  // A sparse subset keeps the intensity scale.
  std::vector<std::size_t> subset;
  for (std::size_t il = 0; il < 100; il += 10)
    for (std::size_t r = 1; r < 40; ++r) subset.push_back(traj.spoke_index(il, r));
  const auto part = reconstruct(acq.kspace, traj, subset, cfg, geom, "simba", 12);
  double pmean = 0.0;
  for (std::size_t z = 14; z < 18; ++z)
    for (std::size_t y = 14; y < 18; ++y)
      for (std::size_t x = 14; x < 18; ++x) pmean += part.voxels(x, y, z);
  pmean /= 64.0;
  CHECK(pmean == doctest::Approx(mean).epsilon(0.05));
  CHECK(part.provenance.method == "simba");
  CHECK(part.provenance.k_selected == 12);
}

TEST_CASE("static scene: sparse subset stays close to the full reconstruction") {
  PhantomScene s = default_scene();
  s.noise_sigma = 0.0;
  for (auto& e : s.ellipsoids) {
    e.cardiac_scaling = 0.0;
    e.respiratory_shift = {};
  }
  const AcquisitionGeometry geom{256.0, 48};
  const auto traj = generate_phyllotaxis(300, 22, 64, 0.004);
  const auto acq = sample_kspace(s, traj, geom);
  const auto cfg = small(48);
  const auto full = reconstruct(acq.kspace, traj, imaging_spokes(traj), cfg, geom);
  std::vector<std::size_t> subset;
  for (std::size_t il = 0; il < 300; il += 2)
    for (std::size_t r = 1; r < 22; ++r) subset.push_back(traj.spoke_index(il, r));
  const auto half = reconstruct(acq.kspace, traj, subset, cfg, geom);
  CHECK(oracle::nrmse_central(half.voxels, full.voxels, 0.5) < 0.05);
}

TEST_CASE("reconstruct rejects bad input") {
  PhantomScene s = default_scene();
  const AcquisitionGeometry geom{256.0, 16};
  const auto traj = generate_phyllotaxis(10, 5, 16, 0.004);
  const auto acq = sample_kspace(s, traj, geom);
  const auto cfg = small(16);
  CHECK_THROWS_AS(reconstruct(acq.kspace, traj, std::vector<std::size_t>{}, cfg, geom), std::invalid_argument);
  CHECK_THROWS_AS(reconstruct(acq.kspace, traj, std::vector<std::size_t>{50}, cfg, geom), std::invalid_argument);
  const auto other = generate_phyllotaxis(10, 6, 16, 0.004);
  CHECK_THROWS_AS(reconstruct(acq.kspace, other, imaging_spokes(other), cfg, geom), std::invalid_argument);
  CHECK_THROWS_AS(reconstruct(acq.kspace, traj, imaging_spokes(traj), small(24), geom), std::invalid_argument);
  GriddingConfig bad = cfg;
  bad.oversampling = 1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  Samples out_of_range;
  out_of_range.k = {{0.6, 0, 0}};
  out_of_range.s = {{1, 0}};
  out_of_range.w = {1};
  CHECK_THROWS_AS(nufft1(out_of_range, cfg), std::invalid_argument);
  CHECK(small(96).grid_size() == 192);
  GriddingConfig odd = small(15);
  odd.oversampling = 1.5;
  CHECK(odd.grid_size() == 24);
}

}
