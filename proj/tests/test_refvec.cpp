#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>

#include "simba/error.hpp"
#include "simba/phantom.hpp"
#include "simba/refvec.hpp"
#include "simba/trajectory.hpp"

using namespace simba;

namespace {

KSpaceData random_kspace(std::size_t n_coils, std::size_t n_il, std::size_t n_ro, std::size_t n_s,
                         std::uint64_t seed) {
  KSpaceData ks;
  ks.n_coils = n_coils;
  ks.n_interleaves = n_il;
  ks.n_readouts = n_ro;
  ks.n_samples = n_s;
  ks.tr = 0.004;
  ks.samples.resize(n_coils * n_il * n_ro * n_s);
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g;
  for (auto& v : ks.samples) v = {g(rng), g(rng)};
  return ks;
}

const std::array<std::size_t, 4> kAllCoils{0, 1, 2, 3};

}  // namespace

TEST_SUITE("refvec") {

TEST_CASE("constant readout projects to the center index") {
  std::vector<std::complex<double>> s(64, {1.0, 0.0});
  const auto p = si_projection(std::span<const std::complex<double>>(s));
  REQUIRE(p.size() == 64);
  CHECK(p[32] == doctest::Approx(1.0));
  for (std::size_t m = 0; m < 64; ++m) {
    if (m != 32) CHECK(std::abs(p[m]) < 1e-12);
  }
}

TEST_CASE("a linear phase moves the peak") {
  for (int shift : {-7, 3, 20}) {
    std::vector<std::complex<double>> s(64);
    for (int j = 0; j < 64; ++j) s[j] = std::polar(2.0, 2.0 * kPi * shift * j / 64.0);
    const auto p = si_projection(std::span<const std::complex<double>>(s));
    const auto peak = std::max_element(p.begin(), p.end()) - p.begin();
    CHECK(peak == 32 - shift);
    CHECK(p[static_cast<std::size_t>(peak)] == doctest::Approx(2.0));
  }
}

TEST_CASE("projection matches a direct sum") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  for (std::size_t n : {16u, 17u, 128u}) {
    std::vector<std::complex<double>> s(n);
    for (auto& v : s) v = {g(rng), g(rng)};
    const auto p = si_projection(std::span<const std::complex<double>>(s));
    const double c = static_cast<double>(n / 2);
    for (std::size_t m = 0; m < n; ++m) {
      std::complex<double> acc{};
      for (std::size_t j = 0; j < n; ++j) {
        acc += s[j] * std::polar(1.0, 2.0 * kPi * (static_cast<double>(j) - c) * (static_cast<double>(m) - c) /
                                          static_cast<double>(n));
      }
      CHECK(p[m] == doctest::Approx(std::abs(acc) / static_cast<double>(n)).epsilon(1e-10));
    }
  }
}

TEST_CASE("forward difference and standardize") {
  const std::vector<double> p{1, 4, 9, 16};
  CHECK(forward_difference(p) == std::vector<double>{3, 5, 7});
  CHECK(forward_difference(std::vector<double>{1.0}).empty());

  std::vector<double> b{2, 4, 4, 4, 5, 5, 7, 9};
  standardize(b);
  double mean = 0, var = 0;
  for (double v : b) mean += v;
  mean /= 8;
  for (double v : b) var += (v - mean) * (v - mean);
  CHECK(std::abs(mean) < 1e-15);
  CHECK(var / 8 == doctest::Approx(1.0));
  CHECK(b[0] == doctest::Approx(-1.5));

  std::vector<double> flat(10, 3.25);
  standardize(flat);
  for (double v : flat) CHECK(v == 0.0);

  // Positive affine maps of a block standardize to the same values.
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  std::vector<double> x(50), y(50);
  for (std::size_t i = 0; i < 50; ++i) {
    x[i] = g(rng);
    y[i] = 17.5 * x[i] - 3.0;
  }
  standardize(x);
  standardize(y);
  for (std::size_t i = 0; i < 50; ++i) CHECK(x[i] == doctest::Approx(y[i]).epsilon(1e-12));
}

TEST_CASE("reference matrix shape and block statistics") {
  const auto ks = random_kspace(4, 12, 5, 32, 2);
  const auto ref = build_reference_matrix(ks, kAllCoils);
  CHECK(ref.data.rows() == 4 * 31);
  CHECK(ref.data.cols() == 12);
  CHECK(ref.block_length == 31);
  for (Eigen::Index c = 0; c < 12; ++c) {
    for (Eigen::Index b = 0; b < 4; ++b) {
      const auto block = ref.data.col(c).segment(b * 31, 31);
      CHECK(std::abs(block.mean()) < 1e-12);
      CHECK((block.array() - block.mean()).square().mean() == doctest::Approx(1.0));
    }
  }
}

TEST_CASE("blocks follow the coil order") {
  const auto ks = random_kspace(4, 6, 3, 16, 3);
  const std::array<std::size_t, 2> ab{1, 3};
  const std::array<std::size_t, 2> ba{3, 1};
  const auto r1 = build_reference_matrix(ks, ab);
  const auto r2 = build_reference_matrix(ks, ba);
  CHECK(r1.data.topRows(15) == r2.data.bottomRows(15));
  CHECK(r1.data.bottomRows(15) == r2.data.topRows(15));
}

TEST_CASE("columns depend only on their own SI readout") {
  auto ks = random_kspace(4, 10, 4, 24, 5);
  const auto before = build_reference_matrix(ks, kAllCoils);
  // Imaging readouts do not enter the matrix.
  for (std::size_t c = 0; c < 4; ++c)
    for (auto& v : ks.readout(c, 7 * 4 + 2)) v *= 5.0f;
  CHECK(build_reference_matrix(ks, kAllCoils).data == before.data);
  // Changing interleaf 7's SI readout changes column 7 only.
  for (auto& v : ks.readout(2, 7 * 4)) v += std::complex<float>(0.5f, -1.0f);
  const auto after = build_reference_matrix(ks, kAllCoils);
  for (Eigen::Index c = 0; c < 10; ++c) {
    if (c == 7) CHECK(after.data.col(c) != before.data.col(c));
    else CHECK(after.data.col(c) == before.data.col(c));
  }
}

TEST_CASE("identical SI readouts give identical columns") {
  auto ks = random_kspace(4, 5, 3, 20, 6);
  for (std::size_t c = 0; c < 4; ++c) {
    const auto src = ks.readout(c, 1 * 3);
    auto dst = ks.readout(c, 4 * 3);
    std::copy(src.begin(), src.end(), dst.begin());
  }
  const auto ref = build_reference_matrix(ks, kAllCoils);
  CHECK(ref.data.col(1) == ref.data.col(4));
}

TEST_CASE("reference matrix ignores a complex gain per coil") {
  auto ks = random_kspace(4, 8, 3, 32, 7);
  const auto a = build_reference_matrix(ks, kAllCoils);
  for (std::size_t c = 0; c < 4; ++c) {
    const auto gain = std::polar(0.5f + static_cast<float>(c), 0.7f * static_cast<float>(c));
    for (std::size_t s = 0; s < ks.n_spokes(); ++s)
      for (auto& v : ks.readout(c, s)) v *= gain;
  }
  const auto b = build_reference_matrix(ks, kAllCoils);
  CHECK((a.data - b.data).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("malformed input") {
  auto ks = random_kspace(4, 4, 3, 16, 8);
  ks.si_index = 3;
  CHECK_THROWS_AS(build_reference_matrix(ks, kAllCoils), MalformedInput);
  ks.si_index = 0;
  ks.samples.pop_back();
  CHECK_THROWS_AS(build_reference_matrix(ks, kAllCoils), MalformedInput);
  ks = random_kspace(4, 4, 3, 16, 8);
  const std::array<std::size_t, 2> dup{1, 1};
  CHECK_THROWS_AS(build_reference_matrix(ks, dup), std::invalid_argument);
  const std::array<std::size_t, 1> out_of_range{4};
  CHECK_THROWS_AS(build_reference_matrix(ks, out_of_range), std::invalid_argument);
  CHECK_THROWS_AS(build_reference_matrix(ks, std::span<const std::size_t>{}), std::invalid_argument);
}

TEST_CASE("SI projections track the liver dome") {
  PhantomScene s = default_scene();
  s.noise_sigma = 0.0;
  s.unit_coils = true;
  const AcquisitionGeometry geom;
  const auto traj = generate_phyllotaxis(300, 22, 128, 0.00334);
  const auto acq = sample_kspace(s, traj, geom);
  const double vox = geom.voxel_mm();
  const double c = 64.0;
  // Window around the liver dome, clear of the heart's inferior edge.
  const auto lo = static_cast<std::size_t>(std::ceil(c - 52.0 / vox));
  const auto hi = static_cast<std::size_t>(std::floor(c - 25.0 / vox));

  const auto reference = si_projection(acq.kspace.readout(0, 0));
  auto ref_at = [&](double x) {
    const auto i = static_cast<std::size_t>(std::floor(x));
    const double f = x - static_cast<double>(i);
    return (1.0 - f) * reference[i] + f * reference[i + 1];
  };
  double worst = 0.0;
  for (std::size_t il = 0; il < traj.n_interleaves; il += 3) {
    const std::size_t spoke = traj.spoke_index(il, 0);
    const auto p = si_projection(acq.kspace.readout(0, spoke));
    double best = 1e300, best_shift = 0.0;
    for (double sh = -8.0; sh <= 2.0; sh += 0.02) {
      double ss = 0.0;
      for (std::size_t m = lo; m <= hi; ++m) {
        const double d = p[m] - ref_at(static_cast<double>(m) - sh);
        ss += d * d;
      }
      if (ss < best) {
        best = ss;
        best_shift = sh;
      }
    }
    const double expected = -acq.labels.readouts[spoke].respiratory_displacement / vox;
    worst = std::max(worst, std::abs(best_shift - expected));
  }
  CHECK(worst < 1.0);
}

}
