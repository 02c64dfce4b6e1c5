// Acceptance run: one PASS/FAIL line per criterion. Exit status is the number of failures.

#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "simba/cluster.hpp"
#include "simba/config.hpp"
#include "simba/io.hpp"
#include "simba/metrics.hpp"
#include "simba/parallel.hpp"
#include "simba/pca.hpp"
#include "simba/pipeline.hpp"
#include "simba/recon.hpp"
#include "simba/trajectory.hpp"

namespace {

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  std::printf("[%s] %2d %-34s %s\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string f(const char* fmt, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, fmt, a, b, c, d);
  return buf;
}

simba::RunConfig default_run(std::uint64_t seed) {
  simba::RunConfig cfg;
  cfg.scene.seed = seed;
  return cfg;
}

double selected_window_fraction(const simba::ExperimentResult& r) {
  std::vector<double> phases;
  for (auto s : r.simba.spokes) phases.push_back(r.acquisition.labels.readouts[s].cardiac_phase);
  return simba::max_cardiac_window_fraction(phases, 0.4);
}

std::string experiment_bytes(const simba::ExperimentResult& r) {
  return simba::encode_volume_raw(r.alldata.volume.voxels) +
         simba::encode_volume_sidecar(r.alldata.volume, r.alldata.meta) +
         simba::encode_volume_raw(r.simba.volume.voxels) + simba::encode_volume_sidecar(r.simba.volume, r.simba.meta) +
         r.report_csv + r.report_text + r.cluster_report;
}

void criteria_end_to_end() {
  const auto run0 = simba::run_experiment(default_run(0));
  const double sharp_all = run0.alldata_metrics.sharpness ? run0.alldata_metrics.sharpness->average : 0.0;
  const double sharp_simba = run0.simba_metrics.sharpness ? run0.simba_metrics.sharpness->average : 0.0;
  const double ratio = sharp_all > 0 ? sharp_simba / sharp_all : 0.0;
  report(1, "end-to-end motion suppression", ratio >= 1.2,
         f("sharpness simba %.3f / alldata %.3f = %.3f (need >= 1.2)", sharp_simba, sharp_all, ratio));

  const auto& sel = *run0.simba.selection;
  const double frac = static_cast<double>(sel.assignment.largest_cluster.size()) /
                      static_cast<double>(run0.acquisition.kspace.n_interleaves);
  const bool k_ok = sel.k_star >= 10 && sel.k_star <= 14;
  report(2, "data-selection fraction", frac >= 0.07 && frac <= 0.30 && k_ok,
         f("largest cluster %.2f%% in [7%%, 30%%], k* = %.0f in [10, 14]", 100 * frac, sel.k_star));

  const auto& prov = *run0.simba_metrics.provenance;
  const double window = selected_window_fraction(run0);
  report(3, "physiological purity", prov.end_expiratory_fraction >= 0.75 && window >= 0.75,
         f("end-expiratory %.1f%% (>= 75%%), best 40%% cardiac window %.1f%% (>= 75%%)",
           100 * prov.end_expiratory_fraction, 100 * window));

  // Sampling uniformity ordering on every phantom run, plus the full-size phyllotaxis.
  bool order_ok = true;
  std::string detail;
  auto check_order = [&](const simba::ExperimentResult& r, int seed) {
    const double full = r.alldata_metrics.uniformity->rsd;
    const double sub = r.simba_metrics.uniformity->rsd;
    order_ok = order_ok && full < sub;
    detail += f("seed %.0f: %.2f%% < %.2f%%; ", seed, 100 * full, 100 * sub);
  };
  check_order(run0, 0);
  for (int seed : {1, 2}) check_order(simba::run_experiment(default_run(seed)), seed);
  const auto big = simba::generate_phyllotaxis(5749, 22, 2, 0.00334);
  const auto dirs = simba::gather_directions(big, simba::imaging_spokes(big));
  const double rsd_big = simba::great_circle_uniformity(dirs).rsd;
  report(4, "sampling uniformity ordering", order_ok && rsd_big >= 0.049 && rsd_big <= 0.069,
         detail + f("5749x22 RSD %.2f%% in [4.9%%, 6.9%%]", 100 * rsd_big));

  const auto run0b = simba::run_experiment(default_run(0));
  const bool same = experiment_bytes(run0) == experiment_bytes(run0b);
  report(10, "determinism", same, same ? "volumes and reports byte-identical across two runs"
                                       : "outputs differ between identical runs");
}

void criterion_nyquist() {
  const double a = simba::radial_nyquist_fraction(126478, 192);
  const double b = simba::radial_nyquist_fraction(14354, 192);
  report(5, "Nyquist arithmetic", a >= 2.0 && a <= 2.4 && b >= 0.21 && b <= 0.30,
         f("126478 spokes -> %.3f in [2.0, 2.4]; 14354 -> %.3f in [0.21, 0.30]", a, b));
}

void criterion_gridding() {
  // Same spoke count as the default run, but with 220 readouts per interleaf
  // so the polar cap vacated by the SI readouts stays small (about 6 degrees).
  simba::RunConfig cfg;
  cfg.n_interleaves = 100;
  cfg.n_readouts = 220;
  cfg.scene.noise_sigma = 0.0;
  cfg.scene.unit_coils = true;
  for (auto& e : cfg.scene.ellipsoids) {
    e.cardiac_scaling = 0.0;
    e.respiratory_shift = {0, 0, 0};
  }
  const auto traj = simba::make_trajectory(cfg);
  auto acq = simba::simulate(cfg, traj);
  auto& k = acq.kspace;
  k.samples.resize(k.n_spokes() * k.n_samples);  // keep coil 0 only
  k.n_coils = 1;
  const auto spokes = simba::imaging_spokes(traj);
  const auto vol = simba::reconstruct(k, traj, spokes, cfg.gridding, cfg.geometry);
  const auto truth = oracle::rasterize(cfg.scene, cfg.geometry.fov_mm, cfg.geometry.matrix_size, 4);
  const double err = oracle::nrmse_central(vol.voxels, truth, 0.8);

  // Adjoint identity on random data.
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::normal_distribution<double> g;
  simba::GriddingConfig gc;
  gc.matrix_size = 16;
  const std::size_t n_pts = 500;
  std::vector<simba::Vec3> coords(n_pts);
  std::vector<std::complex<double>> x(n_pts);
  std::vector<double> ones(n_pts, 1.0);
  for (std::size_t i = 0; i < n_pts; ++i) {
    coords[i] = {u(rng), u(rng), u(rng)};
    x[i] = {g(rng), g(rng)};
  }
  const std::size_t G = gc.grid_size();
  simba::Array3<std::complex<double>> y(G, G, G);
  for (auto& v : y.values()) v = {g(rng), g(rng)};
  const auto gx = simba::grid_samples(x, coords, ones, gc);
  const auto dy = simba::degrid_samples(y, coords, gc);
  std::complex<double> lhs{}, rhs{};
  for (std::size_t i = 0; i < gx.size(); ++i) lhs += std::conj(y.values()[i]) * gx.values()[i];
  for (std::size_t i = 0; i < n_pts; ++i) rhs += std::conj(dy[i]) * x[i];
  const double rel = std::abs(lhs - rhs) / std::abs(lhs);
  report(6, "gridding fidelity oracle", err < 0.10 && rel < 1e-6,
         f("static NRMSE %.2f%% (< 10%%), adjoint mismatch %.2e (< 1e-6)", 100 * err, rel));
}

void criterion_kmeans() {
  int optimal = 0;
  int below = 0;
  for (int seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(1000 + seed);
    const int n = 3 + seed % 6;  // 3..8 points
    const int dim = 1 + seed % 3;
    std::normal_distribution<double> g;
    Eigen::MatrixXd pts(dim, n);
    for (int c = 0; c < n; ++c)
      for (int r = 0; r < dim; ++r) pts(r, c) = g(rng);
    const double best = oracle::brute_force_two_means(pts);
    simba::KMeansOptions opts;
    opts.n_init = 10;
    const auto a = simba::kmeans(pts, 2, static_cast<std::uint64_t>(seed), opts);
    if (std::abs(a.inertia - best) <= 1e-9 * std::max(1.0, best)) ++optimal;
    if (a.inertia < best - 1e-9 * std::max(1.0, best)) ++below;
  }
  report(7, "clustering oracle", optimal >= 95 && below == 0,
         f("optimal inertia in %.0f/100 seeds (>= 95), below optimum %.0f times", optimal, below));
}

void criterion_pca() {
  double worst = 0.0;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::MatrixXd s(40, 100);
    for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = g(rng);
    const auto red = simba::reduce(s, 20, false);
    const Eigen::MatrixXd c = simba::center_rows(s);
    const auto ev = oracle::jacobi_eigenvalues(c * c.transpose());
    for (std::size_t j = 0; j < red.singular_values.size(); ++j) {
      const double sq = red.singular_values[j] * red.singular_values[j];
      worst = std::max(worst, std::abs(sq - ev[j]) / ev[j]);
    }
  }
  Eigen::VectorXd a(40), b(100);
  for (auto& v : a) v = g(rng);
  for (auto& v : b) v = g(rng);
  const Eigen::MatrixXd rank1 = a * b.transpose();
  const auto red1 = simba::reduce(rank1, 20, true);
  const double rest = red1.data.cwiseAbs().maxCoeff();
  report(8, "PCA oracle", worst < 1e-8 && rest <= 1e-9,
         f("max relative eigenvalue error %.2e (< 1e-8); rank-1 residual %.2e (<= 1e-9)", worst, rest));
}

void criterion_metrics() {
  // Known slope on a densely sampled logistic edge.
  const double c_true = 0.8;
  std::vector<double> prof(81);
  for (std::size_t i = 0; i < prof.size(); ++i) {
    const double x = 0.25 * static_cast<double>(i);
    prof[i] = 1.2 + 2.4 / (1.0 + std::exp(-c_true * (x - 9.7)));
  }
  const auto fit = simba::sigmoid_fit(prof, 0.25);
  const double slope_err = std::abs(fit.slope - c_true) / c_true;

  // SoS noise estimate against Monte Carlo truth.
  double worst_sigma = 0.0;
  std::mt19937_64 rng(17);
  for (std::size_t coils : {1u, 4u}) {
    const double sigma = 1.7;
    std::normal_distribution<double> g(0.0, sigma);
    std::vector<double> bg(200000);
    for (auto& v : bg) {
      double acc = 0.0;
      for (std::size_t c = 0; c < 2 * coils; ++c) {
        const double n = g(rng);
        acc += n * n;
      }
      v = std::sqrt(acc);
    }
    worst_sigma = std::max(worst_sigma, std::abs(simba::estimate_noise_sigma(bg, coils) - sigma) / sigma);
  }

  // Contrast ratio on constructed ROIs.
  simba::RealVolume v(10, 10, 10, 0.0);
  simba::Box blood{{0, 0, 0}, {3, 3, 3}};
  simba::Box myo{{5, 5, 5}, {8, 8, 8}};
  for (std::size_t z = 0; z < 10; ++z)
    for (std::size_t y = 0; y < 10; ++y)
      for (std::size_t x = 0; x < 10; ++x) v(x, y, z) = (x < 3 && y < 3 && z < 3) ? 5.0 : 2.0;
  const double cr = simba::contrast_ratio(v, blood, myo);
  const bool cr_ok = cr == (5.0 - 2.0) / 2.0;

  report(9, "metric oracles", slope_err < 0.01 && worst_sigma < 0.02 && cr_ok,
         f("slope error %.3f%% (< 1%%), sigma error %.2f%% (< 2%%), CR %.6f (exact 1.5)", 100 * slope_err,
           100 * worst_sigma, cr));
}

}  // namespace

int main() {
  simba::set_thread_count(simba::thread_count_from_env());
  criterion_nyquist();
  criterion_kmeans();
  criterion_pca();
  criterion_metrics();
  criterion_gridding();
  criteria_end_to_end();
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
