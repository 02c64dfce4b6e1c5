#include "simba/metrics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "simba/error.hpp"

namespace simba {

namespace {

using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;

struct SigmoidProblem {
  std::span<const double> x;
  std::span<const double> y;

  static double logistic(double t) {
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
  }

  // 0.5 * sum of squared residuals, with gradient.
  double evaluate(const Vec4& p, Vec4* grad) const {
    double f = 0.0;
    Vec4 g = Vec4::Zero();
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double dx = x[i] - p[3];
      const double s = logistic(p[2] * dx);
      const double r = p[0] + p[1] * s - y[i];
      f += 0.5 * r * r;
      if (grad != nullptr) {
        const double ds = s * (1.0 - s);
        g[0] += r;
        g[1] += r * s;
        g[2] += r * p[1] * ds * dx;
        g[3] -= r * p[1] * ds * p[2];
      }
    }
    if (grad != nullptr) *grad = g;
    return f;
  }
};

struct Bounds {
  Vec4 lo;
  Vec4 hi;
  Vec4 project(Vec4 p) const { return p.cwiseMax(lo).cwiseMin(hi); }
};

// Projected BFGS with Armijo backtracking along the projection arc.
Vec4 minimize(const SigmoidProblem& problem, Vec4 p, const Bounds& bounds, std::size_t max_iter,
              double* value) {
  p = bounds.project(p);
  Vec4 g;
  double f = problem.evaluate(p, &g);
  Mat4 h = Mat4::Identity();
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    // Variables held at a bound with the gradient pushing outward are fixed.
    std::array<bool, 4> active{};
    for (int i = 0; i < 4; ++i) {
      active[i] = (p[i] <= bounds.lo[i] && g[i] > 0.0) || (p[i] >= bounds.hi[i] && g[i] < 0.0);
    }
    Vec4 d = -(h * g);
    for (int i = 0; i < 4; ++i) {
      if (active[i]) d[i] = 0.0;
    }
    if (d.dot(g) >= 0.0) {
      h.setIdentity();
      d = -g;
      for (int i = 0; i < 4; ++i) {
        if (active[i]) d[i] = 0.0;
      }
    }
    if (d.norm() < 1e-14) break;

    double step = 1.0;
    Vec4 trial;
    Vec4 g_trial;
    double f_trial = f;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      trial = bounds.project(p + step * d);
      f_trial = problem.evaluate(trial, &g_trial);
      if (std::isfinite(f_trial) && f_trial <= f + 1e-4 * g.dot(trial - p)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    const Vec4 s = trial - p;
    const Vec4 yv = g_trial - g;
    const double sy = s.dot(yv);
    const double f_old = f;
    p = trial;
    f = f_trial;
    g = g_trial;
    if (sy > 1e-300) {
      const double rho = 1.0 / sy;
      const Mat4 eye = Mat4::Identity();
      h = (eye - rho * s * yv.transpose()) * h * (eye - rho * yv * s.transpose()) + rho * s * s.transpose();
    }
    if (std::abs(f_old - f) <= 1e-16 * std::max(1.0, std::abs(f)) && s.norm() < 1e-12) break;
  }
  *value = f;
  return p;
}

}  // namespace

SigmoidFit sigmoid_fit(std::span<const double> profile, double spacing_mm, const SigmoidFitOptions& options) {
  if (profile.size() < 2) throw std::invalid_argument("sigmoid_fit: profile too short");
  if (!(spacing_mm > 0.0)) throw std::invalid_argument("sigmoid_fit: spacing must be positive");
  const auto [min_it, max_it] = std::minmax_element(profile.begin(), profile.end());
  const double lo = *min_it;
  const double range = *max_it - lo;
  SigmoidFit result;
  if (!std::isfinite(range)) throw FitFailure("sigmoid_fit: profile contains non-finite values", 0.0);
  if (range <= 1e-12 * std::max(1.0, std::abs(*max_it))) {
    result.a = lo;
    return result;
  }

  const std::size_t n = profile.size();
  std::vector<double> x(n);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = static_cast<double>(i) * spacing_mm;
    y[i] = (profile[i] - lo) / range;
  }
  const double length = x.back();
  const SigmoidProblem problem{x, y};
  const double inf = std::numeric_limits<double>::infinity();
  const Bounds bounds{Vec4(-inf, -inf, 0.0, -length), Vec4(inf, inf, options.max_slope, 2.0 * length)};

  double best_f = inf;
  Vec4 best = Vec4::Zero();
  const double c0 = 8.0 / length;
  for (double sign : {1.0, -1.0}) {
    for (double q : {0.125, 0.375, 0.625, 0.875}) {
      const Vec4 start(sign > 0 ? 0.0 : 1.0, sign, c0, q * length);
      double f = inf;
      const Vec4 p = minimize(problem, start, bounds, options.max_iter, &f);
      if (std::isfinite(f) && f < best_f) {
        best_f = f;
        best = p;
      }
    }
  }
  if (!std::isfinite(best_f)) throw FitFailure("sigmoid_fit: no start converged", best_f);

  result.a = lo + best[0] * range;
  result.b = best[1] * range;
  result.c = best[2];
  result.x0 = best[3];
  result.slope = std::abs(best[2]);
  result.residual = std::sqrt(2.0 * best_f / static_cast<double>(n));
  result.capped = best[2] >= options.max_slope * (1.0 - 1e-9);
  return result;
}

double sample_trilinear(const RealVolume& volume, const Vec3& p) {
  const double coords[3] = {p.x, p.y, p.z};
  const std::size_t dims[3] = {volume.nx(), volume.ny(), volume.nz()};
  std::size_t i0[3];
  double frac[3];
  for (int a = 0; a < 3; ++a) {
    const double c = std::clamp(coords[a], 0.0, static_cast<double>(dims[a] - 1));
    i0[a] = std::min(static_cast<std::size_t>(std::floor(c)), dims[a] > 1 ? dims[a] - 2 : 0);
    frac[a] = dims[a] > 1 ? c - static_cast<double>(i0[a]) : 0.0;
  }
  double acc = 0.0;
  for (int dz = 0; dz < 2; ++dz) {
    for (int dy = 0; dy < 2; ++dy) {
      for (int dx = 0; dx < 2; ++dx) {
        const double w = (dx ? frac[0] : 1.0 - frac[0]) * (dy ? frac[1] : 1.0 - frac[1]) *
                         (dz ? frac[2] : 1.0 - frac[2]);
        if (w == 0.0) continue;
        acc += w * volume(std::min(i0[0] + dx, dims[0] - 1), std::min(i0[1] + dy, dims[1] - 1),
                          std::min(i0[2] + dz, dims[2] - 1));
      }
    }
  }
  return acc;
}

std::vector<double> extract_profile(const RealVolume& volume, const LineSegment& line,
                                    double samples_per_voxel, double* spacing_voxels) {
  const Vec3 delta = line.end - line.start;
  const double length = delta.norm();
  const auto n = static_cast<std::size_t>(std::max(2.0, std::round(length * samples_per_voxel) + 1.0));
  std::vector<double> profile(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(n - 1);
    profile[i] = sample_trilinear(volume, line.start + delta * t);
  }
  if (spacing_voxels != nullptr) *spacing_voxels = length / static_cast<double>(n - 1);
  return profile;
}

SharpnessResult interface_sharpness(const Volume& volume, std::span<const LineSegment> lines,
                                    double samples_per_voxel, const SigmoidFitOptions& options) {
  const auto& v = volume.voxels;
  SharpnessResult result;
  double best_residual = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& line = lines[i];
    for (const Vec3& p : {line.start, line.end}) {
      if (p.x < 0 || p.y < 0 || p.z < 0 || p.x > static_cast<double>(v.nx() - 1) ||
          p.y > static_cast<double>(v.ny() - 1) || p.z > static_cast<double>(v.nz() - 1)) {
        throw std::invalid_argument("interface_sharpness: line " + std::to_string(i + 1) +
                                    " leaves the volume");
      }
    }
    double spacing = 0.0;
    const auto profile = extract_profile(v, line, samples_per_voxel, &spacing);
    try {
      const SigmoidFit fit = sigmoid_fit(profile, spacing * volume.voxel_mm, options);
      result.fits.push_back(fit);
      result.slope_parameters.push_back(fit.slope);
      if (fit.capped) result.warnings.push_back("line " + std::to_string(i + 1) + ": slope capped at bound");
    } catch (const FitFailure& e) {
      best_residual = std::min(best_residual, e.best_residual());
      result.warnings.push_back("line " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  if (result.slope_parameters.empty()) throw FitFailure("interface_sharpness: every fit failed", best_residual);
  if (result.slope_parameters.size() < lines.size()) {
    result.warnings.push_back("averaged over " + std::to_string(result.slope_parameters.size()) + " of " +
                              std::to_string(lines.size()) + " lines");
  }
  double sum = 0.0;
  for (double s : result.slope_parameters) sum += s;
  result.average = sum / static_cast<double>(result.slope_parameters.size());
  return result;
}

void check_box(const RealVolume& volume, const Box& box, const std::string& name) {
  const std::size_t dims[3] = {volume.nx(), volume.ny(), volume.nz()};
  for (int a = 0; a < 3; ++a) {
    if (box.lo[a] >= box.hi[a] || box.hi[a] > dims[a]) {
      throw std::invalid_argument("ROI '" + name + "' is empty or outside the volume");
    }
  }
}

std::vector<double> roi_values(const RealVolume& volume, const Box& box) {
  std::vector<double> out;
  out.reserve(box.count());
  for (std::size_t z = box.lo[2]; z < box.hi[2]; ++z) {
    for (std::size_t y = box.lo[1]; y < box.hi[1]; ++y) {
      for (std::size_t x = box.lo[0]; x < box.hi[0]; ++x) out.push_back(volume(x, y, z));
    }
  }
  return out;
}

double roi_mean(const RealVolume& volume, const Box& box) {
  const auto values = roi_values(volume, box);
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

double contrast_ratio(const RealVolume& volume, const Box& blood, const Box& myocardium) {
  check_box(volume, blood, "blood");
  check_box(volume, myocardium, "myocardium");
  const double b = roi_mean(volume, blood);
  const double m = roi_mean(volume, myocardium);
  if (m == 0.0) throw UndefinedResult("contrast_ratio: myocardium mean is zero");
  return (b - m) / m;
}

double central_chi_mean(std::size_t dof) {
  const double k = static_cast<double>(dof);
  return std::sqrt(2.0) * std::exp(std::lgamma((k + 1.0) / 2.0) - std::lgamma(k / 2.0));
}

double estimate_noise_sigma(std::span<const double> background, std::size_t n_coils) {
  if (background.size() < 2) throw UndefinedResult("estimate_noise_sigma: background ROI too small");
  if (n_coils < 1) throw std::invalid_argument("estimate_noise_sigma: n_coils must be >= 1");
  double mean = 0.0;
  for (double v : background) mean += v;
  mean /= static_cast<double>(background.size());
  double var = 0.0;
  for (double v : background) var += (v - mean) * (v - mean);
  if (var == 0.0) throw UndefinedResult("estimate_noise_sigma: background has zero variance");
  return mean / central_chi_mean(2 * n_coils);
}

SnrCnr snr_cnr(const RealVolume& volume, const Box& signal, const Box& myocardium, const Box& background,
               std::size_t n_coils) {
  check_box(volume, signal, "signal");
  check_box(volume, myocardium, "myocardium");
  check_box(volume, background, "background");
  const auto bg = roi_values(volume, background);
  SnrCnr out;
  out.sigma = estimate_noise_sigma(bg, n_coils);
  const double s = roi_mean(volume, signal);
  const double m = roi_mean(volume, myocardium);
  out.snr = s / out.sigma;
  out.cnr = (s - m) / out.sigma;
  return out;
}

std::string to_string(CardiacCategory c) {
  switch (c) {
    case CardiacCategory::systolic: return "systolic";
    case CardiacCategory::diastolic: return "diastolic";
    case CardiacCategory::mixed: return "mixed";
  }
  return "mixed";
}

std::string to_string(RespiratoryMajority r) {
  return r == RespiratoryMajority::expiration ? "expiration" : "inspiration";
}

namespace {

ProvenanceReport summarize(std::size_t n, std::size_t n_systolic, std::size_t n_end_expiratory) {
  ProvenanceReport rep;
  rep.n_readouts = n;
  if (n == 0) return rep;
  const double dn = static_cast<double>(n);
  rep.systolic_fraction = static_cast<double>(n_systolic) / dn;
  rep.diastolic_fraction = static_cast<double>(n - n_systolic) / dn;
  const double dominant = std::max(rep.systolic_fraction, rep.diastolic_fraction);
  if (dominant < 0.75) {
    rep.cardiac_category = CardiacCategory::mixed;
  } else {
    rep.cardiac_category = rep.systolic_fraction > rep.diastolic_fraction ? CardiacCategory::systolic
                                                                          : CardiacCategory::diastolic;
  }
  rep.end_expiratory_fraction = static_cast<double>(n_end_expiratory) / dn;
  rep.respiratory_majority = rep.end_expiratory_fraction >= 0.5 ? RespiratoryMajority::expiration
                                                                : RespiratoryMajority::inspiration;
  return rep;
}

const ReadoutLabel& label_at(const GroundTruthLabels& labels, std::size_t spoke) {
  if (spoke >= labels.readouts.size()) throw std::invalid_argument("provenance: readout index not labelled");
  return labels.readouts[spoke];
}

}  // namespace

ProvenanceReport provenance(std::span<const std::size_t> selected, const GroundTruthLabels& labels) {
  std::size_t sys = 0;
  std::size_t exp = 0;
  for (auto s : selected) {
    const auto& l = label_at(labels, s);
    if (l.cardiac_bin == CardiacBin::systole) ++sys;
    if (l.respiratory_bin <= 2) ++exp;
  }
  return summarize(selected.size(), sys, exp);
}

double qt_estimate(double rr, double k) { return k * std::sqrt(rr); }

ProvenanceReport provenance_from_ecg(std::span<const std::size_t> selected, const GroundTruthLabels& labels,
                                     double qt_k) {
  const auto& r = labels.r_wave_times;
  if (r.size() < 2) throw std::invalid_argument("provenance_from_ecg: need at least two R-waves");
  constexpr double kQrDuration = 0.050;
  std::size_t sys = 0;
  std::size_t exp = 0;
  for (auto s : selected) {
    const auto& l = label_at(labels, s);
    const double t = static_cast<double>(s) * labels.tr;
    auto it = std::upper_bound(r.begin(), r.end(), t);
    if (it == r.begin()) throw std::invalid_argument("provenance_from_ecg: readout precedes the first R-wave");
    const double prev = *(it - 1);
    const double rr = it != r.end() ? *it - prev : prev - *(it - 2);
    const double systole = qt_estimate(rr, qt_k) - kQrDuration;
    if (t - prev < systole) ++sys;
    if (l.respiratory_bin <= 2) ++exp;
  }
  return summarize(selected.size(), sys, exp);
}

double max_cardiac_window_fraction(std::span<const double> phases, double width) {
  if (phases.empty()) return 0.0;
  std::vector<double> sorted(phases.begin(), phases.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  std::vector<double> unrolled(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    unrolled[i] = sorted[i];
    unrolled[i + n] = sorted[i] + 1.0;
  }
  std::size_t best = 0;
  std::size_t j = 0;
  for (std::size_t i = 0; i < n; ++i) {
    j = std::max(j, i);
    while (j < i + n && unrolled[j] <= unrolled[i] + width) ++j;
    best = std::max(best, j - i);
  }
  return static_cast<double>(best) / static_cast<double>(n);
}

}  // namespace simba
