#include "simba/kaiser_bessel.hpp"

#include <cmath>
#include <stdexcept>

#include "simba/geometry.hpp"

namespace simba {

double kaiser_bessel_beta(double width, double oversampling) {
  const double t = width / oversampling * (oversampling - 0.5);
  return kPi * std::sqrt(t * t - 0.8);
}

KaiserBesselKernel::KaiserBesselKernel(double width, double oversampling, std::size_t table_per_unit)
    : width_(width), beta_(kaiser_bessel_beta(width, oversampling)) {
  if (!(width >= 2.0)) throw std::invalid_argument("KaiserBesselKernel: width must be >= 2");
  if (!(oversampling >= 1.25)) throw std::invalid_argument("KaiserBesselKernel: oversampling must be >= 1.25");
  norm_ = std::cyl_bessel_i(0.0, beta_);
  const double half = width_ / 2.0;
  const auto n = static_cast<std::size_t>(std::ceil(half * static_cast<double>(table_per_unit))) + 2;
  table_scale_ = static_cast<double>(table_per_unit);
  table_.resize(n);
  for (std::size_t i = 0; i < n; ++i) table_[i] = exact(static_cast<double>(i) / table_scale_);
}

double KaiserBesselKernel::exact(double d) const {
  const double r = 2.0 * d / width_;
  if (std::abs(r) >= 1.0) return 0.0;
  return std::cyl_bessel_i(0.0, beta_ * std::sqrt(1.0 - r * r)) / norm_;
}

double KaiserBesselKernel::operator()(double d) const {
  const double pos = std::abs(d) * table_scale_;
  if (std::abs(d) >= width_ / 2.0) return 0.0;
  const auto i = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(i);
  return table_[i] + frac * (table_[i + 1] - table_[i]);
}

double KaiserBesselKernel::fourier(double nu) const {
  const double a = beta_ * beta_ - (kPi * width_ * nu) * (kPi * width_ * nu);
  double shape;
  if (a > 1e-12) {
    const double s = std::sqrt(a);
    shape = std::sinh(s) / s;
  } else if (a < -1e-12) {
    const double s = std::sqrt(-a);
    shape = std::sin(s) / s;
  } else {
    shape = 1.0;
  }
  return width_ * shape / norm_;
}

}  // namespace simba
