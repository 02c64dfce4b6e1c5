#pragma once

#include <cstddef>
#include <vector>

namespace simba {

/// Kaiser-Bessel shape parameter for a given kernel width (grid units) and
/// oversampling ratio, chosen to place the first aliased sidelobe at the
/// edge of the oversampled field of view.
double kaiser_bessel_beta(double width, double oversampling);

/// Separable Kaiser-Bessel gridding kernel, normalized to 1 at the origin and
/// tabulated for fast linear interpolation.
class KaiserBesselKernel {
 public:
  KaiserBesselKernel(double width, double oversampling, std::size_t table_per_unit = 4096);

  double width() const { return width_; }
  double beta() const { return beta_; }

  /// Kernel value at distance d (grid units); zero for |d| > width / 2.
  double operator()(double d) const;
  /// Exact kernel value, no table.
  double exact(double d) const;
  /// Continuous Fourier transform of the kernel at frequency nu (cycles per grid unit).
  double fourier(double nu) const;

 private:
  double width_;
  double beta_;
  double norm_;
  double table_scale_;
  std::vector<double> table_;
};

}  // namespace simba
