#pragma once

// Relaxation filter kernels. A kernel is the probe's frequency response
// around its (field-tuned) transition, expressed on the offset variable
// Omega so that it is centred at zero. Kernels are unit-peak; physical
// amplitudes belong to the bath model.

#include <span>
#include <vector>

#include "nvesr/core.hpp"

namespace nvesr {

enum class KernelShape {
  Lorentzian,      ///< G2^2 / (x^2 + G2^2): surface (external) bath
  SqrtLorentzian,  ///< sqrt of the above: bulk (internal) bath
};

[[nodiscard]] const char* to_string(KernelShape shape);
/// Accepts "lorentzian" and "sqrt_lorentzian".
[[nodiscard]] KernelShape parse_kernel_shape(const std::string& name);

class FilterKernel {
 public:
  /// Equal-weight sum of `shape` profiles of half width `gamma2` at each of
  /// `centers` (rad/s), scaled to unit peak and sampled on `grid`.
  FilterKernel(KernelShape shape, double gamma2, std::vector<double> centers, std::vector<double> grid);

  [[nodiscard]] KernelShape shape() const { return shape_; }
  [[nodiscard]] double gamma2() const { return gamma2_; }
  [[nodiscard]] const std::vector<double>& centers() const { return centers_; }
  [[nodiscard]] const std::vector<double>& grid() const { return grid_; }
  [[nodiscard]] const std::vector<double>& samples() const { return samples_; }
  /// Factor that brings the summed profile to unit peak.
  [[nodiscard]] double normalization() const { return normalization_; }

  /// Kernel value at an arbitrary offset.
  [[nodiscard]] double operator()(double omega) const;
  /// Same kernel on a different grid.
  [[nodiscard]] FilterKernel resample(std::vector<double> grid) const;
  /// Odd-length samples at offsets k*spacing, k = -half_width..half_width.
  [[nodiscard]] std::vector<double> centered_taps(double spacing, std::size_t half_width) const;

 private:
  [[nodiscard]] double raw(double omega) const;

  KernelShape shape_;
  double gamma2_;
  std::vector<double> centers_;
  std::vector<double> grid_;
  std::vector<double> samples_;
  double normalization_ = 1.0;
};

/// Unit-peak Lorentzian of FWHM 2 gamma2 centred at zero.
[[nodiscard]] FilterKernel lorentzian_kernel(double gamma2, std::vector<double> grid);

/// Unit-peak square-root Lorentzian centred at zero.
[[nodiscard]] FilterKernel sqrt_lorentzian_kernel(double gamma2, std::vector<double> grid);

/// Kernel set by the probe's free-induction-decay time and hyperfine shifts:
/// gamma2 = 1 / t2_star (rad/s) and one profile per shift (none = centred).
[[nodiscard]] FilterKernel kernel_from_fid(double t2_star, std::vector<double> hyperfine_shifts,
                                           std::vector<double> grid,
                                           KernelShape shape = KernelShape::Lorentzian);

}  // namespace nvesr
