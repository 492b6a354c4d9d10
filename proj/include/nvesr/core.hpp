#pragma once

// Units, physical constants, grids and the dataset containers shared by the
// rest of the library.
//
// Conventions used throughout nvesr:
//   * frequencies and rates inside the library are angular (rad/s) unless a
//     name says otherwise (`_hz`, `_mhz`);
//   * magnetic fields at the API surface are in gauss and only converted to
//     tesla inside physics formulas.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nvesr {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kTeslaPerGauss = 1e-4;

/// Thrown when a numerical procedure fails (non-convergence, divergence,
/// step-size underflow). Precondition violations use std::invalid_argument.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PhysicalConstants {
  /// NV ground-state zero-field splitting D, Hz.
  double zero_field_splitting_hz = 2.87e9;
  /// Electron gyromagnetic ratio, rad s^-1 T^-1. Default is 2pi x 28 GHz/T,
  /// i.e. 2.80 MHz/G per sublevel and 5.60 MHz/G for the +-1 pair.
  double gamma_e = kTwoPi * 2.80e10;
  /// hbar, J s.
  double hbar = 1.054571817e-34;
  /// mu0 / 4pi, T m / A.
  double mu0_over_4pi = 1e-7;
  /// Number density of carbon atoms in diamond, m^-3 (ppm conversions).
  double diamond_atom_density = 1.76e29;

  /// Zeeman shift of one NV sublevel per gauss, Hz/G.
  [[nodiscard]] double zeeman_per_gauss_hz() const {
    return gamma_e * kTeslaPerGauss / kTwoPi;
  }
  /// D as an angular frequency.
  [[nodiscard]] double zero_field_splitting() const {
    return kTwoPi * zero_field_splitting_hz;
  }
  /// mu0 hbar gamma_e^2 / 4pi, rad s^-1 m^3. Divided by r^3 this is the
  /// electron-electron dipolar coupling strength.
  [[nodiscard]] double dipolar_prefactor() const {
    return mu0_over_4pi * hbar * gamma_e * gamma_e;
  }

  /// Throws std::invalid_argument unless every constant is positive.
  void validate() const;
};

[[nodiscard]] constexpr double gauss_to_tesla(double gauss) { return gauss * kTeslaPerGauss; }
[[nodiscard]] constexpr double tesla_to_gauss(double tesla) { return tesla / kTeslaPerGauss; }
[[nodiscard]] constexpr double hz_to_angular(double hz) { return kTwoPi * hz; }
[[nodiscard]] constexpr double angular_to_hz(double omega) { return omega / kTwoPi; }
[[nodiscard]] constexpr double angular_to_mhz(double omega) { return omega / kTwoPi * 1e-6; }
[[nodiscard]] constexpr double mhz_to_angular(double mhz) { return kTwoPi * mhz * 1e6; }

/// Electron Zeeman frequency omega0 = gamma_e B0, rad/s. Rejects b0 < 0.
[[nodiscard]] double zeeman_frequency(double b0_gauss, const PhysicalConstants& c = {});

/// Offset variable Omega0 = 2pi D - 2 omega0 used by the convolution model.
[[nodiscard]] double omega0_offset(double b0_gauss, const PhysicalConstants& c = {});

/// Field at which the |0> <-> |-1> NV transition matches a free electron,
/// B0 = pi D / gamma_e, gauss.
[[nodiscard]] double electron_resonance_field(const PhysicalConstants& c = {});

/// n equally spaced points from min to max inclusive.
[[nodiscard]] std::vector<double> make_uniform_grid(double min, double max, std::size_t n);

/// n logarithmically spaced points from min to max inclusive (min > 0).
[[nodiscard]] std::vector<double> make_log_grid(double min, double max, std::size_t n);

/// True when consecutive spacings agree to `rel_tol` of the mean spacing. The
/// default tolerates grids read back from 9-digit text.
[[nodiscard]] bool is_uniform(std::span<const double> grid, double rel_tol = 1e-4);

/// Composite trapezoidal rule.
[[nodiscard]] double trapezoid(std::span<const double> x, std::span<const double> y);

/// Axial field values of a sweep, gauss. Strictly increasing and positive.
class FieldSweep {
 public:
  FieldSweep() = default;
  explicit FieldSweep(std::vector<double> b0_gauss);
  static FieldSweep uniform(double min_gauss, double max_gauss, std::size_t n);

  [[nodiscard]] const std::vector<double>& values() const { return b0_; }
  [[nodiscard]] std::size_t size() const { return b0_.size(); }
  [[nodiscard]] double operator[](std::size_t i) const { return b0_[i]; }
  /// omega0 = gamma_e B0 for every point.
  [[nodiscard]] std::vector<double> zeeman_frequencies(const PhysicalConstants& c = {}) const;

 private:
  std::vector<double> b0_;
};

/// Dark-time axis, seconds. Strictly increasing, first value >= 0.
class TimeGrid {
 public:
  TimeGrid() = default;
  explicit TimeGrid(std::vector<double> seconds);
  static TimeGrid logarithmic(double min_s, double max_s, std::size_t n);

  [[nodiscard]] const std::vector<double>& values() const { return t_; }
  [[nodiscard]] std::size_t size() const { return t_.size(); }
  [[nodiscard]] double operator[](std::size_t i) const { return t_[i]; }

 private:
  std::vector<double> t_;
};

/// Contrast-vs-dark-time samples for one field point.
struct DecayCurve {
  double field_gauss = 0.0;
  std::vector<double> contrast;
  double noise_sigma = 0.0;
};

/// Non-negative density sampled on a uniform angular-frequency grid.
class SpectralDensity {
 public:
  SpectralDensity() = default;
  /// Rejects non-uniform grids, size mismatch and negative values.
  SpectralDensity(std::vector<double> omega, std::vector<double> values);

  [[nodiscard]] const std::vector<double>& omega() const { return omega_; }
  [[nodiscard]] const std::vector<double>& values() const { return values_; }
  [[nodiscard]] std::size_t size() const { return omega_.size(); }
  [[nodiscard]] double spacing() const;
  /// Trapezoidal integral over the grid.
  [[nodiscard]] double norm() const { return norm_; }

 private:
  std::vector<double> omega_;
  std::vector<double> values_;
  double norm_ = 0.0;
};

/// Independent random stream for (seed, index). Streams depend only on these
/// two values, never on thread scheduling.
[[nodiscard]] std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t index);

/// Runs fn(i) for i in [0, n) on `workers` threads using contiguous chunks.
/// Exceptions thrown by fn are rethrown on the calling thread.
void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& fn);

}  // namespace nvesr
