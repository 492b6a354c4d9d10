#pragma once

// Substitutional-nitrogen (P1) electron spin bath: hyperfine line positions,
// the bath spectral density, coupling statistics and the field-dependent NV
// relaxation rate it produces.
//
// The P1 nuclear quadrupole and nuclear Zeeman terms shift no line that
// enters the spectra below, so they are not represented.

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "nvesr/core.hpp"

namespace nvesr::p1 {

struct P1Constants {
  double a_z_hz = 114e6;          ///< on-axis axial hyperfine A_z
  double a_x_hz = 81.3e6;         ///< on-axis transverse hyperfine A_x
  double on_axis_fraction = 0.25; ///< P1 axis parallel to the NV axis
  double gamma_p1 = kTwoPi * 1e6; ///< flip-flop linewidth Gamma_P1, rad/s

  /// Off-axis (109.47 deg) axial coupling (8 A_x + A_z) / 9, Hz.
  [[nodiscard]] double off_axis_a_z_hz() const { return (8.0 * a_x_hz + a_z_hz) / 9.0; }
  /// Off-axis transverse coupling (5 A_x + 4 A_z) / 9, Hz.
  [[nodiscard]] double off_axis_a_x_hz() const { return (5.0 * a_x_hz + 4.0 * a_z_hz) / 9.0; }
  [[nodiscard]] double off_axis_fraction() const { return 1.0 - on_axis_fraction; }

  void validate() const;
};

/// Impurity density and the orientation/distance averaged squared couplings
/// <B_perp^2> (allowed flip-flops) and <B_par^2> (nuclear-assisted ones).
struct BathGeometry {
  double density_n = 0.0;  ///< m^-3
  double b_perp_sq = 0.0;  ///< rad^2 s^-2
  double b_par_sq = 0.0;   ///< rad^2 s^-2

  void validate() const;
};

[[nodiscard]] double ppm_to_density(double ppm, const PhysicalConstants& pc = {});

enum class Orientation { OnAxis, OffAxis, Both };

struct P1Line {
  std::string label;
  double omega = 0.0;  ///< rad/s
  Orientation orientation = Orientation::Both;
  bool allowed = true;
};

/// Lowest field at which the high-field (electron Zeeman dominated) picture
/// used here holds.
inline constexpr double kMinHighFieldGauss = 100.0;

/// Thrown when a field is outside the high-field regime.
class RegimeError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Allowed lines {w0, w0 +- A_z, w0 +- a_z} and the nuclear-assisted lines
/// lambda_1..4 = sqrt(2 A^2 + (w0 +- A/2)^2) at field b0. Rejects
/// b0 < 100 G with RegimeError.
[[nodiscard]] std::vector<P1Line> p1_line_positions(double b0_gauss, const P1Constants& c = {},
                                                    const PhysicalConstants& pc = {});

/// Bath spectral density at absolute angular frequency omega: Lorentzians
/// of half width Gamma_P1 at +-every line, 1/(6 pi) weight for allowed and
/// 1/(4 pi) for nuclear-assisted lines, 1/4 : 3/4 on/off-axis mixing.
[[nodiscard]] double spectral_density_at(double omega, double b0_gauss, const P1Constants& c = {},
                                         const PhysicalConstants& pc = {});

/// spectral_density_at sampled on a uniform grid of absolute frequencies.
[[nodiscard]] SpectralDensity spectral_density(std::span<const double> grid, double b0_gauss,
                                               const P1Constants& c = {}, const PhysicalConstants& pc = {});

/// The same spectrum on the offset axis Omega = omega - omega0, i.e. S_0(Omega).
[[nodiscard]] SpectralDensity offset_spectral_density(std::span<const double> offsets, double b0_gauss,
                                                      const P1Constants& c = {}, const PhysicalConstants& pc = {});

/// Field-dependent NV relaxation rate produced by the P1 bath, s^-1.
/// Lorentzian comb of combined width Gamma2 + Gamma_P1 in omega0 with
/// <B_perp^2>/(6 pi) allowed and <B_par^2>/(4 pi) nuclear-assisted terms.
[[nodiscard]] double gamma1_analytic(double omega0, const P1Constants& c, const BathGeometry& g, double gamma2,
                                     const PhysicalConstants& pc = {});

/// gamma1_analytic evaluated over a sweep.
[[nodiscard]] std::vector<double> gamma1_profile(const FieldSweep& sweep, const P1Constants& c,
                                                 const BathGeometry& g, double gamma2,
                                                 const PhysicalConstants& pc = {});

/// Predicted field of each allowed / nuclear-assisted Gamma1 maximum, gauss.
struct PredictedPeak {
  std::string label;
  double field_gauss = 0.0;
  double offset_hz = 0.0;  ///< D - 2 omega0 / 2pi at the peak
  bool allowed = true;
};
[[nodiscard]] std::vector<PredictedPeak> predicted_gamma1_peaks(const P1Constants& c = {},
                                                                const PhysicalConstants& pc = {});

/// Distance from a probe to its nearest impurity for a Poisson distribution of
/// density n: P(r) = 4 pi n r^2 exp(-4/3 pi n r^3).
class NearestNeighborDistribution {
 public:
  explicit NearestNeighborDistribution(double density_n);

  [[nodiscard]] double density() const { return n_; }
  /// Gamma(4/3) (4 pi n / 3)^(-1/3).
  [[nodiscard]] double mean() const;
  [[nodiscard]] double pdf(double r) const;
  [[nodiscard]] double cdf(double r) const;
  /// Inverse-CDF draw.
  [[nodiscard]] double sample(std::mt19937_64& rng) const;

 private:
  double n_;
};

[[nodiscard]] NearestNeighborDistribution nearest_neighbor_distance_stats(double density_ppm,
                                                                          const PhysicalConstants& pc = {});

enum class MomentSampling {
  /// r drawn directly from the nearest-neighbour law outside r_min.
  Direct,
  /// r^3 - r_min^3 drawn from a heavy-tailed proposal matched to r^-6 and
  /// reweighted. Same expectation, bounded per-sample contribution.
  Importance,
};

struct MonteCarloOptions {
  std::size_t samples = 200'000;
  std::uint64_t seed = 1;
  unsigned workers = 1;
  MomentSampling sampling = MomentSampling::Importance;
  /// Estimates with a larger relative standard error raise NumericalError.
  double max_relative_stderr = 0.05;
};

struct CouplingMoments {
  double b_perp_sq = 0.0;
  double b_par_sq = 0.0;
  double b_perp_sq_stderr = 0.0;
  double b_par_sq_stderr = 0.0;
  std::size_t samples = 0;
};

/// Monte Carlo <B_all^2> = <(3/2 B sin^2 T)^2> and <B_dis^2> = <(3/4 B sin 2T)^2>
/// with B = mu0 hbar gamma_e^2 / (4 pi r^3), T isotropic and r the nearest
/// impurity distance, excluded from r < r_min. Reproducible for a fixed
/// (seed, workers) pair.
[[nodiscard]] CouplingMoments coupling_second_moments(double density_ppm, double r_min,
                                                      const MonteCarloOptions& options = {},
                                                      const PhysicalConstants& pc = {});

}  // namespace nvesr::p1
