#pragma once

// Synthetic relaxometry records over a field sweep and extraction of the
// field-dependent relaxation rate from them.
//
// Every curve follows the stretched-exponential-plus-phonon decay law
//   contrast(t) = exp(-sqrt(Gamma1 t) - R t)
// plus additive Gaussian shot noise of constant sigma.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "nvesr/core.hpp"
#include "nvesr/p1bath.hpp"

namespace nvesr::forward {

/// Phonon-limited relaxation rate quoted for the reference sample, s^-1.
inline constexpr double kDefaultPhononRate = 360.0;

struct MeasurementRecord {
  FieldSweep sweep;
  TimeGrid times;
  std::vector<DecayCurve> curves;  ///< one per field point, same order as sweep
  double phonon_rate_r = 0.0;      ///< s^-1
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument if curves and grids disagree.
  void validate() const;
};

enum class RMode { Fixed, Fitted };

struct RateProfile {
  FieldSweep sweep;
  std::vector<double> gamma1;         ///< s^-1, >= 0
  std::vector<double> gamma1_stderr;  ///< s^-1, >= 0
  std::vector<bool> converged;
  RMode r_mode = RMode::Fixed;
  double r_fitted = 0.0;  ///< fixed value in Fixed mode
  double r_stderr = 0.0;
  double baseline_offset = 0.0;  ///< already subtracted from gamma1

  [[nodiscard]] std::size_t failed_points() const;
};

[[nodiscard]] double decay_model(double gamma1, double r, double t);

struct SynthesisOptions {
  double phonon_rate_r = kDefaultPhononRate;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  unsigned workers = 1;
};

/// One curve per field from the given Gamma1 values (s^-1). Noise is drawn
/// from a stream keyed by (seed, field index) and is not clipped.
[[nodiscard]] MeasurementRecord synthesize_record(const FieldSweep& sweep, const TimeGrid& times,
                                                  std::span<const double> gamma1, const SynthesisOptions& options);

/// Same, with Gamma1(B0) from the P1 bath model.
[[nodiscard]] MeasurementRecord synthesize_record(const FieldSweep& sweep, const TimeGrid& times,
                                                  const p1::P1Constants& bath, const p1::BathGeometry& geometry,
                                                  double gamma2, const SynthesisOptions& options,
                                                  const PhysicalConstants& pc = {});

struct FitOptions {
  RMode r_mode = RMode::Fixed;
  /// Fixed R in Fixed mode; starting value in Fitted mode.
  double r = kDefaultPhononRate;
  int max_iterations = 200;
  /// Relative parameter-step tolerance.
  double tolerance = 1e-10;
  unsigned workers = 1;
};

struct CurveFit {
  double gamma1 = 0.0;
  double gamma1_stderr = 0.0;
  double sse = 0.0;
  bool converged = false;
};

/// Fit of one curve with R held at `r`. Samples may come in any order.
/// `noise_sigma` <= 0 takes the noise level from the residual scatter.
[[nodiscard]] CurveFit fit_curve(std::span<const double> times, std::span<const double> contrast, double r,
                                 double noise_sigma, const FitOptions& options = {});

/// Least-squares fit of the decay law at every field point. Gamma1 is fitted
/// through u = sqrt(Gamma1) >= 0; R is either held fixed or shared by the
/// whole sweep. Points that do not converge are flagged, not dropped.
/// Standard errors use the record's noise sigma when it is positive and the
/// residual scatter otherwise.
[[nodiscard]] RateProfile extract_rates(const MeasurementRecord& record, const FitOptions& options = {});

struct BaselineOptions {
  /// Mean Gamma1 inside [lo, hi] gauss is subtracted; without a window the
  /// profile minimum is.
  std::optional<std::pair<double, double>> window_gauss;
};

/// Removes the field-independent part of Gamma1 and floors at zero.
/// Requires at least 10 points.
[[nodiscard]] RateProfile subtract_detuned_baseline(const RateProfile& profile, const BaselineOptions& options = {});

}  // namespace nvesr::forward
