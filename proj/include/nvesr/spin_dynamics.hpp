#pragma once

// Dephasing-damped population dynamics of a probe transition coupled to a
// transverse field of strength B, detuned by delta, with dephasing rate
// Gamma2. Closed forms and a numerical integrator of the equivalent
// third-order equation for P0.

#include <vector>

#include "nvesr/core.hpp"

namespace nvesr::spin {

struct TwoLevelParams {
  double coupling_b = 0.0;        ///< B, rad/s, >= 0
  double dephasing_gamma2 = 1.0;  ///< Gamma2, rad/s, > 0
  double detuning_delta = 0.0;    ///< omega_NV - omega_E, rad/s

  void validate() const;
};

enum class DampingRegime { UnderDamped, CriticallyDamped, OverDamped };

[[nodiscard]] const char* to_string(DampingRegime regime);

/// Sign of Gamma2^2 - 8 B^2; equality is judged at 1e-12 relative.
[[nodiscard]] DampingRegime classify_damping(const TwoLevelParams& p);

/// Exact resonant (delta = 0) P0(t) with P0(0) = 1 and zero initial
/// coherences. Real in every regime: hyperbolic when over-damped,
/// trigonometric when under-damped, series near the critical point.
[[nodiscard]] double population_resonant(double coupling_b, double gamma2, double t);

/// 2 B^2 Gamma2 / (delta^2 + Gamma2^2).
[[nodiscard]] double relaxation_rate(const TwoLevelParams& p);

/// 1/2 + 1/2 exp(-relaxation_rate * t). Valid for Gamma2 >> B; the regime is
/// not checked.
[[nodiscard]] double population_overdamped(const TwoLevelParams& p, double t);

struct IntegrationOptions {
  double abs_tol = 1e-12;
  double rel_tol = 1e-10;
  /// Limit on steps between two consecutive output times.
  int max_steps_between_outputs = 5'000'000;
};

/// Integrates
///   P0''' + 2 G P0'' + (G^2 + delta^2 + 2 B^2) P0' + 2 G B^2 P0 - G B^2 = 0
/// with P0(0) = 1, P0'(0) = 0, P0''(0) = -B^2 (coherences start at zero),
/// G = Gamma2. Adaptive Dormand-Prince with dense output; time is scaled by
/// Gamma2 internally. Throws NumericalError when the step size collapses.
[[nodiscard]] std::vector<double> integrate_master_equation(const TwoLevelParams& p, const TimeGrid& times,
                                                            const IntegrationOptions& options = {});

}  // namespace nvesr::spin
