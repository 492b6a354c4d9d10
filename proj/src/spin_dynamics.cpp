#include "nvesr/spin_dynamics.hpp"

#include <array>
#include <cmath>
#include <string>

#include <boost/numeric/odeint.hpp>

namespace nvesr::spin {

namespace odeint = boost::numeric::odeint;

void TwoLevelParams::validate() const {
  if (!(coupling_b >= 0.0)) throw std::invalid_argument("coupling B must be >= 0");
  if (!(dephasing_gamma2 > 0.0)) throw std::invalid_argument("dephasing Gamma2 must be > 0");
  if (!std::isfinite(detuning_delta)) throw std::invalid_argument("detuning must be finite");
}

const char* to_string(DampingRegime regime) {
  switch (regime) {
    case DampingRegime::UnderDamped: return "under-damped";
    case DampingRegime::CriticallyDamped: return "critically-damped";
    case DampingRegime::OverDamped: return "over-damped";
  }
  return "unknown";
}

DampingRegime classify_damping(const TwoLevelParams& p) {
  p.validate();
  const double critical = p.dephasing_gamma2 / (2.0 * std::numbers::sqrt2);
  if (std::abs(p.coupling_b - critical) <= 1e-12 * critical) return DampingRegime::CriticallyDamped;
  return p.coupling_b > critical ? DampingRegime::UnderDamped : DampingRegime::OverDamped;
}

double population_resonant(double coupling_b, double gamma2, double t) {
  TwoLevelParams{coupling_b, gamma2, 0.0}.validate();
  if (!(t >= 0.0)) throw std::invalid_argument("population_resonant: t must be >= 0");
  if (coupling_b == 0.0) return 1.0;

  // z = 2 P0 - 1 = e^{-G t/2} [cosh(x) + (G t/2) sinh(x)/x],  x^2 = (G^2 - 8B^2) t^2 / 4
  const double half_gt = 0.5 * gamma2 * t;
  const double x_sq = (gamma2 * gamma2 - 8.0 * coupling_b * coupling_b) * t * t / 4.0;
  double z = 0.0;
  if (std::abs(x_sq) < 1e-3) {
    const double y = x_sq;
    const double cosh_series = 1.0 + y / 2.0 + y * y / 24.0 + y * y * y / 720.0;
    const double sinhc_series = 1.0 + y / 6.0 + y * y / 120.0 + y * y * y / 5040.0;
    z = std::exp(-half_gt) * (cosh_series + half_gt * sinhc_series);
  } else if (x_sq > 0.0) {
    // x <= G t / 2, so fold the exponentials together to avoid overflow.
    const double x = std::sqrt(x_sq);
    const double grow = std::exp(x - half_gt);
    const double decay = std::exp(-x - half_gt);
    z = 0.5 * (grow + decay) + half_gt / x * 0.5 * (grow - decay);
  } else {
    const double x = std::sqrt(-x_sq);
    z = std::exp(-half_gt) * (std::cos(x) + half_gt * std::sin(x) / x);
  }
  return 0.5 + 0.5 * z;
}

double relaxation_rate(const TwoLevelParams& p) {
  p.validate();
  const double g = p.dephasing_gamma2;
  const double d = p.detuning_delta;
  return 2.0 * p.coupling_b * p.coupling_b * g / (d * d + g * g);
}

double population_overdamped(const TwoLevelParams& p, double t) {
  if (!(t >= 0.0)) throw std::invalid_argument("population_overdamped: t must be >= 0");
  return 0.5 + 0.5 * std::exp(-relaxation_rate(p) * t);
}

std::vector<double> integrate_master_equation(const TwoLevelParams& p, const TimeGrid& times,
                                              const IntegrationOptions& options) {
  p.validate();
  if (times.size() == 0) throw std::invalid_argument("integrate_master_equation: empty time grid");

  // Dimensionless time tau = Gamma2 t; b = B/Gamma2, d = delta/Gamma2.
  const double g = p.dephasing_gamma2;
  const double b2 = (p.coupling_b / g) * (p.coupling_b / g);
  const double d2 = (p.detuning_delta / g) * (p.detuning_delta / g);
  const double c1 = 1.0 + d2 + 2.0 * b2;

  using State = std::array<double, 3>;
  auto rhs = [&](const State& x, State& dxdt, double /*tau*/) {
    dxdt[0] = x[1];
    dxdt[1] = x[2];
    dxdt[2] = -2.0 * x[2] - c1 * x[1] - 2.0 * b2 * x[0] + b2;
  };

  std::vector<double> scaled(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) scaled[i] = g * times[i];

  // Start at tau = 0 even if the first output time is later.
  std::vector<double> output_times;
  output_times.reserve(scaled.size() + 1);
  const bool prepend_origin = scaled.front() > 0.0;
  if (prepend_origin) output_times.push_back(0.0);
  output_times.insert(output_times.end(), scaled.begin(), scaled.end());

  State state{1.0, 0.0, -b2};
  std::vector<double> result;
  result.reserve(output_times.size());
  auto stepper = odeint::make_dense_output(options.abs_tol, options.rel_tol, odeint::runge_kutta_dopri5<State>());
  try {
    odeint::integrate_times(stepper, rhs, state, output_times.begin(), output_times.end(), 1e-3,
                            [&](const State& x, double) { result.push_back(x[0]); },
                            odeint::max_step_checker(options.max_steps_between_outputs));
  } catch (const odeint::odeint_error& e) {
    throw NumericalError(std::string("integrate_master_equation: integration failed: ") + e.what());
  }
  if (prepend_origin) result.erase(result.begin());
  if (result.size() != times.size()) throw NumericalError("integrate_master_equation: missing output samples");
  return result;
}

}  // namespace nvesr::spin
