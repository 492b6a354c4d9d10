#include "nvesr/forward.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

namespace nvesr::forward {

void MeasurementRecord::validate() const {
  if (curves.size() != sweep.size()) throw std::invalid_argument("MeasurementRecord: one curve per field required");
  for (std::size_t i = 0; i < curves.size(); ++i) {
    if (curves[i].contrast.size() != times.size()) {
      throw std::invalid_argument("MeasurementRecord: curve length differs from the time grid");
    }
    if (curves[i].field_gauss != sweep[i]) throw std::invalid_argument("MeasurementRecord: curve field mismatch");
  }
  if (!(phonon_rate_r >= 0)) throw std::invalid_argument("MeasurementRecord: R must be >= 0");
  if (!(noise_sigma >= 0)) throw std::invalid_argument("MeasurementRecord: noise sigma must be >= 0");
}

std::size_t RateProfile::failed_points() const {
  return static_cast<std::size_t>(std::count(converged.begin(), converged.end(), false));
}

double decay_model(double gamma1, double r, double t) { return std::exp(-std::sqrt(gamma1 * t) - r * t); }

MeasurementRecord synthesize_record(const FieldSweep& sweep, const TimeGrid& times, std::span<const double> gamma1,
                                    const SynthesisOptions& options) {
  if (sweep.size() == 0 || times.size() == 0) throw std::invalid_argument("synthesize_record: empty grid");
  if (gamma1.size() != sweep.size()) throw std::invalid_argument("synthesize_record: one Gamma1 per field required");
  if (!(options.noise_sigma >= 0)) throw std::invalid_argument("synthesize_record: noise sigma must be >= 0");
  if (!(options.phonon_rate_r >= 0)) throw std::invalid_argument("synthesize_record: R must be >= 0");
  if (std::any_of(gamma1.begin(), gamma1.end(), [](double g) { return !(g >= 0); })) {
    throw std::invalid_argument("synthesize_record: Gamma1 must be >= 0");
  }

  MeasurementRecord record;
  record.sweep = sweep;
  record.times = times;
  record.phonon_rate_r = options.phonon_rate_r;
  record.noise_sigma = options.noise_sigma;
  record.seed = options.seed;
  record.curves.resize(sweep.size());
  parallel_for(sweep.size(), options.workers, [&](std::size_t i) {
    auto rng = make_stream(options.seed, i);
    std::normal_distribution<double> noise(0.0, 1.0);
    DecayCurve curve;
    curve.field_gauss = sweep[i];
    curve.noise_sigma = options.noise_sigma;
    curve.contrast.resize(times.size());
    for (std::size_t j = 0; j < times.size(); ++j) {
      const double clean = decay_model(gamma1[i], options.phonon_rate_r, times[j]);
      curve.contrast[j] = options.noise_sigma > 0 ? clean + options.noise_sigma * noise(rng) : clean;
    }
    record.curves[i] = std::move(curve);
  });
  return record;
}

MeasurementRecord synthesize_record(const FieldSweep& sweep, const TimeGrid& times, const p1::P1Constants& bath,
                                    const p1::BathGeometry& geometry, double gamma2, const SynthesisOptions& options,
                                    const PhysicalConstants& pc) {
  const auto gamma1 = p1::gamma1_profile(sweep, bath, geometry, gamma2, pc);
  return synthesize_record(sweep, times, gamma1, options);
}

namespace {

struct PointStats {
  double sse = 0.0;
  double a = 0.0;   // sum (dm/du)^2
  double b = 0.0;   // sum (dm/du)(dm/dR)
  double c = 0.0;   // sum (dm/dR)^2
  double gu = 0.0;  // sum (dm/du) e
  double gr = 0.0;  // sum (dm/dR) e
};

PointStats point_stats(std::span<const double> t, std::span<const double> sqrt_t, std::span<const double> y, double u,
                       double r) {
  PointStats s;
  for (std::size_t j = 0; j < t.size(); ++j) {
    const double m = std::exp(-u * sqrt_t[j] - r * t[j]);
    const double e = y[j] - m;
    const double du = -sqrt_t[j] * m;
    const double dr = -t[j] * m;
    s.sse += e * e;
    s.a += du * du;
    s.b += du * dr;
    s.c += dr * dr;
    s.gu += du * e;
    s.gr += dr * e;
  }
  return s;
}

double sse_at(std::span<const double> t, std::span<const double> sqrt_t, std::span<const double> y, double u,
              double r) {
  double sse = 0.0;
  for (std::size_t j = 0; j < t.size(); ++j) {
    const double e = y[j] - std::exp(-u * sqrt_t[j] - r * t[j]);
    sse += e * e;
  }
  return sse;
}

// Two-point log estimate of sqrt(Gamma1) from the earliest sample and the
// latest one still clearly above the noise, with R held at r. Picks samples
// by time value so the result does not depend on sample order.
double initial_u(std::span<const double> t, std::span<const double> sqrt_t, std::span<const double> y, double r) {
  auto log_decay = [&](std::size_t j) { return -std::log(std::clamp(y[j], 1e-12, 1.0)); };
  std::optional<std::size_t> first, last;
  for (std::size_t j = 0; j < t.size(); ++j) {
    if (!(sqrt_t[j] > 0)) continue;
    if (!first || t[j] < t[*first]) first = j;
    if (y[j] >= 0.05 && (!last || t[j] > t[*last])) last = j;
  }
  if (!first) return 0.0;
  if (!last) last = first;
  double estimate = 0.0;
  int used = 0;
  for (std::size_t j : {*first, *last}) {
    const double u = (log_decay(j) - r * t[j]) / sqrt_t[j];
    if (std::isfinite(u)) {
      estimate += std::max(0.0, u);
      ++used;
    }
  }
  return used ? estimate / used : 0.0;
}

struct PointFit {
  double u = 0.0;
  double sse = 0.0;
  double a = 0.0;
  bool converged = false;
};

// Projected Levenberg-Marquardt on u >= 0 with R fixed.
PointFit fit_point(std::span<const double> t, std::span<const double> sqrt_t, std::span<const double> y, double r,
                   double u0, const FitOptions& options) {
  PointFit fit;
  fit.u = u0;
  double lambda = 1e-3;
  PointStats s = point_stats(t, sqrt_t, y, fit.u, r);
  for (int it = 0; it < options.max_iterations; ++it) {
    if (!(s.a > 0)) {
      fit.converged = true;
      break;
    }
    const double trial = std::max(0.0, fit.u + s.gu / (s.a * (1.0 + lambda)));
    const double trial_sse = sse_at(t, sqrt_t, y, trial, r);
    if (trial_sse <= s.sse) {
      const double moved = std::abs(trial - fit.u);
      fit.u = trial;
      s = point_stats(t, sqrt_t, y, fit.u, r);
      lambda = std::max(lambda / 10.0, 1e-12);
      if (moved <= options.tolerance * std::max(fit.u, 1e-6)) {
        fit.converged = true;
        break;
      }
    } else {
      lambda *= 10.0;
      if (lambda > 1e12) {
        fit.converged = true;  // no descent direction left: stationary within round-off
        break;
      }
    }
  }
  fit.sse = s.sse;
  fit.a = s.a;
  return fit;
}

double gamma1_stderr(double u, double u_var) {
  // Var[(u + e)^2] for e ~ N(0, s^2).
  return std::sqrt(std::max(0.0, 4.0 * u * u * u_var + 2.0 * u_var * u_var));
}

}  // namespace

CurveFit fit_curve(std::span<const double> times, std::span<const double> contrast, double r, double noise_sigma,
                   const FitOptions& options) {
  if (times.size() != contrast.size()) throw std::invalid_argument("fit_curve: size mismatch");
  if (times.size() < 4) throw std::invalid_argument("fit_curve: need at least 4 samples");
  if (!(r >= 0)) throw std::invalid_argument("fit_curve: R must be >= 0");
  std::vector<double> sqrt_t(times.size());
  for (std::size_t j = 0; j < times.size(); ++j) {
    if (!(times[j] >= 0)) throw std::invalid_argument("fit_curve: times must be >= 0");
    sqrt_t[j] = std::sqrt(times[j]);
  }
  const PointFit fit = fit_point(times, sqrt_t, contrast, r, initial_u(times, sqrt_t, contrast, r), options);
  const double dof = static_cast<double>(times.size()) - 1.0;
  const double sigma_sq = noise_sigma > 0 ? noise_sigma * noise_sigma : fit.sse / dof;
  const double u_var = fit.a > 0 ? sigma_sq / fit.a : 0.0;
  return {fit.u * fit.u, gamma1_stderr(fit.u, u_var), fit.sse, fit.converged};
}

RateProfile extract_rates(const MeasurementRecord& record, const FitOptions& options) {
  record.validate();
  const std::size_t n_t = record.times.size();
  if (n_t < 4) throw std::invalid_argument("extract_rates: need at least 4 time samples per curve");
  if (!(options.r >= 0)) throw std::invalid_argument("extract_rates: R must be >= 0");
  const std::size_t n_f = record.sweep.size();
  const auto& t = record.times.values();

  RateProfile profile;
  profile.sweep = record.sweep;
  profile.r_mode = options.r_mode;
  profile.gamma1.assign(n_f, 0.0);
  profile.gamma1_stderr.assign(n_f, 0.0);
  profile.converged.assign(n_f, false);

  auto curve = [&](std::size_t i) { return std::span<const double>(record.curves[i].contrast); };

  if (options.r_mode == RMode::Fixed) {
    parallel_for(n_f, options.workers, [&](std::size_t i) {
      const CurveFit fit = fit_curve(t, curve(i), options.r, record.noise_sigma, options);
      profile.gamma1[i] = fit.gamma1;
      profile.gamma1_stderr[i] = fit.gamma1_stderr;
      profile.converged[i] = fit.converged;
    });
    profile.r_fitted = options.r;
    profile.r_stderr = 0.0;
    return profile;
  }

  std::vector<double> sqrt_t(n_t);
  std::transform(t.begin(), t.end(), sqrt_t.begin(), [](double v) { return std::sqrt(v); });
  // Per-point fits at the starting R seed the joint fit.
  std::vector<PointFit> fits(n_f);
  parallel_for(n_f, options.workers, [&](std::size_t i) {
    const auto y = curve(i);
    fits[i] = fit_point(t, sqrt_t, y, options.r, initial_u(t, sqrt_t, y, options.r), options);
  });

  // Joint fit with R shared across the sweep. The normal matrix is an arrow:
  // diagonal in the u_i plus one dense row/column for R; eliminate R by Schur
  // complement.
  std::vector<double> u(n_f);
  for (std::size_t i = 0; i < n_f; ++i) u[i] = fits[i].u;
  double r = options.r;
  std::vector<PointStats> stats(n_f);
  auto refresh = [&] {
    parallel_for(n_f, options.workers, [&](std::size_t i) { stats[i] = point_stats(t, sqrt_t, curve(i), u[i], r); });
    double total = 0.0;
    for (const auto& s : stats) total += s.sse;
    return total;
  };
  double sse = refresh();
  double lambda = 1e-3;
  bool converged = false;
  std::vector<double> trial_u(n_f);
  std::vector<double> point_step(n_f, 0.0);
  for (int it = 0; it < options.max_iterations && !converged; ++it) {
    double schur = 0.0;
    double rhs = 0.0;
    double c = 0.0;
    double gr = 0.0;
    for (const auto& s : stats) {
      c += s.c;
      gr += s.gr;
    }
    c *= (1.0 + lambda);
    schur = c;
    rhs = gr;
    for (const auto& s : stats) {
      const double a = s.a * (1.0 + lambda);
      if (a > 0) {
        schur -= s.b * s.b / a;
        rhs -= s.b * s.gu / a;
      }
    }
    const double delta_r = schur > 0 ? rhs / schur : 0.0;
    const double trial_r = std::max(0.0, r + delta_r);
    for (std::size_t i = 0; i < n_f; ++i) {
      const double a = stats[i].a * (1.0 + lambda);
      const double delta_u = a > 0 ? (stats[i].gu - stats[i].b * delta_r) / a : 0.0;
      trial_u[i] = std::max(0.0, u[i] + delta_u);
    }
    std::vector<double> trial_sse(n_f);
    parallel_for(n_f, options.workers, [&](std::size_t i) { trial_sse[i] = sse_at(t, sqrt_t, curve(i), trial_u[i], trial_r); });
    const double new_sse = std::accumulate(trial_sse.begin(), trial_sse.end(), 0.0);
    if (new_sse <= sse) {
      double max_rel = std::abs(trial_r - r) / std::max(r, 1e-6);
      for (std::size_t i = 0; i < n_f; ++i) {
        point_step[i] = std::abs(trial_u[i] - u[i]) / std::max(trial_u[i], 1e-6);
        max_rel = std::max(max_rel, point_step[i]);
      }
      u.swap(trial_u);
      r = trial_r;
      sse = refresh();
      lambda = std::max(lambda / 10.0, 1e-12);
      converged = max_rel <= options.tolerance;
    } else {
      lambda *= 10.0;
      if (lambda > 1e12) converged = true;
    }
  }

  double schur = 0.0;
  for (const auto& s : stats) schur += s.c;
  for (const auto& s : stats) {
    if (s.a > 0) schur -= s.b * s.b / s.a;
  }
  const double dof = static_cast<double>(n_f * n_t) - static_cast<double>(n_f) - 1.0;
  const double sigma_sq = record.noise_sigma > 0 ? record.noise_sigma * record.noise_sigma : sse / std::max(dof, 1.0);
  const double r_var = schur > 0 ? sigma_sq / schur : 0.0;
  profile.r_fitted = r;
  profile.r_stderr = std::sqrt(r_var);
  for (std::size_t i = 0; i < n_f; ++i) {
    const auto& s = stats[i];
    double u_var = 0.0;
    if (s.a > 0) u_var = sigma_sq / s.a + (s.b / s.a) * (s.b / s.a) * r_var;
    profile.gamma1[i] = u[i] * u[i];
    profile.gamma1_stderr[i] = gamma1_stderr(u[i], u_var);
    profile.converged[i] = converged || point_step[i] <= options.tolerance;
  }
  return profile;
}

RateProfile subtract_detuned_baseline(const RateProfile& profile, const BaselineOptions& options) {
  if (profile.gamma1.size() < 10) throw std::invalid_argument("subtract_detuned_baseline: need at least 10 points");
  double offset = 0.0;
  if (options.window_gauss) {
    const auto [lo, hi] = *options.window_gauss;
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < profile.sweep.size(); ++i) {
      if (profile.sweep[i] >= lo && profile.sweep[i] <= hi) {
        sum += profile.gamma1[i];
        ++count;
      }
    }
    if (count == 0) throw std::invalid_argument("subtract_detuned_baseline: baseline window contains no field points");
    offset = sum / static_cast<double>(count);
  } else {
    offset = *std::min_element(profile.gamma1.begin(), profile.gamma1.end());
  }
  RateProfile out = profile;
  for (auto& g : out.gamma1) g = std::max(0.0, g - offset);
  out.baseline_offset = profile.baseline_offset + offset;
  return out;
}

}  // namespace nvesr::forward
