#include "nvesr/p1bath.hpp"

#include <algorithm>
#include <cmath>

namespace nvesr::p1 {

void P1Constants::validate() const {
  if (!(a_z_hz > 0)) throw std::invalid_argument("P1 axial hyperfine coupling must be positive");
  if (!(a_x_hz >= 0)) throw std::invalid_argument("P1 transverse hyperfine coupling must be >= 0");
  if (!(on_axis_fraction >= 0.0 && on_axis_fraction <= 1.0)) {
    throw std::invalid_argument("P1 on-axis fraction must lie in [0, 1]");
  }
  if (!(gamma_p1 > 0)) throw std::invalid_argument("Gamma_P1 must be positive");
}

void BathGeometry::validate() const {
  if (!(density_n > 0)) throw std::invalid_argument("bath density must be positive");
  if (!(b_perp_sq >= 0) || !(b_par_sq >= 0)) throw std::invalid_argument("coupling second moments must be >= 0");
}

double ppm_to_density(double ppm, const PhysicalConstants& pc) {
  if (!(ppm > 0)) throw std::invalid_argument("impurity concentration must be positive");
  return ppm * 1e-6 * pc.diamond_atom_density;
}

std::vector<P1Line> p1_line_positions(double b0_gauss, const P1Constants& c, const PhysicalConstants& pc) {
  if (!(b0_gauss >= kMinHighFieldGauss)) {
    throw RegimeError("p1_line_positions: B0 = " + std::to_string(b0_gauss) +
                      " G is below the 100 G high-field regime");
  }
  c.validate();
  const double w0 = zeeman_frequency(b0_gauss, pc);
  const double az = hz_to_angular(c.a_z_hz);
  const double ax = hz_to_angular(c.a_x_hz);
  const double off_az = hz_to_angular(c.off_axis_a_z_hz());
  const double off_ax = hz_to_angular(c.off_axis_a_x_hz());
  auto lambda = [](double a_perp, double shifted) { return std::sqrt(2.0 * a_perp * a_perp + shifted * shifted); };

  return {
      {"central", w0, Orientation::Both, true},
      {"on-axis +A_z", w0 + az, Orientation::OnAxis, true},
      {"on-axis -A_z", w0 - az, Orientation::OnAxis, true},
      {"off-axis +a_z", w0 + off_az, Orientation::OffAxis, true},
      {"off-axis -a_z", w0 - off_az, Orientation::OffAxis, true},
      {"lambda1", lambda(ax, w0 + az / 2.0), Orientation::OnAxis, false},
      {"lambda2", lambda(ax, w0 - az / 2.0), Orientation::OnAxis, false},
      {"lambda3", lambda(off_ax, w0 + off_az / 2.0), Orientation::OffAxis, false},
      {"lambda4", lambda(off_ax, w0 - off_az / 2.0), Orientation::OffAxis, false},
  };
}

namespace {

double lorentz(double x, double width) { return width / (width * width + x * x); }

double density_from_lines(double omega, const std::vector<P1Line>& lines, const P1Constants& c) {
  const double on = c.on_axis_fraction;
  const double off = c.off_axis_fraction();
  const double w = c.gamma_p1;
  double allowed = 0.0;
  double assisted = 0.0;
  for (const auto& line : lines) {
    const double weight = line.orientation == Orientation::OnAxis    ? on
                          : line.orientation == Orientation::OffAxis ? off
                                                                     : 1.0;
    // Both sign branches: lines at +omega_line and -omega_line.
    const double pair = lorentz(omega - line.omega, w) + lorentz(omega + line.omega, w);
    (line.allowed ? allowed : assisted) += weight * pair;
  }
  return allowed / (6.0 * std::numbers::pi) + assisted / (4.0 * std::numbers::pi);
}

}  // namespace

double spectral_density_at(double omega, double b0_gauss, const P1Constants& c, const PhysicalConstants& pc) {
  return density_from_lines(omega, p1_line_positions(b0_gauss, c, pc), c);
}

SpectralDensity spectral_density(std::span<const double> grid, double b0_gauss, const P1Constants& c,
                                 const PhysicalConstants& pc) {
  const auto lines = p1_line_positions(b0_gauss, c, pc);
  std::vector<double> values(grid.size());
  std::transform(grid.begin(), grid.end(), values.begin(),
                 [&](double w) { return density_from_lines(w, lines, c); });
  return SpectralDensity(std::vector<double>(grid.begin(), grid.end()), std::move(values));
}

SpectralDensity offset_spectral_density(std::span<const double> offsets, double b0_gauss, const P1Constants& c,
                                        const PhysicalConstants& pc) {
  const auto lines = p1_line_positions(b0_gauss, c, pc);
  const double w0 = zeeman_frequency(b0_gauss, pc);
  std::vector<double> values(offsets.size());
  std::transform(offsets.begin(), offsets.end(), values.begin(),
                 [&](double d) { return density_from_lines(w0 + d, lines, c); });
  return SpectralDensity(std::vector<double>(offsets.begin(), offsets.end()), std::move(values));
}

double gamma1_analytic(double omega0, const P1Constants& c, const BathGeometry& g, double gamma2,
                       const PhysicalConstants& pc) {
  c.validate();
  if (!(gamma2 > 0)) throw std::invalid_argument("gamma1_analytic: Gamma2 must be positive");
  if (!(g.b_perp_sq >= 0) || !(g.b_par_sq >= 0)) throw std::invalid_argument("gamma1_analytic: negative moments");

  const double width = gamma2 + c.gamma_p1;
  auto term = [width](double x) { return width / (width * width + 4.0 * x * x); };
  const double half_d = 0.5 * pc.zero_field_splitting();
  const double az = hz_to_angular(c.a_z_hz);
  const double off_az = hz_to_angular(c.off_axis_a_z_hz());
  const double on = c.on_axis_fraction;
  const double off = c.off_axis_fraction();

  double allowed = 0.0;
  double assisted = 0.0;
  for (double sign : {1.0, -1.0}) {
    const double x = omega0 + sign * half_d;
    allowed += on * (term(x + az / 2.0) + term(x - az / 2.0)) + off * (term(x + off_az / 2.0) + term(x - off_az / 2.0)) +
               term(x);
    assisted += on * (term(x + az / 4.0) + term(x - az / 4.0)) + off * (term(x + off_az / 4.0) + term(x - off_az / 4.0));
  }
  return g.b_perp_sq / (6.0 * std::numbers::pi) * allowed + g.b_par_sq / (4.0 * std::numbers::pi) * assisted;
}

std::vector<double> gamma1_profile(const FieldSweep& sweep, const P1Constants& c, const BathGeometry& g,
                                   double gamma2, const PhysicalConstants& pc) {
  std::vector<double> out(sweep.size());
  for (std::size_t i = 0; i < sweep.size(); ++i) out[i] = gamma1_analytic(zeeman_frequency(sweep[i], pc), c, g, gamma2, pc);
  return out;
}

std::vector<PredictedPeak> predicted_gamma1_peaks(const P1Constants& c, const PhysicalConstants& pc) {
  const double slope = 2.0 * pc.zeeman_per_gauss_hz();
  auto at = [&](std::string label, double offset_hz, bool allowed) {
    return PredictedPeak{std::move(label), (pc.zero_field_splitting_hz - offset_hz) / slope, offset_hz, allowed};
  };
  const double az = c.a_z_hz;
  const double off_az = c.off_axis_a_z_hz();
  return {
      at("on-axis +A_z", az, true),          at("off-axis +a_z", off_az, true),
      at("on-axis +A_z/2", az / 2.0, false),  at("off-axis +a_z/2", off_az / 2.0, false),
      at("central", 0.0, true),
      at("off-axis -a_z/2", -off_az / 2.0, false), at("on-axis -A_z/2", -az / 2.0, false),
      at("off-axis -a_z", -off_az, true),    at("on-axis -A_z", -az, true),
  };
}

NearestNeighborDistribution::NearestNeighborDistribution(double density_n) : n_(density_n) {
  if (!(n_ > 0)) throw std::invalid_argument("NearestNeighborDistribution: density must be positive");
}

double NearestNeighborDistribution::mean() const {
  return std::tgamma(4.0 / 3.0) * std::cbrt(3.0 / (4.0 * std::numbers::pi * n_));
}

double NearestNeighborDistribution::pdf(double r) const {
  if (r < 0) return 0.0;
  const double k = 4.0 * std::numbers::pi * n_;
  return k * r * r * std::exp(-k / 3.0 * r * r * r);
}

double NearestNeighborDistribution::cdf(double r) const {
  if (r <= 0) return 0.0;
  return -std::expm1(-4.0 / 3.0 * std::numbers::pi * n_ * r * r * r);
}

double NearestNeighborDistribution::sample(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double u = uniform(rng);
  return std::cbrt(-std::log1p(-u) * 3.0 / (4.0 * std::numbers::pi * n_));
}

NearestNeighborDistribution nearest_neighbor_distance_stats(double density_ppm, const PhysicalConstants& pc) {
  return NearestNeighborDistribution(ppm_to_density(density_ppm, pc));
}

namespace {

struct MomentSums {
  double perp = 0.0, perp_sq = 0.0, par = 0.0, par_sq = 0.0;
  std::size_t count = 0;
};

}  // namespace

CouplingMoments coupling_second_moments(double density_ppm, double r_min, const MonteCarloOptions& options,
                                        const PhysicalConstants& pc) {
  if (!(r_min > 0)) throw std::invalid_argument("coupling_second_moments: r_min must be positive");
  if (options.samples < 2) throw std::invalid_argument("coupling_second_moments: need at least 2 samples");
  const double n = ppm_to_density(density_ppm, pc);
  const double kappa = 4.0 / 3.0 * std::numbers::pi * n;
  const double excluded = kappa * r_min * r_min * r_min;  // expected count inside r_min
  const double prefactor = pc.dipolar_prefactor();
  const double coupling_scale = prefactor * prefactor * kappa * kappa;  // B^2 = scale / (excluded + E)^2

  const unsigned workers = std::max(1u, options.workers);
  std::vector<MomentSums> partial(workers);
  parallel_for(workers, workers, [&](std::size_t w) {
    auto rng = make_stream(options.seed, w);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    const std::size_t count = options.samples / workers + (w < options.samples % workers ? 1 : 0);
    MomentSums sums;
    for (std::size_t i = 0; i < count; ++i) {
      // E = kappa (r^3 - r_min^3) is Exp(1) for the nearest impurity outside r_min.
      double b_sq_weighted = 0.0;
      if (options.sampling == MomentSampling::Direct) {
        const double e = -std::log1p(-uniform(rng));
        b_sq_weighted = coupling_scale / ((excluded + e) * (excluded + e));
      } else {
        // Proposal q(E) = s / (s + E)^2, s = excluded; weight e^-E / q(E).
        const double u = uniform(rng);
        const double e = excluded * u / (1.0 - u);
        b_sq_weighted = coupling_scale * std::exp(-e) / excluded;
      }
      const double cos_t = 2.0 * uniform(rng) - 1.0;
      const double sin_sq = 1.0 - cos_t * cos_t;
      const double all = 2.25 * sin_sq * sin_sq * b_sq_weighted;             // (3/2 sin^2 T)^2 B^2
      const double dis = 0.5625 * 4.0 * sin_sq * cos_t * cos_t * b_sq_weighted;  // (3/4 sin 2T)^2 B^2
      sums.perp += all;
      sums.perp_sq += all * all;
      sums.par += dis;
      sums.par_sq += dis * dis;
      ++sums.count;
    }
    partial[w] = sums;
  });

  MomentSums total;
  for (const auto& p : partial) {
    total.perp += p.perp;
    total.perp_sq += p.perp_sq;
    total.par += p.par;
    total.par_sq += p.par_sq;
    total.count += p.count;
  }
  const double m = static_cast<double>(total.count);
  auto stderr_of = [m](double sum, double sum_sq) {
    const double mean = sum / m;
    const double var = std::max(0.0, (sum_sq / m - mean * mean) * m / (m - 1.0));
    return std::sqrt(var / m);
  };
  CouplingMoments out;
  out.samples = total.count;
  out.b_perp_sq = total.perp / m;
  out.b_par_sq = total.par / m;
  out.b_perp_sq_stderr = stderr_of(total.perp, total.perp_sq);
  out.b_par_sq_stderr = stderr_of(total.par, total.par_sq);
  for (auto [value, err] : {std::pair{out.b_perp_sq, out.b_perp_sq_stderr}, std::pair{out.b_par_sq, out.b_par_sq_stderr}}) {
    if (value > 0 && err > options.max_relative_stderr * value) {
      throw NumericalError("coupling_second_moments: relative standard error " + std::to_string(err / value) +
                           " exceeds the limit; increase the sample budget");
    }
  }
  return out;
}

}  // namespace nvesr::p1
