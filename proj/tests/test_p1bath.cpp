#include <doctest.h>

#include <cmath>
#include <map>
#include <numbers>

#include "nvesr/p1bath.hpp"
#include "oracles.hpp"

using namespace nvesr;
using namespace nvesr::p1;
using doctest::Approx;

namespace {

double line(const std::vector<P1Line>& lines, const std::string& label) {
  for (const auto& l : lines)
    if (l.label == label) return l.omega;
  FAIL("missing line " << label);
  return 0.0;
}

// Exact <1/(s+E)^2> for E ~ Exp(1): 1/s - e^s E1(s), with E1(s) = -Ei(-s).
double radial_moment(double s) { return 1.0 / s + std::exp(s) * std::expint(-s); }

std::vector<double> local_maxima(const std::vector<double>& x, const std::vector<double>& y, double floor) {
  std::vector<double> out;
  for (std::size_t i = 1; i + 1 < y.size(); ++i)
    if (y[i] > y[i - 1] && y[i] >= y[i + 1] && y[i] > floor) out.push_back(x[i]);
  return out;
}

BathGeometry unit_geometry() {
  return {ppm_to_density(50.0), mhz_to_angular(1.0) * mhz_to_angular(1.0), mhz_to_angular(0.5) * mhz_to_angular(0.5)};
}

}  // namespace

TEST_CASE("hyperfine constants") {
  const P1Constants c;
  CHECK(c.off_axis_a_z_hz() == Approx(85e6).epsilon(1e6 / 85e6));
  CHECK(c.off_axis_a_z_hz() == Approx((8 * 81.3e6 + 114e6) / 9));
  CHECK(c.off_axis_a_x_hz() == Approx((5 * 81.3e6 + 4 * 114e6) / 9));
  CHECK(c.on_axis_fraction + c.off_axis_fraction() == Approx(1.0));
  P1Constants bad;
  bad.on_axis_fraction = 1.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = {};
  bad.gamma_p1 = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  CHECK(ppm_to_density(1.0) == Approx(1.76e23));
  CHECK_THROWS_AS(ppm_to_density(0.0), std::invalid_argument);
}

TEST_CASE("line positions at 512 G") {
  const auto lines = p1_line_positions(512.0);
  REQUIRE(lines.size() == 9);
  const double w0 = zeeman_frequency(512.0);
  CHECK(angular_to_mhz(line(lines, "central")) == Approx(1433.6));
  CHECK(angular_to_mhz(line(lines, "on-axis +A_z") - w0) == Approx(114.0));
  CHECK(angular_to_mhz(w0 - line(lines, "on-axis -A_z")) == Approx(114.0));
  CHECK(angular_to_mhz(line(lines, "off-axis +a_z") - w0) == Approx(84.9333).epsilon(1e-5));
  int allowed = 0;
  for (const auto& l : lines) allowed += l.allowed ? 1 : 0;
  CHECK(allowed == 5);

  const double az = mhz_to_angular(114.0), ax = mhz_to_angular(81.3);
  const double lambda1 = std::sqrt(2 * ax * ax + (w0 + az / 2) * (w0 + az / 2));
  CHECK(line(lines, "lambda1") == Approx(lambda1).epsilon(1e-14));
  CHECK(std::abs(lambda1 - (w0 + az / 2)) / (w0 + az / 2) < 5e-3);
  CHECK(std::abs(line(lines, "lambda2") - (w0 - az / 2)) / (w0 - az / 2) < 5e-3);
}

TEST_CASE("assisted lines collapse to w0 +- A_z/2 without transverse hyperfine") {
  P1Constants c;
  c.a_x_hz = 0.0;
  const auto lines = p1_line_positions(512.0, c);
  const double w0 = zeeman_frequency(512.0);
  const double az = hz_to_angular(c.a_z_hz);
  CHECK(line(lines, "lambda1") == w0 + az / 2);
  CHECK(line(lines, "lambda2") == w0 - az / 2);
}

TEST_CASE("low fields are outside the high-field regime") {
  CHECK_THROWS_AS(p1_line_positions(99.0), RegimeError);
  CHECK_THROWS_AS((void)spectral_density_at(1e9, 50.0), RegimeError);
  CHECK_NOTHROW(p1_line_positions(100.0));
}

TEST_CASE("spectral density mass") {
  const double b0 = 512.0;
  const P1Constants c;
  const auto lines = p1_line_positions(b0, c);
  double outer = 0;
  for (const auto& l : lines) outer = std::max(outer, l.omega);
  const double edge = outer + 30 * c.gamma_p1;
  const auto grid = make_uniform_grid(-edge, edge, 160001);
  const auto s = spectral_density(grid, b0, c);

  // Oracle: closed-form integral of each Lorentzian over [-edge, edge].
  double truncated = 0.0;
  for (const auto& l : lines) {
    const double weight = l.orientation == Orientation::OnAxis    ? c.on_axis_fraction
                          : l.orientation == Orientation::OffAxis ? c.off_axis_fraction()
                                                                  : 1.0;
    const double pref = l.allowed ? 1.0 / (6 * std::numbers::pi) : 1.0 / (4 * std::numbers::pi);
    for (double centre : {l.omega, -l.omega})
      truncated += pref * weight * (std::atan((edge - centre) / c.gamma_p1) + std::atan((edge + centre) / c.gamma_p1));
  }
  CHECK(s.norm() == Approx(truncated).epsilon(1e-4));
  CHECK(s.norm() == Approx(2.0).epsilon(0.01));  // infinite-range sum of weights
}

TEST_CASE("spectral density symmetry and translation") {
  const P1Constants c;
  for (double w : {1e8, 5e9, 9.1e9, 9.6e9}) CHECK(spectral_density_at(w, 512.0, c) == Approx(spectral_density_at(-w, 512.0, c)));

  const auto offsets = make_uniform_grid(mhz_to_angular(-250), mhz_to_angular(250), 50001);
  const auto a = offset_spectral_density(offsets, 512.0, c);
  const auto b = offset_spectral_density(offsets, 600.0, c);
  CHECK(a.norm() == Approx(b.norm()).epsilon(2e-3));
  // The central line is pinned to zero offset at every field.
  CHECK(a.values()[25000] == Approx(b.values()[25000]).epsilon(0.02));
}

TEST_CASE("narrow bath lines resolve into nine peaks per branch") {
  P1Constants c;
  c.gamma_p1 = mhz_to_angular(0.05);
  const double w0 = zeeman_frequency(512.0);
  std::vector<double> pos, neg;
  for (int i = 0; i <= 30000; ++i) pos.push_back(w0 + mhz_to_angular(-150 + i * 0.01));
  for (double w : pos) neg.push_back(-w);
  std::reverse(neg.begin(), neg.end());
  const auto sp = spectral_density(pos, 512.0, c);
  const auto sn = spectral_density(neg, 512.0, c);
  CHECK(local_maxima(pos, sp.values(), 0.0).size() == 9);
  CHECK(local_maxima(neg, sn.values(), 0.0).size() == 9);
}

TEST_CASE("gamma1 maxima sit at the hyperfine offsets") {
  const P1Constants c;
  const PhysicalConstants pc;
  const double gamma2 = 5e6;
  const auto sweep = FieldSweep::uniform(480.0, 545.0, 13001);
  const auto profile = gamma1_profile(sweep, c, unit_geometry(), gamma2);
  const auto maxima = local_maxima(sweep.values(), profile, 0.0);
  REQUIRE(maxima.size() == 9);

  const auto predicted = predicted_gamma1_peaks(c, pc);
  REQUIRE(predicted.size() == 9);
  for (std::size_t i = 0; i < 9; ++i) CHECK(maxima[i] == Approx(predicted[i].field_gauss).epsilon(0.02 / 500));

  const double centre = electron_resonance_field(pc);
  CHECK(centre == Approx(512.5));
  CHECK(maxima[4] == Approx(centre).epsilon(0.01 / 500));
  // Allowed maxima: indices 0, 1, 4, 7, 8 (A_z, a_z, central, -a_z, -A_z).
  CHECK(maxima[4] - maxima[1] == Approx(maxima[7] - maxima[4]).epsilon(1e-3));
  CHECK(maxima[4] - maxima[0] == Approx(maxima[8] - maxima[4]).epsilon(1e-3));
  CHECK(maxima[4] - maxima[1] == Approx(15.4).epsilon(0.3 / 15.4));
  CHECK(maxima[4] - maxima[0] == Approx(20.4).epsilon(0.1 / 20.4));

  // Offsets D - 2 omega0 / 2pi in {0, +-86, +-114} MHz.
  const double slope = 2 * pc.zeeman_per_gauss_hz();
  for (std::size_t i : {0, 1, 4, 7, 8}) {
    const double off = (pc.zero_field_splitting_hz - slope * maxima[i]) * 1e-6;
    const double expected = std::array<double, 9>{114, 86, 0, 0, 0, 0, 0, -86, -114}[i];
    CHECK(std::abs(off - expected) < 1.5);
  }
}

TEST_CASE("gamma1 is even about the central resonance") {
  const P1Constants c;
  const PhysicalConstants pc;
  const double half = 0.5 * pc.zero_field_splitting();
  for (double mhz : {1.0, 30.0, 42.0, 85.0, 114.0, 150.0}) {
    const double d = mhz_to_angular(mhz) / 2;
    CHECK(gamma1_analytic(half + d, c, unit_geometry(), 5e6) ==
          Approx(gamma1_analytic(half - d, c, unit_geometry(), 5e6)).epsilon(2e-3));
  }
}

TEST_CASE("gamma1 vanishes without coupling and scales with it") {
  const P1Constants c;
  BathGeometry none{ppm_to_density(50), 0.0, 0.0};
  const auto sweep = FieldSweep::uniform(480, 540, 61);
  for (double v : gamma1_profile(sweep, c, none, 5e6)) CHECK(v == 0.0);
  auto g = unit_geometry();
  const double base = gamma1_analytic(zeeman_frequency(500), c, g, 5e6);
  g.b_perp_sq *= 3;
  g.b_par_sq *= 3;
  CHECK(gamma1_analytic(zeeman_frequency(500), c, g, 5e6) == Approx(3 * base));
  CHECK_THROWS_AS((void)gamma1_analytic(1e10, c, g, 0.0), std::invalid_argument);
}

TEST_CASE("gamma1 central peak height") {
  // On resonance the central allowed term dominates: <B_perp^2>/(6 pi) / W, W = Gamma2 + Gamma_P1.
  const P1Constants c;
  const PhysicalConstants pc;
  const auto g = unit_geometry();
  const double w = 5e6 + c.gamma_p1;
  const double central = gamma1_analytic(0.5 * pc.zero_field_splitting(), c, g, 5e6);
  CHECK(central == Approx(g.b_perp_sq / (6 * std::numbers::pi) / w).epsilon(0.01));
  CHECK(central > g.b_perp_sq / (6 * std::numbers::pi) / w);
}

TEST_CASE("nearest-neighbour distance") {
  const auto nn = nearest_neighbor_distance_stats(50.0);
  CHECK(nn.mean() * 1e9 == Approx(2.7).epsilon(0.05 / 2.7));
  const auto dense = NearestNeighborDistribution(8 * nn.density());
  CHECK(dense.mean() == Approx(nn.mean() / 2).epsilon(1e-12));
  CHECK(oracle::simpson([&](double r) { return nn.pdf(r); }, 0.0, 20 * nn.mean(), 20000) == Approx(1.0).epsilon(1e-8));
  CHECK(oracle::simpson([&](double r) { return r * nn.pdf(r); }, 0.0, 20 * nn.mean(), 20000) ==
        Approx(nn.mean()).epsilon(1e-8));
  CHECK(nn.cdf(nn.mean()) == Approx(oracle::simpson([&](double r) { return nn.pdf(r); }, 0.0, nn.mean(), 4000)));
  CHECK_THROWS_AS(NearestNeighborDistribution(0.0), std::invalid_argument);
}

TEST_CASE("nearest-neighbour sampler") {
  const auto nn = nearest_neighbor_distance_stats(50.0);
  auto rng = make_stream(2024, 0);
  std::vector<double> r(100000);
  for (auto& v : r) v = nn.sample(rng);
  const double d = oracle::ks_statistic(r, [&](double x) { return nn.cdf(x); });
  const double p = oracle::ks_pvalue(d, r.size());
  MESSAGE("KS D = " << d << ", p = " << p);
  CHECK(p > 0.01);

  double mean = 0, sq = 0;
  for (double v : r) mean += v, sq += v * v;
  mean /= r.size();
  const double se = std::sqrt((sq / r.size() - mean * mean) / r.size());
  CHECK(std::abs(mean - nn.mean()) < 3 * se);
}

TEST_CASE("angular factors") {
  // Isotropic average over the sphere with measure sin(T) dT / 2.
  const double sin4 = oracle::simpson([](double t) { return std::pow(std::sin(t), 5) / 2; }, 0, std::numbers::pi);
  CHECK(sin4 == Approx(8.0 / 15.0).epsilon(1e-10));
  const double sin2t_sq = oracle::simpson(
      [](double t) { return std::pow(std::sin(2 * t), 2) * std::sin(t) / 2; }, 0, std::numbers::pi);
  CHECK(sin2t_sq == Approx(8.0 / 15.0).epsilon(1e-10));
}

TEST_CASE("coupling second moments match the exact radial average") {
  const PhysicalConstants pc;
  const double r_min = 0.154e-9;
  for (auto sampling : {MomentSampling::Importance, MomentSampling::Direct}) {
    MonteCarloOptions o;
    o.samples = 400000;
    o.seed = 3;
    o.sampling = sampling;
    o.max_relative_stderr = sampling == MomentSampling::Direct ? 1.0 : 0.05;
    const auto m = coupling_second_moments(50.0, r_min, o, pc);
    const double kappa = 4.0 / 3.0 * std::numbers::pi * ppm_to_density(50.0, pc);
    const double s = kappa * r_min * r_min * r_min;
    const double b2 = std::pow(pc.dipolar_prefactor() * kappa, 2) * radial_moment(s);
    const double perp = 2.25 * 8.0 / 15.0 * b2;
    const double par = 0.5625 * 8.0 / 15.0 * b2;
    CHECK(m.samples == o.samples);
    if (sampling == MomentSampling::Importance) {
      CHECK(std::abs(m.b_perp_sq - perp) < 4 * m.b_perp_sq_stderr);
      CHECK(std::abs(m.b_par_sq - par) < 4 * m.b_par_sq_stderr);
      CHECK(m.b_perp_sq_stderr < 0.05 * m.b_perp_sq);
    } else {
      // Direct sampling rarely lands inside the dominant short-range shell.
      CHECK(m.b_perp_sq < perp * 1.5);
    }
  }
}

TEST_CASE("coupling moments are reproducible for a fixed seed and worker count") {
  MonteCarloOptions o;
  o.samples = 20000;
  o.workers = 3;
  const auto a = coupling_second_moments(50.0, 0.154e-9, o);
  const auto b = coupling_second_moments(50.0, 0.154e-9, o);
  CHECK(a.b_perp_sq == b.b_perp_sq);
  CHECK(a.b_par_sq == b.b_par_sq);
  o.seed = 2;
  CHECK(coupling_second_moments(50.0, 0.154e-9, o).b_perp_sq != a.b_perp_sq);
  CHECK_THROWS_AS(coupling_second_moments(50.0, 0.0, o), std::invalid_argument);
}

TEST_CASE("coupling moments vanish with density and report their scaling") {
  MonteCarloOptions o;
  o.samples = 100000;
  const auto m50 = coupling_second_moments(50.0, 0.154e-9, o);
  const auto tiny = coupling_second_moments(1e-3, 0.154e-9, o);
  CHECK(tiny.b_perp_sq < 1e-3 * m50.b_perp_sq);
  CHECK(tiny.b_par_sq < 1e-3 * m50.b_par_sq);

  std::vector<double> x, y;
  for (double ppm : {10.0, 50.0, 100.0}) {
    x.push_back(std::log(ppm));
    y.push_back(std::log(coupling_second_moments(ppm, 0.154e-9, o).b_perp_sq));
  }
  const double mx = (x[0] + x[1] + x[2]) / 3, my = (y[0] + y[1] + y[2]) / 3;
  double sxy = 0, sxx = 0;
  for (int i = 0; i < 3; ++i) sxy += (x[i] - mx) * (y[i] - my), sxx += (x[i] - mx) * (x[i] - mx);
  const double slope = sxy / sxx;
  MESSAGE("empirical <B_perp^2> scaling exponent in density: " << slope);
  CHECK(std::isfinite(slope));
}
