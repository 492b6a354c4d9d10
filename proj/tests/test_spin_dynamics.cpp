#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "nvesr/spin_dynamics.hpp"
#include "oracles.hpp"

using namespace nvesr;
using namespace nvesr::spin;
using doctest::Approx;

TEST_CASE("damping classification") {
  const double g = kTwoPi * 5e6;
  CHECK(classify_damping({g, g, 0}) == DampingRegime::UnderDamped);
  CHECK(classify_damping({0, g, 0}) == DampingRegime::OverDamped);
  CHECK(classify_damping({g / (2 * std::sqrt(2.0)), g, 0}) == DampingRegime::CriticallyDamped);
  CHECK(classify_damping({g / (2 * std::sqrt(2.0)) * (1 + 1e-9), g, 0}) == DampingRegime::UnderDamped);
  CHECK(classify_damping({g / (2 * std::sqrt(2.0)) * (1 - 1e-9), g, 0}) == DampingRegime::OverDamped);
  CHECK_THROWS_AS(TwoLevelParams({-1, g, 0}).validate(), std::invalid_argument);
  CHECK_THROWS_AS(TwoLevelParams({1, 0, 0}).validate(), std::invalid_argument);
}

TEST_CASE("resonant population limits") {
  const double g = kTwoPi * 5e6;
  for (double b : {0.0, 0.01 * g, g / (2 * std::sqrt(2.0)), 2 * g}) CHECK(population_resonant(b, g, 0.0) == 1.0);
  for (double t : {0.0, 1e-7, 1e-3, 10.0}) CHECK(population_resonant(0.0, g, t) == 1.0);
  CHECK(population_resonant(kTwoPi * 1e5, g, 1e-2) == Approx(0.5).epsilon(1e-12));
  CHECK_THROWS_AS((void)population_resonant(1.0, g, -1.0), std::invalid_argument);
}

TEST_CASE("resonant closed form agrees with the Bloch equations in every regime") {
  const double g = kTwoPi * 2e6;
  for (double ratio : {0.05, 0.2, 1.0 / (2 * std::sqrt(2.0)), 0.36, 1.0, 3.0}) {
    const double b = ratio * g;
    std::vector<double> t;
    for (int i = 0; i <= 60; ++i) t.push_back(i * 0.25 / g * (1.0 + 1.0 / (ratio * ratio)));
    const auto ref = oracle::bloch_population(b, g, 0.0, t, 0.002 / std::max(g, b));
    double err = 0;
    for (std::size_t i = 0; i < t.size(); ++i) err = std::max(err, std::abs(population_resonant(b, g, t[i]) - ref[i]));
    CHECK_MESSAGE(err < 1e-9, "B/G2 = " << ratio);
  }
}

TEST_CASE("relaxation rate is a Lorentzian in detuning") {
  const double g = kTwoPi * 5e6, b = kTwoPi * 1e5;
  CHECK(relaxation_rate({b, g, 0}) == Approx(2 * b * b / g).epsilon(1e-15));
  CHECK(relaxation_rate({b, g, g}) == Approx(0.5 * relaxation_rate({b, g, 0})).epsilon(1e-15));
  CHECK(relaxation_rate({b, g, -g}) == Approx(0.5 * relaxation_rate({b, g, 0})).epsilon(1e-15));
  CHECK(relaxation_rate({b, g, 1e6 * g}) < 1e-11 * relaxation_rate({b, g, 0}));
  CHECK_THROWS_AS((void)relaxation_rate({b, g, std::numeric_limits<double>::infinity()}), std::invalid_argument);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-50, 50);
  for (int i = 0; i < 200; ++i) {
    const double d = u(rng) * g;
    CHECK(relaxation_rate({b, g, d}) / relaxation_rate({b, g, 0}) == Approx(g * g / (d * d + g * g)).epsilon(1e-12));
  }
}

TEST_CASE("overdamped population") {
  const double g = kTwoPi * 5e6, b = kTwoPi * 1e5;
  const TwoLevelParams p{b, g, 0};
  CHECK(population_overdamped(p, 0) == 1.0);
  const double t = 3e-5;
  CHECK(population_overdamped(p, t) == Approx(0.5 + 0.5 * std::exp(-2 * b * b / g * t)).epsilon(1e-14));
  double prev = 1.0;
  for (int i = 1; i < 100; ++i) {
    const double v = population_overdamped({b, g, 0.3 * g}, i * 2e-6);
    CHECK(v <= prev);
    prev = v;
  }
  CHECK_THROWS_AS((void)population_overdamped(p, -1.0), std::invalid_argument);
}

TEST_CASE("integrated master equation: decoupled probe stays polarised") {
  const auto p = integrate_master_equation({0.0, kTwoPi * 5e6, kTwoPi * 1e6}, TimeGrid::logarithmic(1e-9, 1e-3, 30));
  for (double v : p) CHECK(v == Approx(1.0).epsilon(1e-12));
}

TEST_CASE("integrated master equation: resonant decay rate 2B^2/G2") {
  const double g = kTwoPi * 5e6, b = kTwoPi * 1e5;
  const double rate = 2 * b * b / g;
  CHECK(rate == Approx(2.51e4).epsilon(2e-3));
  std::vector<double> t;
  for (int i = 0; i < 40; ++i) t.push_back(20.0 / g + i * 2.0 / rate / 40.0);
  const auto p = integrate_master_equation({b, g, 0}, TimeGrid(t));
  CHECK(oracle::log_decay_rate(t, p) == Approx(rate).epsilon(0.01));
}

TEST_CASE("integrated master equation: underdamped oscillation matches closed form") {
  const double g = kTwoPi * 1e6, b = 2 * g;
  std::vector<double> t;
  for (int i = 0; i <= 400; ++i) t.push_back(i * 10.0 / g / 400.0);
  const auto p = integrate_master_equation({b, g, 0}, TimeGrid(t));
  double err = 0;
  bool crossed = false;
  for (std::size_t i = 0; i < t.size(); ++i) {
    err = std::max(err, std::abs(p[i] - population_resonant(b, g, t[i])));
    crossed = crossed || p[i] < 0.5;
  }
  CHECK(err < 1e-6);
  CHECK(crossed);
}

TEST_CASE("integrated master equation: overdamped rate matches the Lorentzian law") {
  const double b = kTwoPi * 1e5, g = 50 * b;
  const TwoLevelParams p{b, g, 0};
  std::vector<double> t;
  for (int i = 0; i < 30; ++i) t.push_back(20.0 / g + i * 3.0 / relaxation_rate(p) / 30.0);
  const auto num = integrate_master_equation(p, TimeGrid(t));
  CHECK(oracle::log_decay_rate(t, num) == Approx(relaxation_rate(p)).epsilon(0.01));
}

TEST_CASE("integrated master equation agrees with the Bloch equations off resonance") {
  const double g = kTwoPi * 2e6;
  for (double ratio : {0.1, 1.5}) {
    for (double dr : {0.5, 2.0}) {
      const double b = ratio * g, d = dr * g;
      std::vector<double> t;
      for (int i = 1; i <= 50; ++i) t.push_back(i * 0.4 / g);
      const auto num = integrate_master_equation({b, g, d}, TimeGrid(t));
      const auto ref = oracle::bloch_population(b, g, d, t, 0.002 / std::max({g, b, d}));
      for (std::size_t i = 0; i < t.size(); ++i) CHECK(num[i] == Approx(ref[i]).epsilon(1e-8));
    }
  }
}

TEST_CASE("integrated master equation matches the resonant form on a 10x10 parameter grid") {
  double worst = 0;
  for (int i = 0; i < 10; ++i) {
    const double g = kTwoPi * (0.5e6 + i * 1.0e6);
    for (int j = 0; j < 10; ++j) {
      const double b = g * std::pow(10.0, -1.5 + 1.8 * j / 9.0);  // B/G2 from 0.03 to 2
      const double gamma1 = 2 * b * b / g;
      std::vector<double> t;
      for (int k = 0; k <= 40; ++k) t.push_back(k * 20.0 / gamma1 / 40.0);
      const auto num = integrate_master_equation({b, g, 0}, TimeGrid(t));
      for (std::size_t k = 0; k < t.size(); ++k) worst = std::max(worst, std::abs(num[k] - population_resonant(b, g, t[k])));
    }
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("steady state is the equal mixture") {
  const double g = kTwoPi * 3e6;
  for (double ratio : {0.05, 1.0 / (2 * std::sqrt(2.0)), 2.0}) {
    const double b = ratio * g;
    const double t_end = 60.0 / (2 * b * b / g) + 60.0 / g;
    const auto p = integrate_master_equation({b, g, 0}, TimeGrid({0.0, t_end}));
    CHECK(p.front() == 1.0);
    CHECK(p.back() == Approx(0.5).epsilon(1e-8));
    CHECK(population_resonant(b, g, t_end) == Approx(0.5).epsilon(1e-12));
  }
}
