#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "nvesr/filters.hpp"
#include "oracles.hpp"

using namespace nvesr;
using doctest::Approx;

namespace {
const double kG2 = 5e6;

double fwhm_on_grid(const FilterKernel& k) {
  // Bisection for the half-maximum point on the positive side.
  double lo = 0.0, hi = 1e3 * k.gamma2();
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (k(mid) > 0.5 ? lo : hi) = mid;
  }
  return 2.0 * lo;
}
}  // namespace

TEST_CASE("kernel shape names") {
  CHECK(parse_kernel_shape("lorentzian") == KernelShape::Lorentzian);
  CHECK(parse_kernel_shape("sqrt_lorentzian") == KernelShape::SqrtLorentzian);
  CHECK(std::string(to_string(KernelShape::SqrtLorentzian)) == "sqrt_lorentzian");
  CHECK_THROWS_AS(parse_kernel_shape("gaussian"), std::invalid_argument);
}

TEST_CASE("Lorentzian kernel: unit peak, half value at gamma2, FWHM 2 gamma2") {
  const auto k = lorentzian_kernel(kG2, make_uniform_grid(-10 * kG2, 10 * kG2, 201));
  CHECK(k(0.0) == Approx(1.0).epsilon(1e-15));
  CHECK(k(0.0) / k(kG2) == Approx(2.0).epsilon(1e-14));
  CHECK(k(-kG2) == Approx(0.5).epsilon(1e-14));
  CHECK(fwhm_on_grid(k) == Approx(2 * kG2).epsilon(1e-10));
  CHECK(k.samples().size() == 201);
  CHECK(k.samples()[100] == Approx(1.0));
}

TEST_CASE("Lorentzian kernel integrates to pi gamma2") {
  const auto k = lorentzian_kernel(kG2, {});
  const double integral = oracle::simpson([&](double x) { return k(x); }, -50 * kG2, 50 * kG2, 20000);
  // The truncated tails carry 2/pi * atan-complement ~ 1.3% of the mass.
  CHECK(integral == Approx(2 * kG2 * std::atan(50.0)).epsilon(1e-9));
  CHECK(integral == Approx(std::numbers::pi * kG2).epsilon(0.013));
  const double wide = oracle::simpson([&](double x) { return k(x); }, -1e4 * kG2, 1e4 * kG2, 2'000'000);
  CHECK(wide == Approx(std::numbers::pi * kG2).epsilon(1e-3));
}

TEST_CASE("square-root Lorentzian kernel") {
  const auto k = sqrt_lorentzian_kernel(kG2, {});
  const auto l = lorentzian_kernel(kG2, {});
  CHECK(k(0.0) == Approx(1.0));
  CHECK(k(kG2) == Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));
  CHECK(k(10 * kG2) > l(10 * kG2));
  CHECK(k(10 * kG2) == Approx(1.0 / std::sqrt(101.0)).epsilon(1e-14));
  CHECK(fwhm_on_grid(k) == Approx(2 * std::sqrt(3.0) * kG2).epsilon(1e-10));
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-30, 30);
  for (int i = 0; i < 100; ++i) {
    const double x = u(rng) * kG2;
    CHECK(k(x) == Approx(std::sqrt(l(x))).epsilon(1e-13));
    CHECK(k(x) == Approx(k(-x)).epsilon(1e-15));
  }
}

TEST_CASE("kernel evaluation agrees on arbitrary points and after resampling") {
  const auto k = lorentzian_kernel(kG2, make_uniform_grid(-1e8, 1e8, 11));
  const auto r = k.resample(make_uniform_grid(-3e7, 3e7, 7));
  for (std::size_t i = 0; i < r.grid().size(); ++i) CHECK(r.samples()[i] == Approx(k(r.grid()[i])));
  const auto taps = k.centered_taps(1e6, 4);
  REQUIRE(taps.size() == 9);
  CHECK(taps[4] == Approx(1.0));
  for (int i = 0; i < 4; ++i) CHECK(taps[i] == Approx(taps[8 - i]));
}

TEST_CASE("invalid kernel parameters are rejected") {
  CHECK_THROWS_AS(lorentzian_kernel(0.0, {}), std::invalid_argument);
  CHECK_THROWS_AS(lorentzian_kernel(-1.0, {}), std::invalid_argument);
  CHECK_THROWS_AS(kernel_from_fid(0.0, {}, {}), std::invalid_argument);
}

TEST_CASE("kernel from FID time") {
  const auto k = kernel_from_fid(200e-9, {}, {});
  CHECK(k.gamma2() == Approx(5e6).epsilon(1e-12));
  CHECK(k(0.0) == Approx(1.0));
  CHECK(k(5e6) == Approx(0.5));

  const double a = mhz_to_angular(3.0);
  const auto hf = kernel_from_fid(200e-9, {-a, a}, {});
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1e8, 1e8);
  for (int i = 0; i < 100; ++i) {
    const double x = u(rng);
    CHECK(hf(x) == Approx(hf(-x)).epsilon(1e-13));
  }
  // Lines 3.8 linewidths apart are resolved: the maxima sit at the shifts.
  CHECK(hf(a) > hf(0.0));
  CHECK(hf(a) == Approx(1.0).epsilon(1e-3));
  double peak = 0;
  for (double x = -2 * a; x <= 2 * a; x += a / 2000) peak = std::max(peak, hf(x));
  CHECK(peak <= 1.0 + 1e-12);
  CHECK(peak == Approx(1.0).epsilon(1e-6));

  const auto single = kernel_from_fid(200e-9, {a}, make_uniform_grid(-2 * a, 2 * a, 401));
  const auto it = std::max_element(single.samples().begin(), single.samples().end());
  CHECK(single.grid()[static_cast<std::size_t>(it - single.samples().begin())] == Approx(a));
}
