#include "nvesr/core.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

namespace nvesr {

void PhysicalConstants::validate() const {
  if (!(zero_field_splitting_hz > 0) || !(gamma_e > 0) || !(hbar > 0) || !(mu0_over_4pi > 0) ||
      !(diamond_atom_density > 0)) {
    throw std::invalid_argument("physical constants must be strictly positive");
  }
}

double zeeman_frequency(double b0_gauss, const PhysicalConstants& c) {
  if (!(b0_gauss >= 0.0)) throw std::invalid_argument("zeeman_frequency: field must be >= 0 G");
  return c.gamma_e * gauss_to_tesla(b0_gauss);
}

double omega0_offset(double b0_gauss, const PhysicalConstants& c) {
  return c.zero_field_splitting() - 2.0 * zeeman_frequency(b0_gauss, c);
}

double electron_resonance_field(const PhysicalConstants& c) {
  return tesla_to_gauss(std::numbers::pi * c.zero_field_splitting_hz / c.gamma_e);
}

std::vector<double> make_uniform_grid(double min, double max, std::size_t n) {
  if (n < 2) throw std::invalid_argument("make_uniform_grid: need at least 2 points");
  if (!(max > min)) throw std::invalid_argument("make_uniform_grid: max must exceed min");
  std::vector<double> grid(n);
  const double step = (max - min) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) grid[i] = min + step * static_cast<double>(i);
  grid.back() = max;
  return grid;
}

std::vector<double> make_log_grid(double min, double max, std::size_t n) {
  if (!(min > 0)) throw std::invalid_argument("make_log_grid: min must be positive");
  auto exponents = make_uniform_grid(std::log(min), std::log(max), n);
  for (auto& e : exponents) e = std::exp(e);
  exponents.front() = min;
  exponents.back() = max;
  return exponents;
}

bool is_uniform(std::span<const double> grid, double rel_tol) {
  if (grid.size() < 2) return false;
  const double mean = (grid.back() - grid.front()) / static_cast<double>(grid.size() - 1);
  if (!(mean > 0)) return false;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (std::abs((grid[i] - grid[i - 1]) - mean) > rel_tol * mean) return false;
  }
  return true;
}

double trapezoid(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("trapezoid: size mismatch");
  double sum = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) sum += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
  return sum;
}

FieldSweep::FieldSweep(std::vector<double> b0_gauss) : b0_(std::move(b0_gauss)) {
  if (b0_.empty()) throw std::invalid_argument("FieldSweep: empty sweep");
  if (!(b0_.front() > 0)) throw std::invalid_argument("FieldSweep: fields must be positive");
  for (std::size_t i = 1; i < b0_.size(); ++i) {
    if (!(b0_[i] > b0_[i - 1])) throw std::invalid_argument("FieldSweep: fields must be strictly increasing");
  }
}

FieldSweep FieldSweep::uniform(double min_gauss, double max_gauss, std::size_t n) {
  return FieldSweep(make_uniform_grid(min_gauss, max_gauss, n));
}

std::vector<double> FieldSweep::zeeman_frequencies(const PhysicalConstants& c) const {
  std::vector<double> out(b0_.size());
  std::transform(b0_.begin(), b0_.end(), out.begin(), [&](double b) { return zeeman_frequency(b, c); });
  return out;
}

TimeGrid::TimeGrid(std::vector<double> seconds) : t_(std::move(seconds)) {
  if (t_.empty()) throw std::invalid_argument("TimeGrid: empty grid");
  if (!(t_.front() >= 0)) throw std::invalid_argument("TimeGrid: times must be >= 0");
  for (std::size_t i = 1; i < t_.size(); ++i) {
    if (!(t_[i] > t_[i - 1])) throw std::invalid_argument("TimeGrid: times must be strictly increasing");
  }
}

TimeGrid TimeGrid::logarithmic(double min_s, double max_s, std::size_t n) {
  return TimeGrid(make_log_grid(min_s, max_s, n));
}

SpectralDensity::SpectralDensity(std::vector<double> omega, std::vector<double> values)
    : omega_(std::move(omega)), values_(std::move(values)) {
  if (omega_.size() != values_.size()) throw std::invalid_argument("SpectralDensity: size mismatch");
  if (!is_uniform(omega_)) throw std::invalid_argument("SpectralDensity: grid must be uniform");
  if (std::any_of(values_.begin(), values_.end(), [](double v) { return !(v >= 0.0); })) {
    throw std::invalid_argument("SpectralDensity: values must be non-negative");
  }
  norm_ = trapezoid(omega_, values_);
}

double SpectralDensity::spacing() const {
  return (omega_.back() - omega_.front()) / static_cast<double>(omega_.size() - 1);
}

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0x6e76u};
  return std::mt19937_64(seq);
}

void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& fn) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i) fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace nvesr
