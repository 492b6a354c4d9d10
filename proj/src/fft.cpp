#include "nvesr/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <mutex>
#include <stdexcept>

namespace nvesr::fft {

namespace {

// FFTW's planner is not thread-safe; execution is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

class Plan {
 public:
  Plan(std::size_t n, Complex* in, Complex* out, int sign) {
    std::lock_guard lock(planner_mutex());
    plan_ = fftw_plan_dft_1d(static_cast<int>(n), reinterpret_cast<fftw_complex*>(in),
                             reinterpret_cast<fftw_complex*>(out), sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (!plan_) throw std::runtime_error("fftw: plan creation failed");
  }
  ~Plan() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan_);
  }
  Plan(const Plan&) = delete;
  Plan& operator=(const Plan&) = delete;

  void execute(Complex* in, Complex* out) const {
    fftw_execute_dft(plan_, reinterpret_cast<fftw_complex*>(in), reinterpret_cast<fftw_complex*>(out));
  }

 private:
  fftw_plan plan_ = nullptr;
};

std::vector<Complex> transform(std::vector<Complex> in, int sign) {
  std::vector<Complex> out(in.size());
  if (in.empty()) return out;
  Plan plan(in.size(), in.data(), out.data(), sign);
  plan.execute(in.data(), out.data());
  return out;
}

}  // namespace

std::vector<Complex> forward(std::span<const Complex> x) {
  return transform(std::vector<Complex>(x.begin(), x.end()), FFTW_FORWARD);
}

std::vector<Complex> forward(std::span<const double> x) {
  return transform(std::vector<Complex>(x.begin(), x.end()), FFTW_FORWARD);
}

std::vector<Complex> inverse(std::span<const Complex> x) {
  auto out = transform(std::vector<Complex>(x.begin(), x.end()), FFTW_BACKWARD);
  const double scale = 1.0 / static_cast<double>(out.size());
  for (auto& v : out) v *= scale;
  return out;
}

std::vector<double> inverse_real(std::span<const Complex> x) {
  const auto full = inverse(x);
  std::vector<double> out(full.size());
  std::transform(full.begin(), full.end(), out.begin(), [](const Complex& c) { return c.real(); });
  return out;
}

std::size_t next_power_of_two(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace nvesr::fft
