#include "nvesr/filters.hpp"

#include <algorithm>
#include <cmath>

namespace nvesr {

const char* to_string(KernelShape shape) {
  return shape == KernelShape::Lorentzian ? "lorentzian" : "sqrt_lorentzian";
}

KernelShape parse_kernel_shape(const std::string& name) {
  if (name == "lorentzian") return KernelShape::Lorentzian;
  if (name == "sqrt_lorentzian") return KernelShape::SqrtLorentzian;
  throw std::invalid_argument("unknown kernel shape '" + name + "' (expected lorentzian or sqrt_lorentzian)");
}

FilterKernel::FilterKernel(KernelShape shape, double gamma2, std::vector<double> centers, std::vector<double> grid)
    : shape_(shape), gamma2_(gamma2), centers_(std::move(centers)), grid_(std::move(grid)) {
  if (!(gamma2_ > 0.0) || !std::isfinite(gamma2_)) throw std::invalid_argument("FilterKernel: gamma2 must be > 0");
  if (centers_.empty()) centers_.push_back(0.0);
  std::sort(centers_.begin(), centers_.end());

  if (centers_.size() == 1) {
    normalization_ = 1.0 / raw(centers_.front());
  } else {
    // The maximum of a sum of unimodal peaks sits near a centre or between
    // two neighbouring ones; refine the best candidate by golden section.
    std::vector<double> candidates = centers_;
    for (std::size_t i = 1; i < centers_.size(); ++i) candidates.push_back(0.5 * (centers_[i] + centers_[i - 1]));
    double best = *std::max_element(candidates.begin(), candidates.end(),
                                    [&](double a, double b) { return raw(a) < raw(b); });
    double lo = best - gamma2_;
    double hi = best + gamma2_;
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int it = 0; it < 100; ++it) {
      const double a = hi - inv_phi * (hi - lo);
      const double b = lo + inv_phi * (hi - lo);
      if (raw(a) < raw(b)) lo = a; else hi = b;
    }
    best = 0.5 * (lo + hi);
    double peak = raw(best);
    for (double c : candidates) peak = std::max(peak, raw(c));
    normalization_ = 1.0 / peak;
  }

  samples_.resize(grid_.size());
  std::transform(grid_.begin(), grid_.end(), samples_.begin(), [this](double w) { return (*this)(w); });
}

double FilterKernel::raw(double omega) const {
  double sum = 0.0;
  const double g2 = gamma2_ * gamma2_;
  for (double c : centers_) {
    const double x = omega - c;
    const double lorentz = g2 / (x * x + g2);
    sum += shape_ == KernelShape::Lorentzian ? lorentz : std::sqrt(lorentz);
  }
  return sum;
}

double FilterKernel::operator()(double omega) const { return normalization_ * raw(omega); }

FilterKernel FilterKernel::resample(std::vector<double> grid) const {
  return FilterKernel(shape_, gamma2_, centers_, std::move(grid));
}

std::vector<double> FilterKernel::centered_taps(double spacing, std::size_t half_width) const {
  std::vector<double> taps(2 * half_width + 1);
  for (std::size_t k = 0; k < taps.size(); ++k) {
    const double offset = (static_cast<double>(k) - static_cast<double>(half_width)) * spacing;
    taps[k] = (*this)(offset);
  }
  return taps;
}

FilterKernel lorentzian_kernel(double gamma2, std::vector<double> grid) {
  return FilterKernel(KernelShape::Lorentzian, gamma2, {0.0}, std::move(grid));
}

FilterKernel sqrt_lorentzian_kernel(double gamma2, std::vector<double> grid) {
  return FilterKernel(KernelShape::SqrtLorentzian, gamma2, {0.0}, std::move(grid));
}

FilterKernel kernel_from_fid(double t2_star, std::vector<double> hyperfine_shifts, std::vector<double> grid,
                             KernelShape shape) {
  if (!(t2_star > 0.0)) throw std::invalid_argument("kernel_from_fid: T2* must be > 0");
  return FilterKernel(shape, 1.0 / t2_star, std::move(hyperfine_shifts), std::move(grid));
}

}  // namespace nvesr
