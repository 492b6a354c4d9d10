#include "nvesr/deconv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace nvesr::deconv {

namespace {

double uniform_spacing(std::span<const double> grid, const char* what) {
  if (grid.size() < 2) throw std::invalid_argument(std::string(what) + ": need at least two grid points");
  if (!is_uniform(grid)) throw std::invalid_argument(std::string(what) + ": grid is not uniform");
  const double d = (grid.back() - grid.front()) / static_cast<double>(grid.size() - 1);
  if (!(d > 0.0)) throw std::invalid_argument(std::string(what) + ": grid must be ascending");
  return d;
}

void require_matching_kernel(const FilterKernel& g, double spacing) {
  const auto& kg = g.grid();
  if (kg.size() < 2) return;
  const double ks = uniform_spacing(kg, "kernel");
  if (std::abs(ks - spacing) > 1e-9 * spacing) throw std::invalid_argument("grid mismatch: kernel spacing differs");
}

double interpolate(std::span<const double> x, std::span<const double> y, double at) {
  auto it = std::upper_bound(x.begin(), x.end(), at);
  if (it == x.begin()) return y.front();
  if (it == x.end()) return y.back();
  const auto j = static_cast<std::size_t>(it - x.begin());
  const double w = (at - x[j - 1]) / (x[j] - x[j - 1]);
  return y[j - 1] + w * (y[j] - y[j - 1]);
}

}  // namespace

const char* to_string(PadMode mode) {
  switch (mode) {
    case PadMode::EdgeMean: return "edge_mean";
    case PadMode::Mean: return "mean";
    case PadMode::Zero: return "zero";
  }
  return "?";
}

PadMode parse_pad_mode(const std::string& name) {
  if (name == "edge_mean") return PadMode::EdgeMean;
  if (name == "mean") return PadMode::Mean;
  if (name == "zero") return PadMode::Zero;
  throw std::invalid_argument("unknown pad mode '" + name + "' (expected edge_mean, mean or zero)");
}

NoisePsd NoisePsd::white(double level) {
  NoisePsd n;
  n.level = level;
  n.validate();
  return n;
}

NoisePsd NoisePsd::from_sigma(double sigma, std::size_t n) {
  return white(static_cast<double>(n) * sigma * sigma);
}

bool NoisePsd::is_zero() const {
  if (bins.empty()) return level == 0.0;
  return std::all_of(bins.begin(), bins.end(), [](double v) { return v == 0.0; });
}

void NoisePsd::validate() const {
  auto bad = [](double v) { return !(v >= 0.0) || !std::isfinite(v); };
  if (bad(level) || std::any_of(bins.begin(), bins.end(), bad))
    throw std::invalid_argument("noise psd must be finite and >= 0");
}

NoisePsd default_noise_psd(std::span<const double> stderrs) {
  if (stderrs.empty()) return {};
  std::vector<double> sq(stderrs.size());
  std::transform(stderrs.begin(), stderrs.end(), sq.begin(), [](double s) { return s * s; });
  const auto mid = sq.begin() + static_cast<std::ptrdiff_t>(sq.size() / 2);
  std::nth_element(sq.begin(), mid, sq.end());
  double median = *mid;
  if (sq.size() % 2 == 0) median = 0.5 * (median + *std::max_element(sq.begin(), mid));
  return NoisePsd::white(static_cast<double>(stderrs.size()) * median);
}

double ConvolutionProblem::spacing() const { return uniform_spacing(omega0, "ConvolutionProblem"); }

void ConvolutionProblem::set_kernel(const FilterKernel& g) {
  const double d = spacing();
  const auto n = static_cast<double>(omega0.size());
  kernel = g.resample(make_uniform_grid(-(n - 1.0) * d, (n - 1.0) * d, 2 * omega0.size() - 1));
}

ConvolutionProblem to_omega0_domain(const forward::RateProfile& profile, const PhysicalConstants& pc) {
  const auto& b = profile.sweep.values();
  const std::size_t n = b.size();
  if (n < 16) throw std::invalid_argument("to_omega0_domain: need at least 16 field points");
  if (profile.gamma1.size() != n) throw std::invalid_argument("to_omega0_domain: profile size mismatch");
  for (std::size_t i = 1; i < n; ++i)
    if (!(b[i] > b[i - 1])) throw std::invalid_argument("to_omega0_domain: field sweep must be increasing");

  // Omega0 decreases with field; walk the sweep backwards.
  std::vector<double> x(n), y(n), e(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t src = n - 1 - i;
    x[i] = omega0_offset(b[src], pc);
    y[i] = profile.gamma1[src];
    if (profile.gamma1_stderr.size() == n) e[i] = profile.gamma1_stderr[src];
  }

  ConvolutionProblem p;
  p.omega0 = make_uniform_grid(x.front(), x.back(), n);
  p.signal.resize(n);
  p.signal_stderr.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    p.signal[i] = interpolate(x, y, p.omega0[i]);
    p.signal_stderr[i] = interpolate(x, e, p.omega0[i]);
  }
  p.noise_psd = default_noise_psd(p.signal_stderr);
  return p;
}

std::vector<double> convolve_direct(std::span<const double> x, std::span<const double> taps) {
  if (taps.size() % 2 == 0) throw std::invalid_argument("convolve: taps must have odd length");
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  const auto h = static_cast<std::ptrdiff_t>(taps.size() / 2);
  std::vector<double> y(x.size(), 0.0);
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, i - h);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(n - 1, i + h);
    double acc = 0.0;
    for (std::ptrdiff_t j = lo; j <= hi; ++j) acc += x[static_cast<std::size_t>(j)] * taps[static_cast<std::size_t>(i - j + h)];
    y[static_cast<std::size_t>(i)] = acc;
  }
  return y;
}

std::vector<double> convolve_fft(std::span<const double> x, std::span<const double> taps) {
  if (taps.size() % 2 == 0) throw std::invalid_argument("convolve: taps must have odd length");
  if (x.empty()) return {};
  const std::size_t h = taps.size() / 2;
  const std::size_t p = fft::next_power_of_two(x.size() + taps.size() - 1);
  std::vector<double> xa(p, 0.0), ta(p, 0.0);
  std::copy(x.begin(), x.end(), xa.begin());
  std::copy(taps.begin(), taps.end(), ta.begin());
  auto xf = fft::forward(std::span<const double>(xa));
  const auto tf = fft::forward(std::span<const double>(ta));
  for (std::size_t k = 0; k < p; ++k) xf[k] *= tf[k];
  const auto full = fft::inverse_real(xf);
  return {full.begin() + static_cast<std::ptrdiff_t>(h), full.begin() + static_cast<std::ptrdiff_t>(h + x.size())};
}

std::vector<double> convolve(const SpectralDensity& s, const FilterKernel& g, ConvolutionMethod method) {
  const double d = uniform_spacing(s.omega(), "convolve");
  require_matching_kernel(g, d);
  const auto taps = g.centered_taps(d, s.size() - 1);
  return method == ConvolutionMethod::Direct ? convolve_direct(s.values(), taps) : convolve_fft(s.values(), taps);
}

std::vector<double> circular_kernel(const FilterKernel& g, double spacing, std::size_t n) {
  std::vector<double> c(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double offset = k < n / 2 ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(n);
    c[k] = g(offset * spacing);
  }
  return c;
}

std::vector<Complex> wiener_transfer(std::span<const Complex> g_hat, std::span<const Complex> s_hat,
                                     const NoisePsd& noise) {
  if (g_hat.size() != s_hat.size()) throw std::invalid_argument("wiener: transform sizes differ");
  if (!noise.bins.empty() && noise.bins.size() != g_hat.size())
    throw std::invalid_argument("wiener: noise psd has the wrong number of bins");
  noise.validate();
  const std::size_t n = g_hat.size();
  std::vector<Complex> h(n);

  if (noise.is_zero()) {
    double gmax = 0.0;
    for (const auto& v : g_hat) gmax = std::max(gmax, std::abs(v));
    for (std::size_t k = 0; k < n; ++k) {
      if (!(std::abs(g_hat[k]) >= 1e-12 * gmax))
        throw NumericalError("wiener: ill-posed inversion, kernel transform vanishes at bin " + std::to_string(k));
      h[k] = 1.0 / g_hat[k];
    }
    return h;
  }

  for (std::size_t k = 0; k < n; ++k) {
    const double g2 = std::norm(g_hat[k]);
    const double s2 = std::norm(s_hat[k]);
    const double den = g2 * s2 + noise.at(k);
    if (den > 0.0) {
      h[k] = std::conj(g_hat[k]) * s2 / den;
    } else {
      h[k] = g2 > 0.0 ? 1.0 / g_hat[k] : Complex(0.0);
    }
  }
  return h;
}

TransferFunction wiener_filter(const FilterKernel& g, const SpectralDensity& s0, const NoisePsd& noise) {
  const double d = uniform_spacing(s0.omega(), "wiener_filter");
  require_matching_kernel(g, d);
  TransferFunction tf;
  const auto c = circular_kernel(g, d, s0.size());
  tf.kernel_hat = fft::forward(std::span<const double>(c));
  const auto s_hat = fft::forward(std::span<const double>(s0.values()));
  tf.h = wiener_transfer(tf.kernel_hat, s_hat, noise);
  return tf;
}

DeconvolutionResult deconvolve_iterative(std::span<const double> omega, std::span<const double> m,
                                         const FilterKernel& g, const NoisePsd& noise,
                                         const DeconvolutionOptions& options) {
  if (m.size() != omega.size()) throw std::invalid_argument("deconvolve: signal and grid sizes differ");
  const double d = uniform_spacing(omega, "deconvolve");
  require_matching_kernel(g, d);
  if (options.max_iterations < 1) throw std::invalid_argument("deconvolve: max_iterations must be >= 1");
  if (!(options.tolerance > 0.0)) throw std::invalid_argument("deconvolve: tolerance must be > 0");
  if (!(options.taper_fraction >= 0.0 && options.taper_fraction <= 0.5))
    throw std::invalid_argument("deconvolve: taper_fraction must lie in [0, 0.5]");
  if (!(options.noise_floor >= 0.0)) throw std::invalid_argument("deconvolve: noise_floor must be >= 0");
  noise.validate();

  const std::size_t n = m.size();
  const std::size_t p = fft::next_power_of_two(2 * n);
  if (!noise.bins.empty() && noise.bins.size() != p)
    throw std::invalid_argument("deconvolve: per-bin noise psd must have " + std::to_string(p) + " bins");

  DeconvolutionResult result;
  result.padded_length = p;
  const auto taper = static_cast<std::size_t>(std::floor(options.taper_fraction * static_cast<double>(n)));
  switch (options.pad_mode) {
    case PadMode::Mean:
      result.pad_value = std::accumulate(m.begin(), m.end(), 0.0) / static_cast<double>(n);
      break;
    case PadMode::EdgeMean: {
      const std::size_t k = std::clamp<std::size_t>(taper, 1, n / 2);
      const double lo = std::accumulate(m.begin(), m.begin() + static_cast<std::ptrdiff_t>(k), 0.0);
      const double hi = std::accumulate(m.end() - static_cast<std::ptrdiff_t>(k), m.end(), 0.0);
      result.pad_value = (lo + hi) / static_cast<double>(2 * k);
      break;
    }
    case PadMode::Zero:
      result.pad_value = 0.0;
      break;
  }

  std::vector<double> x(p, result.pad_value);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t edge = std::min(i, n - 1 - i);
    double w = 1.0;
    if (edge < taper) w = 0.5 * (1.0 - std::cos(std::numbers::pi * (static_cast<double>(edge) + 0.5) / static_cast<double>(taper)));
    x[i] = result.pad_value + w * (m[i] - result.pad_value);
  }

  const auto c = circular_kernel(g, d, p);
  const double kernel_sum = std::accumulate(c.begin(), c.end(), 0.0);
  if (!(kernel_sum > 0.0)) throw NumericalError("deconvolve: kernel has no weight on this grid");
  const auto g_hat = fft::forward(std::span<const double>(c));
  const auto m_hat = fft::forward(std::span<const double>(x));

  double m_peak = 0.0;
  for (const auto& v : m_hat) m_peak = std::max(m_peak, std::norm(v));
  NoisePsd effective = noise;
  const double floor = options.noise_floor * m_peak;
  effective.level = std::max(effective.level, floor);
  for (auto& v : effective.bins) v = std::max(v, floor);
  result.noise_level = effective.level;

  std::vector<double> s(p);
  std::transform(x.begin(), x.end(), s.begin(), [&](double v) { return v / kernel_sum; });

  int growth = 0;
  for (int it = 1; it <= options.max_iterations; ++it) {
    const auto s_hat = fft::forward(std::span<const double>(s));
    auto h = wiener_transfer(g_hat, s_hat, effective);
    for (std::size_t k = 0; k < p; ++k) h[k] *= m_hat[k];
    auto next = fft::inverse_real(h);

    double diff = 0.0;
    double ref = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      diff += (next[i] - s[i]) * (next[i] - s[i]);
      ref += next[i] * next[i];
    }
    const double change = ref > 0.0 ? std::sqrt(diff / ref) : (diff > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    if (!std::isfinite(change) && ref > 0.0) throw NumericalError("deconvolve: non-finite iterate");
    s = std::move(next);
    result.changes.push_back(change);
    result.iterations = it;

    if (change < options.tolerance) {
      result.converged = true;
      break;
    }
    if (result.changes.size() >= 2 && change > result.changes[result.changes.size() - 2]) {
      if (++growth >= 3) {
        result.diverged = true;
        break;
      }
    } else {
      growth = 0;
    }
  }

  result.unfloored.assign(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(n));
  std::vector<double> values = result.unfloored;
  for (auto& v : values) v = std::max(0.0, v);
  result.spectrum = SpectralDensity(std::vector<double>(omega.begin(), omega.end()), std::move(values));
  return result;
}

DeconvolutionResult deconvolve_iterative(const ConvolutionProblem& problem, const DeconvolutionOptions& options) {
  if (!problem.kernel) throw std::invalid_argument("deconvolve: problem has no kernel");
  return deconvolve_iterative(problem.omega0, problem.signal, *problem.kernel, problem.noise_psd, options);
}

}  // namespace nvesr::deconv
