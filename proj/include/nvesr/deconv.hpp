#pragma once

// Convolution measurement model on the Omega0 = 2pi D - 2 omega0 axis and its
// iterative Wiener inversion.
//
// Convolutions are discrete: M_i = sum_j S_j G(Omega0_i - Omega_j) with S a
// per-bin weight on the same uniform grid as M. Transforms follow the fft
// namespace convention (1/N on the inverse); the Wiener ratio does not depend
// on it.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nvesr/core.hpp"
#include "nvesr/fft.hpp"
#include "nvesr/filters.hpp"
#include "nvesr/forward.hpp"

namespace nvesr::deconv {

using fft::Complex;

/// Noise power |F(eta)|^2 per transform bin. With no per-bin values the
/// spectrum is white at `level`.
struct NoisePsd {
  double level = 0.0;
  std::vector<double> bins;

  static NoisePsd white(double level);
  /// Flat level N sigma^2 of N uncorrelated samples with standard deviation sigma.
  static NoisePsd from_sigma(double sigma, std::size_t n);

  [[nodiscard]] double at(std::size_t k) const { return bins.empty() ? level : bins[k]; }
  [[nodiscard]] bool is_zero() const;
  /// Rejects negative or non-finite values.
  void validate() const;
};

/// N median(stderr^2): white noise level implied by per-point fit errors.
[[nodiscard]] NoisePsd default_noise_psd(std::span<const double> stderrs);

struct ConvolutionProblem {
  std::vector<double> omega0;  ///< uniform, ascending, rad/s
  std::vector<double> signal;
  std::vector<double> signal_stderr;
  std::optional<FilterKernel> kernel;
  NoisePsd noise_psd;

  [[nodiscard]] double spacing() const;
  /// Stores `g` resampled on offsets k * spacing, |k| < size().
  void set_kernel(const FilterKernel& g);
};

/// Maps a rate profile onto the Omega0 axis (ascending) and resamples it
/// uniformly by linear interpolation. Noise defaults to default_noise_psd of
/// the fit errors. Rejects fewer than 16 points.
[[nodiscard]] ConvolutionProblem to_omega0_domain(const forward::RateProfile& profile,
                                                  const PhysicalConstants& pc = {});

/// "Same"-size linear convolution of x with odd-length centred taps.
[[nodiscard]] std::vector<double> convolve_direct(std::span<const double> x, std::span<const double> taps);
[[nodiscard]] std::vector<double> convolve_fft(std::span<const double> x, std::span<const double> taps);

enum class ConvolutionMethod { Direct, Fft };

/// S * G on the support of S. The kernel grid must be uniform with the same
/// spacing as S.
[[nodiscard]] std::vector<double> convolve(const SpectralDensity& s, const FilterKernel& g,
                                           ConvolutionMethod method = ConvolutionMethod::Fft);

/// Kernel sampled circularly on a transform of length n: offsets k for
/// k < n/2 and k - n above.
[[nodiscard]] std::vector<double> circular_kernel(const FilterKernel& g, double spacing, std::size_t n);

/// H = conj(G)|S|^2 / (|G|^2 |S|^2 + N) bin by bin. With zero noise this is
/// 1/G, and a kernel bin below 1e-12 of the largest raises NumericalError.
[[nodiscard]] std::vector<Complex> wiener_transfer(std::span<const Complex> g_hat, std::span<const Complex> s_hat,
                                                   const NoisePsd& noise);

struct TransferFunction {
  std::vector<Complex> h;
  std::vector<Complex> kernel_hat;
};

/// Wiener transfer function on the grid of `s0`.
[[nodiscard]] TransferFunction wiener_filter(const FilterKernel& g, const SpectralDensity& s0,
                                             const NoisePsd& noise);

/// Constant the signal is padded with before transforming.
enum class PadMode {
  EdgeMean,  ///< mean of the tapered bins at both ends
  Mean,      ///< mean of the whole signal
  Zero,
};

[[nodiscard]] const char* to_string(PadMode mode);
/// Accepts "edge_mean", "mean" and "zero".
[[nodiscard]] PadMode parse_pad_mode(const std::string& name);

struct DeconvolutionOptions {
  int max_iterations = 10;
  double tolerance = 1e-4;  ///< relative L2 change between iterates
  double taper_fraction = 0.05;
  PadMode pad_mode = PadMode::EdgeMean;
  /// Lower bound on the noise power, relative to the peak of |F(M)|^2.
  /// Keeps a noiseless inversion from amplifying padding artefacts.
  double noise_floor = 1e-14;
};

struct DeconvolutionResult {
  SpectralDensity spectrum;
  /// Final iterate on the signal support before the zero floor.
  std::vector<double> unfloored;
  int iterations = 0;
  std::vector<double> changes;  ///< relative L2 change per iteration
  bool converged = false;
  bool diverged = false;
  std::size_t padded_length = 0;
  double pad_value = 0.0;
  double noise_level = 0.0;  ///< effective flat part of the noise power
};

/// Iterative Wiener deconvolution starting from S0 = M scaled by the kernel
/// sum. The signal is padded to a power of two at least twice its length and
/// its outer taper_fraction of bins on each side is blended into the pad value
/// with a raised cosine. Iteration stops at tolerance, at max_iterations, or
/// when the change grows three times in a row (flagged as diverged). The
/// returned estimate is floored at zero.
[[nodiscard]] DeconvolutionResult deconvolve_iterative(std::span<const double> omega, std::span<const double> m,
                                                       const FilterKernel& g, const NoisePsd& noise,
                                                       const DeconvolutionOptions& options = {});

[[nodiscard]] DeconvolutionResult deconvolve_iterative(const ConvolutionProblem& problem,
                                                       const DeconvolutionOptions& options = {});

}  // namespace nvesr::deconv
