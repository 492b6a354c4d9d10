#pragma once

// Thin FFTW wrapper. Forward transform is unnormalized, the inverse carries
// the 1/N factor.

#include <complex>
#include <span>
#include <vector>

namespace nvesr::fft {

using Complex = std::complex<double>;

[[nodiscard]] std::vector<Complex> forward(std::span<const Complex> x);
[[nodiscard]] std::vector<Complex> forward(std::span<const double> x);
[[nodiscard]] std::vector<Complex> inverse(std::span<const Complex> x);
/// Real part of the inverse transform.
[[nodiscard]] std::vector<double> inverse_real(std::span<const Complex> x);

[[nodiscard]] std::size_t next_power_of_two(std::size_t n);

}  // namespace nvesr::fft
