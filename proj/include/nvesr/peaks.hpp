#pragma once

// Peak bookkeeping on sampled curves.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace nvesr {

/// Indices of strict interior local maxima whose height is at least
/// `min_fraction` of the global maximum. Plateaus count once.
[[nodiscard]] std::vector<std::size_t> find_local_maxima(std::span<const double> y, double min_fraction = 0.0);

/// Full width at half maximum of the peak at `index`, measured with linear
/// interpolation between samples. Half maximum is taken relative to zero.
/// Empty when the curve does not fall below half height on both sides.
[[nodiscard]] std::optional<double> fwhm_at(std::span<const double> x, std::span<const double> y, std::size_t index);

/// Peak position refined by a parabola through the sample and its neighbours.
[[nodiscard]] double refine_peak(std::span<const double> x, std::span<const double> y, std::size_t index);

}  // namespace nvesr
