#include "nvesr/peaks.hpp"

#include <algorithm>
#include <stdexcept>

namespace nvesr {

std::vector<std::size_t> find_local_maxima(std::span<const double> y, double min_fraction) {
  std::vector<std::size_t> out;
  if (y.size() < 3) return out;
  const double top = *std::max_element(y.begin(), y.end());
  std::size_t i = 1;
  while (i + 1 < y.size()) {
    if (y[i] > y[i - 1]) {
      std::size_t j = i;
      while (j + 1 < y.size() && y[j + 1] == y[i]) ++j;
      if (j + 1 < y.size() && y[j + 1] < y[i] && y[i] >= min_fraction * top) out.push_back((i + j) / 2);
      i = j + 1;
    } else {
      ++i;
    }
  }
  return out;
}

std::optional<double> fwhm_at(std::span<const double> x, std::span<const double> y, std::size_t index) {
  if (x.size() != y.size() || index >= y.size()) throw std::invalid_argument("fwhm_at: bad input");
  const double half = 0.5 * y[index];
  std::size_t l = index;
  while (l > 0 && y[l] > half) --l;
  std::size_t r = index;
  while (r + 1 < y.size() && y[r] > half) ++r;
  if (y[l] > half || y[r] > half) return std::nullopt;
  auto cross = [&](std::size_t a, std::size_t b) {
    return x[a] + (half - y[a]) * (x[b] - x[a]) / (y[b] - y[a]);
  };
  return cross(r - 1, r) - cross(l, l + 1);
}

double refine_peak(std::span<const double> x, std::span<const double> y, std::size_t index) {
  if (index == 0 || index + 1 >= y.size()) return x[index];
  const double a = y[index - 1], b = y[index], c = y[index + 1];
  const double denom = a - 2.0 * b + c;
  if (denom >= 0.0) return x[index];
  const double shift = 0.5 * (a - c) / denom;
  return x[index] + shift * (x[index + 1] - x[index - 1]) / 2.0;
}

}  // namespace nvesr
