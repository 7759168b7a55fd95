#pragma once

#include <algorithm>
#include <array>
#include <vector>

#include "otssl/errors.hpp"

namespace otssl {

// Lower median: middle element for odd counts, the lower of the two middle
// elements for even counts. The protocol uses odd run counts, where this
// coincides with the interpolated median.
inline double lower_median(std::vector<double> values) {
  if (values.empty()) throw config_error("lower_median: empty input");
  std::sort(values.begin(), values.end());
  return values[(values.size() - 1) / 2];
}

// Linear interpolation between order statistics ("type 7").
inline double quantile_type7(const std::vector<double>& sorted, double q) {
  const double h = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(h);
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

inline std::array<double, 3> quartiles(std::vector<double> values) {
  if (values.size() < 4) throw config_error("quartiles: need at least 4 values");
  std::sort(values.begin(), values.end());
  return {quantile_type7(values, 0.25), quantile_type7(values, 0.5), quantile_type7(values, 0.75)};
}

}  // namespace otssl
