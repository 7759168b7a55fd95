#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "otssl/errors.hpp"
#include "otssl/tensor.hpp"

namespace otssl {

inline constexpr double kHistogramMassTolerance = 1e-9;

// Discrete probability distribution over grid pixels.
struct Histogram {
  std::vector<double> mass;

  std::size_t size() const { return mass.size(); }

  double total() const {
    double s = 0.0;
    for (double v : mass) s += v;
    return s;
  }

  void validate() const {
    for (double v : mass) {
      if (!(v >= 0.0)) throw numeric_error("Histogram: negative or non-finite mass");
    }
    if (std::abs(total() - 1.0) > kHistogramMassTolerance)
      throw numeric_error("Histogram: mass does not sum to 1");
  }
};

// Offset-and-scale normalization: subtract the channel minimum, divide by
// the remaining total. A constant channel has no mass to move and is
// rejected rather than silently replaced by a uniform histogram.
inline Histogram normalize_image(const Tensor& channel) {
  if (channel.size() == 0) throw numeric_error("normalize_image: empty channel");
  if (!channel.all_finite()) throw numeric_error("normalize_image: non-finite channel");

  const auto& v = channel.values();
  const double lo = *std::min_element(v.begin(), v.end());
  double total = 0.0;
  for (double x : v) total += x - lo;
  if (total <= 0.0) throw numeric_error("normalize_image: degenerate constant channel");

  Histogram h;
  h.mass.resize(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) h.mass[i] = (v[i] - lo) / total;
  return h;
}

}  // namespace otssl
