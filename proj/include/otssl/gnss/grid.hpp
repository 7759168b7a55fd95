#pragma once

#include <cmath>
#include <cstddef>

#include "otssl/errors.hpp"

namespace otssl {

// Code-delay / Doppler search grid of the correlator image. Physical
// coordinates are anchored so that (delay 0, doppler 0) falls exactly on the
// centre cell (0-based index n/2 along each axis) with step 2*span/n; the
// grid therefore covers [-span, span) up to one cell of asymmetry. Having
// the origin on-grid keeps the line-of-sight peak at its nominal amplitude.
struct GridSpec {
  std::size_t height = 26;      // doppler axis (rows)
  std::size_t width = 26;       // code-delay axis (columns)
  double delay_span_chips = 1.5;
  double doppler_span_hz = 500.0;

  void validate() const {
    if (height < 2 || width < 2)
      throw config_error("GridSpec: height and width must be at least 2");
    if (!(delay_span_chips > 0.0) || !(doppler_span_hz > 0.0))
      throw config_error("GridSpec: spans must be strictly positive");
    if (!std::isfinite(delay_span_chips) || !std::isfinite(doppler_span_hz))
      throw config_error("GridSpec: spans must be finite");
  }

  std::size_t pixels() const { return height * width; }

  double delay_step() const { return 2.0 * delay_span_chips / static_cast<double>(width); }
  double doppler_step() const { return 2.0 * doppler_span_hz / static_cast<double>(height); }

  // Physical coordinates of a cell, 0-based indices.
  double delay_at(std::size_t col) const {
    return (static_cast<double>(col) - static_cast<double>(width / 2)) * delay_step();
  }
  double doppler_at(std::size_t row) const {
    return (static_cast<double>(row) - static_cast<double>(height / 2)) * doppler_step();
  }

  bool operator==(const GridSpec&) const = default;
};

}  // namespace otssl
