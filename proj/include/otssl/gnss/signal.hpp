#pragma once

#include <cmath>
#include <numbers>

#include "otssl/errors.hpp"
#include "otssl/gnss/grid.hpp"
#include "otssl/rng.hpp"
#include "otssl/tensor.hpp"

namespace otssl {

// Coherent integration time of the correlator, fixed at 1 ms (GPS C/A).
inline constexpr double kCoherentIntegrationS = 1e-3;

// One two-channel correlator snapshot; the sample type of the whole pipeline.
struct IQPair {
  Tensor i_channel;  // height x width
  Tensor q_channel;

  IQPair() = default;
  explicit IQPair(const GridSpec& grid)
      : i_channel({grid.height, grid.width}), q_channel({grid.height, grid.width}) {}

  bool same_shape(const IQPair& other) const {
    return i_channel.same_shape(other.i_channel) && q_channel.same_shape(other.q_channel);
  }
};

// Echo parameters relative to the line-of-sight signal.
struct MultipathParams {
  double amplitude_ratio = 0.5;  // (0, 1]
  double delay_offset_chips = 0.5;
  double doppler_offset_hz = 0.0;
  double phase_offset_rad = 0.0;  // wrapped to [0, 2*pi)

  void validate() const {
    if (!(amplitude_ratio > 0.0) || amplitude_ratio > 1.0)
      throw config_error("MultipathParams: amplitude_ratio must be in (0, 1]");
    if (!(delay_offset_chips >= 0.0))
      throw config_error("MultipathParams: delay_offset must be non-negative");
    if (!std::isfinite(doppler_offset_hz) || !std::isfinite(phase_offset_rad))
      throw config_error("MultipathParams: parameters must be finite");
  }
};

// Sampling ranges for echo parameters. These stand in for the external
// generator's densities and are configuration, not constants.
struct MultipathDistribution {
  double amplitude_lo = 0.2, amplitude_hi = 0.9;
  double delay_lo_chips = 0.0, delay_hi_chips = 1.0;
  double doppler_lo_hz = -125.0, doppler_hi_hz = 125.0;

  MultipathParams sample(Rng& rng) const {
    MultipathParams p;
    p.amplitude_ratio = rng.uniform(amplitude_lo, amplitude_hi);
    p.delay_offset_chips = rng.uniform(delay_lo_chips, delay_hi_chips);
    p.doppler_offset_hz = rng.uniform(doppler_lo_hz, doppler_hi_hz);
    p.phase_offset_rad = rng.uniform(0.0, 2.0 * std::numbers::pi);
    return p;
  }

  bool operator==(const MultipathDistribution&) const = default;
};

// GPS C/A code autocorrelation: unit triangle over one chip.
inline double triangle_autocorr(double delay_chips) {
  return std::max(0.0, 1.0 - std::abs(delay_chips));
}

// Coherent-integration Doppler attenuation, normalized sinc.
inline double doppler_attenuation(double doppler_hz) {
  const double u = doppler_hz * kCoherentIntegrationS;
  if (u == 0.0) return 1.0;
  const double x = std::numbers::pi * u;
  return std::sin(x) / x;
}

// Separable correlation kernel evaluated at a delay/doppler offset.
inline double correlation_kernel(double delay_chips, double doppler_hz) {
  return triangle_autocorr(delay_chips) * doppler_attenuation(doppler_hz);
}

// Renders one signal component (line-of-sight or echo) onto the grid:
//   I(r,c) = A * K(tau_c - delay, f_r - doppler) * cos(phase)
//   Q(r,c) = A * K(tau_c - delay, f_r - doppler) * sin(phase)
inline IQPair render_component(const GridSpec& grid, double amplitude, double delay_chips,
                               double doppler_hz, double phase_rad) {
  grid.validate();
  if (!std::isfinite(amplitude) || !std::isfinite(delay_chips) || !std::isfinite(doppler_hz) ||
      !std::isfinite(phase_rad))
    throw config_error("render_component: parameters must be finite");
  if (amplitude < 0.0) throw config_error("render_component: amplitude must be non-negative");

  IQPair out(grid);
  const double ci = amplitude * std::cos(phase_rad);
  const double cq = amplitude * std::sin(phase_rad);
  for (std::size_t r = 0; r < grid.height; ++r) {
    const double att = doppler_attenuation(grid.doppler_at(r) - doppler_hz);
    for (std::size_t c = 0; c < grid.width; ++c) {
      const double k = att * triangle_autocorr(grid.delay_at(c) - delay_chips);
      out.i_channel.at(r, c) = ci * k;
      out.q_channel.at(r, c) = cq * k;
    }
  }
  return out;
}

// Post-correlation noise level for a line-of-sight peak amplitude of 1:
//   sigma = 1 / sqrt(2 * 10^(C/N0 / 10) * T_coh)
// C/N0 = +inf is the documented noiseless limit (sigma = 0).
inline double noise_sigma(double cn0_dbhz) {
  if (std::isnan(cn0_dbhz)) throw config_error("noise_sigma: C/N0 must not be NaN");
  const double linear = std::pow(10.0, cn0_dbhz / 10.0);
  if (std::isinf(linear)) return 0.0;
  return 1.0 / std::sqrt(2.0 * linear * kCoherentIntegrationS);
}

// Adds i.i.d. zero-mean Gaussian noise to both channels. Draw order is part
// of the reproducibility contract: I channel row-major, then Q row-major.
inline IQPair add_noise(const IQPair& image, double cn0_dbhz, Rng& rng) {
  const double sigma = noise_sigma(cn0_dbhz);
  IQPair out = image;
  if (sigma == 0.0) return out;
  for (double& v : out.i_channel.values()) v += rng.normal(0.0, sigma);
  for (double& v : out.q_channel.values()) v += rng.normal(0.0, sigma);
  return out;
}

inline IQPair add_images(const IQPair& a, const IQPair& b) {
  if (!a.same_shape(b)) throw shape_error("add_images: shape mismatch");
  IQPair out = a;
  out.i_channel += b.i_channel;
  out.q_channel += b.q_channel;
  return out;
}

}  // namespace otssl
