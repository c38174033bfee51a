#pragma once

#include <span>
#include <vector>

#include "modviz/signal/modulation.hpp"

namespace modviz::signal {

struct ChannelConfig {
  int snr_db = 10;
  double cfo_norm = 0.0;  // cycles/sample, |cfo| <= 0.01
  double phase0 = 0.0;    // radians
  bool add_noise = true;
};

inline constexpr double kMaxCfo = 0.01;

/// clean[i] * exp(j(2*pi*cfo*i + phase0)) + n[i], with n circular complex
/// Gaussian of total variance P / 10^(snr/10) for measured input power P.
std::vector<Complex> apply_channel(std::span<const Complex> clean, const ChannelConfig& cfg, Rng& rng);

double mean_power(std::span<const Complex> x);

}  // namespace modviz::signal
