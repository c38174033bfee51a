#include "modviz/signal/channel.hpp"

#include <cmath>
#include <numbers>

#include "modviz/common/errors.hpp"

namespace modviz::signal {

double mean_power(std::span<const Complex> x) {
  if (x.empty()) return 0.0;
  double p = 0.0;
  for (const auto& v : x) p += std::norm(v);
  return p / static_cast<double>(x.size());
}

std::vector<Complex> apply_channel(std::span<const Complex> clean, const ChannelConfig& cfg, Rng& rng) {
  if (clean.empty()) throw InvalidArgument("apply_channel: empty input");
  if (std::abs(cfg.cfo_norm) > kMaxCfo) throw InvalidArgument("apply_channel: |cfo_norm| exceeds 0.01");
  const double power = mean_power(clean);
  if (!(power > 0.0)) throw InvalidArgument("apply_channel: zero-power input");

  const double sigma = std::sqrt(power / std::pow(10.0, cfg.snr_db / 10.0) / 2.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Complex> out(clean.size());
  for (std::size_t i = 0; i < clean.size(); ++i) {
    const double theta = 2.0 * std::numbers::pi * cfg.cfo_norm * static_cast<double>(i) + cfg.phase0;
    out[i] = clean[i] * std::polar(1.0, theta);
    if (cfg.add_noise) {
      const double re = gauss(rng);
      const double im = gauss(rng);
      out[i] += Complex(sigma * re, sigma * im);
    }
  }
  return out;
}

}  // namespace modviz::signal
