#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "modviz/common/rng.hpp"

namespace modviz::signal {

using Complex = std::complex<double>;

/// Enumerators are in label order (alphabetical canonical names).
enum class Scheme : int { PSK8, AMDSB, AMSSB, BPSK, CPFSK, GFSK, PAM4, QAM16, QAM64, QPSK, WBFM };

enum class SchemeKind { LinearDigital, ContinuousPhaseDigital, Analog };

inline constexpr std::size_t kNumSchemes = 11;

struct ModulationScheme {
  Scheme id;
  SchemeKind kind;
  std::string name;
  unsigned bits_per_symbol = 0;  // digital only
  /// Linear-digital only: point for each Gray-coded bit pattern (MSB first),
  /// scaled to unit average energy.
  std::vector<Complex> constellation;

  int label() const { return static_cast<int>(id); }
  bool digital() const { return kind != SchemeKind::Analog; }
};

/// All 11 schemes, index == label.
const std::vector<ModulationScheme>& registry();
const ModulationScheme& scheme(Scheme id);
const ModulationScheme& scheme_by_name(std::string_view name);
std::vector<std::string> label_names();

/// Pulse-shaping and analog-path constants.
struct ShapingParams {
  static constexpr double kRrcRolloff = 0.35;
  static constexpr std::size_t kRrcSpanSymbols = 8;
  static constexpr double kGaussianBT = 0.35;
  static constexpr std::size_t kGaussianSpanSymbols = 4;
  static constexpr double kFskModIndex = 0.5;
  static constexpr double kMessageCutoff = 0.05;  // cycles/sample
  static constexpr std::size_t kAnalogGuard = 32;  // samples either side of the window
  static constexpr double kFmDeviation = 0.1;      // cycles/sample at full-scale message
  static constexpr double kAmIndex = 0.5;
};

/// Either bits (digital) or a real message signal (analog).
struct Payload {
  std::vector<std::uint8_t> bits;
  std::vector<double> message;
};

/// Root-raised-cosine taps, span*sps+1 long, normalized to unit energy.
std::vector<double> rrc_taps(double rolloff, std::size_t span_symbols, std::size_t sps);

/// Gray-coded symbol mapping; consumes bits_per_symbol bits per symbol, MSB first.
std::vector<Complex> map_symbols(const ModulationScheme& s, std::span<const std::uint8_t> bits);

/// Zero-insertion upsampling by sps followed by full FIR convolution with taps.
std::vector<Complex> pulse_shape(std::span<const Complex> symbols, std::size_t sps, std::span<const double> taps);

/// Symbols the digital paths consume for an n_points window: the window's
/// symbols plus span/2 guard symbols on each side (none when sps == 1).
std::size_t required_symbols(const ModulationScheme& s, std::size_t n_points, std::size_t sps);

/// Payload length to supply: bits for digital schemes, message samples for analog.
std::size_t required_payload(const ModulationScheme& s, std::size_t n_points, std::size_t sps);

/// Baseband waveform of exactly n_points samples. Linear-digital: symbols,
/// upsample, RRC (sps == 1 bypasses shaping). GFSK/CPFSK: phase accumulation.
/// Analog: FM / SSB / DSB of the message.
std::vector<Complex> modulate(const ModulationScheme& s, const Payload& payload, std::size_t n_points, std::size_t sps);

/// Band-limited Gaussian message: white noise through a one-pole low-pass.
std::vector<double> band_limited_message(std::size_t n, Rng& rng);

/// Random payload of the length modulate() needs.
Payload random_payload(const ModulationScheme& s, std::size_t n_points, std::size_t sps, Rng& rng);

struct AmpPhase {
  double amplitude;
  double phase;  // (-pi, pi]
};

/// A = |x|, phi = four-quadrant angle; (0, 0) maps to (0, 0).
AmpPhase to_amplitude_phase(Complex iq);
std::vector<AmpPhase> to_amplitude_phase(std::span<const Complex> iq);

}  // namespace modviz::signal
