#include "modviz/signal/modulation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "modviz/common/errors.hpp"

namespace modviz::signal {

namespace {

using std::numbers::pi;

unsigned gray_to_index(unsigned g) {
  unsigned k = 0;
  for (; g; g >>= 1) k ^= g;
  return k;
}

void normalize_energy(std::vector<Complex>& pts) {
  double e = 0.0;
  for (const auto& p : pts) e += std::norm(p);
  const double s = 1.0 / std::sqrt(e / static_cast<double>(pts.size()));
  for (auto& p : pts) p *= s;
}

/// Gray-coded PAM amplitude for a bits-wide pattern: levels -(M-1)..(M-1) step 2.
double pam_level(unsigned pattern, unsigned bits) {
  const unsigned m = 1u << bits;
  return 2.0 * gray_to_index(pattern) - (m - 1.0);
}

std::vector<Complex> psk(unsigned bits) {
  const unsigned m = 1u << bits;
  std::vector<Complex> pts(m);
  for (unsigned v = 0; v < m; ++v) pts[v] = std::polar(1.0, 2.0 * pi * gray_to_index(v) / m);
  if (bits == 1) pts = {Complex(1, 0), Complex(-1, 0)};
  return pts;
}

std::vector<Complex> square_qam(unsigned bits) {
  const unsigned half = bits / 2;
  std::vector<Complex> pts(1u << bits);
  for (unsigned v = 0; v < pts.size(); ++v)
    pts[v] = Complex(pam_level(v >> half, half), pam_level(v & ((1u << half) - 1), half));
  normalize_energy(pts);
  return pts;
}

std::vector<Complex> pam(unsigned bits) {
  std::vector<Complex> pts(1u << bits);
  for (unsigned v = 0; v < pts.size(); ++v) pts[v] = Complex(pam_level(v, bits), 0.0);
  normalize_energy(pts);
  return pts;
}

std::vector<ModulationScheme> build_registry() {
  using K = SchemeKind;
  std::vector<ModulationScheme> r;
  r.push_back({Scheme::PSK8, K::LinearDigital, "8PSK", 3, psk(3)});
  r.push_back({Scheme::AMDSB, K::Analog, "AM-DSB", 0, {}});
  r.push_back({Scheme::AMSSB, K::Analog, "AM-SSB", 0, {}});
  r.push_back({Scheme::BPSK, K::LinearDigital, "BPSK", 1, psk(1)});
  r.push_back({Scheme::CPFSK, K::ContinuousPhaseDigital, "CPFSK", 1, {}});
  r.push_back({Scheme::GFSK, K::ContinuousPhaseDigital, "GFSK", 1, {}});
  r.push_back({Scheme::PAM4, K::LinearDigital, "PAM4", 2, pam(2)});
  r.push_back({Scheme::QAM16, K::LinearDigital, "QAM16", 4, square_qam(4)});
  r.push_back({Scheme::QAM64, K::LinearDigital, "QAM64", 6, square_qam(6)});
  r.push_back({Scheme::QPSK, K::LinearDigital, "QPSK", 2, square_qam(2)});
  r.push_back({Scheme::WBFM, K::Analog, "WBFM", 0, {}});
  return r;
}

std::vector<double> gaussian_taps(double bt, std::size_t span_symbols, std::size_t sps) {
  const std::size_t n = span_symbols * sps + 1;
  const double sigma = std::sqrt(std::log(2.0)) / (2.0 * pi * bt);  // in symbol periods
  std::vector<double> h(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = (static_cast<double>(i) - static_cast<double>(n / 2)) / static_cast<double>(sps);
    total += (h[i] = std::exp(-t * t / (2.0 * sigma * sigma)));
  }
  for (auto& v : h) v /= total;
  return h;
}

std::vector<double> hilbert_taps(std::size_t half) {
  std::vector<double> h(2 * half + 1, 0.0);
  for (std::size_t i = 0; i < h.size(); ++i) {
    const long k = static_cast<long>(i) - static_cast<long>(half);
    if (k % 2 == 0) continue;
    const double window = 0.54 - 0.46 * std::cos(2.0 * pi * i / (h.size() - 1.0));
    h[i] = 2.0 / (pi * k) * window;
  }
  return h;
}

std::vector<Complex> continuous_phase(const ModulationScheme& s, std::span<const std::uint8_t> bits,
                                      std::size_t n_points, std::size_t sps) {
  const std::size_t nsym = bits.size();
  std::vector<double> freq(nsym * sps);
  for (std::size_t k = 0; k < nsym; ++k)
    std::fill_n(freq.begin() + k * sps, sps, bits[k] ? -1.0 : 1.0);
  if (s.id == Scheme::GFSK) {
    auto g = gaussian_taps(ShapingParams::kGaussianBT, ShapingParams::kGaussianSpanSymbols, sps);
    const long half = static_cast<long>(g.size() / 2);
    std::vector<double> smooth(freq.size(), 0.0);
    for (long n = 0; n < static_cast<long>(freq.size()); ++n)
      for (long j = 0; j < static_cast<long>(g.size()); ++j) {
        long src = n + j - half;
        src = std::clamp(src, 0L, static_cast<long>(freq.size()) - 1);
        smooth[n] += g[j] * freq[src];
      }
    freq = std::move(smooth);
  }
  const double step = pi * ShapingParams::kFskModIndex / static_cast<double>(sps);
  const std::size_t start = sps == 1 ? 0 : (ShapingParams::kRrcSpanSymbols / 2) * sps;
  std::vector<Complex> out(n_points);
  double phase = 0.0;
  for (std::size_t n = 0; n < start + n_points; ++n) {
    if (n >= start) out[n - start] = std::polar(1.0, phase);
    phase = std::remainder(phase + step * freq[n], 2.0 * pi);
  }
  return out;
}

std::vector<Complex> analog(const ModulationScheme& s, std::span<const double> message, std::size_t n_points) {
  const std::size_t guard = ShapingParams::kAnalogGuard;
  double peak = 0.0;
  for (double m : message) peak = std::max(peak, std::abs(m));
  if (peak == 0.0) peak = 1.0;
  std::vector<double> m(message.begin(), message.end());
  for (auto& v : m) v /= peak;

  std::vector<Complex> out(n_points);
  switch (s.id) {
    case Scheme::AMDSB:
      for (std::size_t i = 0; i < n_points; ++i) out[i] = Complex(1.0 + ShapingParams::kAmIndex * m[guard + i], 0.0);
      break;
    case Scheme::AMSSB: {
      auto h = hilbert_taps(guard - 1);
      const std::size_t half = h.size() / 2;
      for (std::size_t i = 0; i < n_points; ++i) {
        double q = 0.0;
        for (std::size_t j = 0; j < h.size(); ++j) q += h[j] * m[guard + i + half - j];
        out[i] = Complex(m[guard + i], q);
      }
      // A peak-normalized message leaves the sidebands with a fraction of
      // unit power; the other paths carry a unit-amplitude carrier.
      double power = 0.0;
      for (const auto& v : out) power += std::norm(v);
      power /= static_cast<double>(n_points);
      if (power > 0.0)
        for (auto& v : out) v /= std::sqrt(power);
      break;
    }
    case Scheme::WBFM: {
      double phase = 0.0;
      for (std::size_t n = 0; n < guard + n_points; ++n) {
        if (n >= guard) out[n - guard] = std::polar(1.0, phase);
        phase = std::remainder(phase + 2.0 * pi * ShapingParams::kFmDeviation * m[n], 2.0 * pi);
      }
      break;
    }
    default:
      throw InvalidArgument("not an analog scheme: " + s.name);
  }
  return out;
}

}  // namespace

const std::vector<ModulationScheme>& registry() {
  static const std::vector<ModulationScheme> r = build_registry();
  return r;
}

const ModulationScheme& scheme(Scheme id) { return registry().at(static_cast<std::size_t>(id)); }

const ModulationScheme& scheme_by_name(std::string_view name) {
  for (const auto& s : registry())
    if (s.name == name) return s;
  throw InvalidArgument("unknown modulation scheme '" + std::string(name) + "'");
}

std::vector<std::string> label_names() {
  std::vector<std::string> out;
  for (const auto& s : registry()) out.push_back(s.name);
  return out;
}

std::vector<double> rrc_taps(double rolloff, std::size_t span_symbols, std::size_t sps) {
  if (sps == 0 || span_symbols == 0 || rolloff <= 0.0 || rolloff > 1.0)
    throw InvalidArgument("rrc_taps: bad parameters");
  const std::size_t n = span_symbols * sps + 1;
  const double b = rolloff;
  std::vector<double> h(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = (static_cast<double>(i) - static_cast<double>(n / 2)) / static_cast<double>(sps);
    if (std::abs(t) < 1e-12) {
      h[i] = 1.0 + b * (4.0 / pi - 1.0);
    } else if (std::abs(std::abs(t) - 1.0 / (4.0 * b)) < 1e-12) {
      h[i] = b / std::sqrt(2.0) *
             ((1.0 + 2.0 / pi) * std::sin(pi / (4.0 * b)) + (1.0 - 2.0 / pi) * std::cos(pi / (4.0 * b)));
    } else {
      h[i] = (std::sin(pi * t * (1.0 - b)) + 4.0 * b * t * std::cos(pi * t * (1.0 + b))) /
             (pi * t * (1.0 - 16.0 * b * b * t * t));
    }
  }
  double e = 0.0;
  for (double v : h) e += v * v;
  for (auto& v : h) v /= std::sqrt(e);
  return h;
}

std::vector<Complex> map_symbols(const ModulationScheme& s, std::span<const std::uint8_t> bits) {
  if (s.kind != SchemeKind::LinearDigital) throw InvalidArgument("map_symbols: " + s.name + " has no constellation");
  const unsigned k = s.bits_per_symbol;
  std::vector<Complex> out(bits.size() / k);
  for (std::size_t n = 0; n < out.size(); ++n) {
    unsigned v = 0;
    for (unsigned j = 0; j < k; ++j) v = (v << 1) | (bits[n * k + j] & 1u);
    out[n] = s.constellation[v];
  }
  return out;
}

std::vector<Complex> pulse_shape(std::span<const Complex> symbols, std::size_t sps, std::span<const double> taps) {
  if (sps == 0 || taps.empty()) throw InvalidArgument("pulse_shape: bad parameters");
  std::vector<Complex> out(symbols.size() * sps + taps.size() - 1, Complex(0, 0));
  for (std::size_t k = 0; k < symbols.size(); ++k)
    for (std::size_t j = 0; j < taps.size(); ++j) out[k * sps + j] += symbols[k] * taps[j];
  return out;
}

std::size_t required_symbols(const ModulationScheme& s, std::size_t n_points, std::size_t sps) {
  if (!s.digital()) return 0;
  if (sps == 0 || n_points % sps != 0)
    throw InvalidArgument("n_points " + std::to_string(n_points) + " is not a multiple of sps " + std::to_string(sps));
  if (sps == 1) return n_points;
  return n_points / sps + ShapingParams::kRrcSpanSymbols;
}

std::size_t required_payload(const ModulationScheme& s, std::size_t n_points, std::size_t sps) {
  if (!s.digital()) return n_points + 2 * ShapingParams::kAnalogGuard;
  return required_symbols(s, n_points, sps) * s.bits_per_symbol;
}

std::vector<Complex> modulate(const ModulationScheme& s, const Payload& payload, std::size_t n_points,
                              std::size_t sps) {
  const std::size_t need = required_payload(s, n_points, sps);
  if (!s.digital()) {
    if (payload.message.size() < need)
      throw InvalidArgument("insufficient payload: " + s.name + " needs " + std::to_string(need) + " message samples");
    return analog(s, std::span(payload.message).first(need), n_points);
  }
  if (payload.bits.size() < need)
    throw InvalidArgument("insufficient payload: " + s.name + " needs " + std::to_string(need) + " bits");
  std::span<const std::uint8_t> bits(payload.bits.data(), need);
  if (s.kind == SchemeKind::ContinuousPhaseDigital) return continuous_phase(s, bits, n_points, sps);

  auto symbols = map_symbols(s, bits);
  if (sps == 1) return symbols;
  auto taps = rrc_taps(ShapingParams::kRrcRolloff, ShapingParams::kRrcSpanSymbols, sps);
  auto shaped = pulse_shape(symbols, sps, taps);
  // Skip the leading guard symbols and the filter delay; the first window
  // sample sits on a symbol peak. sqrt(sps) restores unit per-sample power.
  const std::size_t start = (ShapingParams::kRrcSpanSymbols / 2) * sps + taps.size() / 2;
  const double gain = std::sqrt(static_cast<double>(sps));
  std::vector<Complex> out(n_points);
  for (std::size_t i = 0; i < n_points; ++i) out[i] = shaped[start + i] * gain;
  return out;
}

std::vector<double> band_limited_message(std::size_t n, Rng& rng) {
  const double a = std::exp(-2.0 * pi * ShapingParams::kMessageCutoff);
  std::normal_distribution<double> gauss(0.0, 1.0);
  constexpr std::size_t warmup = 64;
  std::vector<double> out(n);
  double y = 0.0;
  for (std::size_t i = 0; i < n + warmup; ++i) {
    y = a * y + (1.0 - a) * gauss(rng);
    if (i >= warmup) out[i - warmup] = y;
  }
  return out;
}

Payload random_payload(const ModulationScheme& s, std::size_t n_points, std::size_t sps, Rng& rng) {
  Payload p;
  const std::size_t need = required_payload(s, n_points, sps);
  if (s.digital()) {
    std::uniform_int_distribution<int> bit(0, 1);
    p.bits.resize(need);
    for (auto& b : p.bits) b = static_cast<std::uint8_t>(bit(rng));
  } else {
    p.message = band_limited_message(need, rng);
  }
  return p;
}

AmpPhase to_amplitude_phase(Complex iq) {
  const double a = std::hypot(iq.real(), iq.imag());
  if (a == 0.0) return {0.0, 0.0};
  double phi = std::atan2(iq.imag(), iq.real());
  if (phi <= -pi) phi = pi;
  return {a, phi};
}

std::vector<AmpPhase> to_amplitude_phase(std::span<const Complex> iq) {
  std::vector<AmpPhase> out;
  out.reserve(iq.size());
  for (const auto& x : iq) out.push_back(to_amplitude_phase(x));
  return out;
}

}  // namespace modviz::signal
