#include <doctest.h>

#include <array>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <complex>
#include <map>
#include <numbers>
#include <random>
#include <set>

#include "modviz/common/errors.hpp"
#include "modviz/signal/channel.hpp"
#include "modviz/signal/dataset.hpp"
#include "modviz/signal/dataset_io.hpp"
#include "modviz/signal/modulation.hpp"
#include "support.hpp"

using namespace modviz;
using namespace modviz::signal;
using std::numbers::pi;

namespace {

// Root-raised-cosine impulse response obtained by integrating the square
// root of the raised-cosine spectrum numerically (Simpson), symbol period 1.
double rrc_by_spectrum(double t, double beta) {
  auto amplitude = [beta](double f) {
    const double f1 = (1.0 - beta) / 2.0, f2 = (1.0 + beta) / 2.0;
    if (f <= f1) return 1.0;
    if (f >= f2) return 0.0;
    return std::cos(pi / (2.0 * beta) * (f - f1));
  };
  auto simpson = [&](double a, double b, int n) {
    const double h = (b - a) / n;
    double s = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double f = a + i * h;
      const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
      s += w * amplitude(f) * std::cos(2.0 * pi * f * t);
    }
    return s * h / 3.0;
  };
  return 2.0 * (simpson(0.0, (1.0 - beta) / 2.0, 4000) + simpson((1.0 - beta) / 2.0, (1.0 + beta) / 2.0, 4000));
}

std::vector<double> reference_rrc(double beta, std::size_t span, std::size_t sps) {
  const std::size_t n = span * sps + 1;
  std::vector<double> h(n);
  double e = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = (static_cast<double>(i) - static_cast<double>(n / 2)) / static_cast<double>(sps);
    h[i] = rrc_by_spectrum(t, beta);
    e += h[i] * h[i];
  }
  for (auto& v : h) v /= std::sqrt(e);
  return h;
}

std::vector<Complex> direct_fir(const std::vector<Complex>& symbols, std::size_t sps, const std::vector<double>& taps) {
  std::vector<Complex> train(symbols.size() * sps, Complex(0, 0));
  for (std::size_t k = 0; k < symbols.size(); ++k) train[k * sps] = symbols[k];
  std::vector<Complex> out(train.size() + taps.size() - 1, Complex(0, 0));
  for (std::size_t n = 0; n < out.size(); ++n)
    for (std::size_t j = 0; j < taps.size(); ++j)
      if (n >= j && n - j < train.size()) out[n] += taps[j] * train[n - j];
  return out;
}

GenerationConfig small_config() {
  GenerationConfig c;
  c.schemes = {Scheme::BPSK, Scheme::QPSK, Scheme::GFSK, Scheme::WBFM};
  c.snr_min = 10;
  c.snr_max = 14;
  c.snr_step = 2;
  c.count_per_cell = 10;
  return c;
}

}  // namespace

TEST_CASE("registry holds 11 schemes in alphabetical label order") {
  const auto names = label_names();
  REQUIRE(names.size() == 11);
  CHECK(names == std::vector<std::string>{"8PSK", "AM-DSB", "AM-SSB", "BPSK", "CPFSK", "GFSK", "PAM4", "QAM16",
                                          "QAM64", "QPSK", "WBFM"});
  for (std::size_t i = 0; i < registry().size(); ++i) CHECK(registry()[i].label() == static_cast<int>(i));
  CHECK_THROWS_AS(scheme_by_name("OOK"), InvalidArgument);
}

TEST_CASE("linear constellations have unit average energy") {
  for (const auto& s : registry()) {
    if (s.kind != SchemeKind::LinearDigital) continue;
    CAPTURE(s.name);
    REQUIRE(s.constellation.size() == (1u << s.bits_per_symbol));
    double e = 0.0;
    for (const auto& p : s.constellation) e += std::norm(p);
    CHECK(std::abs(e / s.constellation.size() - 1.0) < 1e-9);
  }
}

TEST_CASE("PAM4 levels are -3,-1,1,3 over sqrt 5") {
  std::multiset<double> levels;
  for (const auto& p : scheme(Scheme::PAM4).constellation) {
    CHECK(p.imag() == 0.0);
    levels.insert(std::round(p.real() * std::sqrt(5.0) * 1e9) / 1e9);
  }
  CHECK(levels == std::multiset<double>{-3.0, -1.0, 1.0, 3.0});
}

TEST_CASE("Gray mapping: neighbouring PSK8 points differ in one bit") {
  const auto& s = scheme(Scheme::PSK8);
  for (unsigned a = 0; a < 8; ++a)
    for (unsigned b = 0; b < 8; ++b) {
      if (a == b) continue;
      const double gap = std::abs(s.constellation[a] - s.constellation[b]);
      if (gap < 2.0 * std::sin(pi / 8.0) + 1e-9) CHECK(std::popcount(a ^ b) == 1);
    }
}

TEST_CASE("BPSK with shaping bypassed maps bits to antipodal symbols") {
  Payload p;
  p.bits = {0, 1};
  const auto out = modulate(scheme(Scheme::BPSK), p, 2, 1);
  REQUIRE(out.size() == 2);
  CHECK(out[0] == Complex(1, 0));
  CHECK(out[1] == Complex(-1, 0));
}

TEST_CASE("RRC taps match the spectrum-integrated reference") {
  for (std::size_t sps : {2u, 4u, 8u}) {
    const auto got = rrc_taps(0.35, 8, sps);
    const auto want = reference_rrc(0.35, 8, sps);
    REQUIRE(got.size() == want.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i) worst = std::max(worst, std::abs(got[i] - want[i]));
    CAPTURE(sps);
    CHECK(worst < 1e-6);
  }
  // t = 1/(4 beta) lands on a tap for beta = 0.25, sps = 8.
  const auto got = rrc_taps(0.25, 6, 8);
  const auto want = reference_rrc(0.25, 6, 8);
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-6));
}

TEST_CASE("QPSK 16 symbols at sps 8: 128 samples, shaped energy equals symbol energy") {
  const auto& s = scheme(Scheme::QPSK);
  std::mt19937_64 rng(11);
  Payload p;
  p.bits.resize(required_payload(s, 128, 8));
  for (auto& b : p.bits) b = static_cast<std::uint8_t>(rng() & 1u);
  CHECK(modulate(s, p, 128, 8).size() == 128);

  const auto symbols = map_symbols(s, std::span(p.bits).first(32));
  REQUIRE(symbols.size() == 16);
  const auto taps = reference_rrc(0.35, 8, 8);
  const auto ref = direct_fir(symbols, 8, taps);
  const auto got = pulse_shape(symbols, 8, rrc_taps(0.35, 8, 8));
  REQUIRE(got.size() == ref.size());
  double e_ref = 0.0, e_sym = 0.0, worst = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    worst = std::max(worst, std::abs(got[i] - ref[i]));
    e_ref += std::norm(ref[i]);
  }
  for (const auto& x : symbols) e_sym += std::norm(x);
  CHECK(worst < 1e-6);
  CHECK(std::abs(e_ref / e_sym - 1.0) < 0.01);
}

TEST_CASE("modulate: output length, power window, payload errors") {
  std::mt19937_64 rng(5);
  for (const auto& s : registry()) {
    CAPTURE(s.name);
    Rng r(rng());
    for (int trial = 0; trial < 20; ++trial) {
      const auto x = modulate(s, random_payload(s, 128, 8, r), 128, 8);
      REQUIRE(x.size() == 128);
      const double pw = mean_power(x);
      CHECK(pw >= 0.5);
      CHECK(pw <= 2.0);
    }
    const auto p = random_payload(s, 128, 8, r);
    if (s.digital()) {
      Payload shorter = p;
      shorter.bits.pop_back();
      CHECK_THROWS_AS(modulate(s, shorter, 128, 8), InvalidArgument);
      CHECK_THROWS_AS(modulate(s, p, 127, 8), InvalidArgument);
    } else {
      Payload shorter = p;
      shorter.message.pop_back();
      CHECK_THROWS_AS(modulate(s, shorter, 128, 8), InvalidArgument);
    }
  }
}

TEST_CASE("channel: half-turn rotation without noise negates the signal") {
  std::vector<Complex> clean = {{1, 2}, {-0.5, 0.25}, {0, -1}};
  ChannelConfig c;
  c.phase0 = pi;
  c.add_noise = false;
  Rng rng(1);
  const auto out = apply_channel(clean, c, rng);
  for (std::size_t i = 0; i < clean.size(); ++i) CHECK(std::abs(out[i] + clean[i]) < 1e-12);
}

TEST_CASE("channel: noise variance follows the SNR definition") {
  for (int snr : {0, 10, 18}) {
    std::vector<Complex> clean(100000);
    for (std::size_t i = 0; i < clean.size(); ++i) clean[i] = std::polar(1.0, 0.37 * static_cast<double>(i));
    ChannelConfig c;
    c.snr_db = snr;
    Rng rng(100 + snr);
    const auto out = apply_channel(clean, c, rng);
    double noise = 0.0, re = 0.0;
    for (std::size_t i = 0; i < clean.size(); ++i) {
      noise += std::norm(out[i] - clean[i]);
      re += std::pow((out[i] - clean[i]).real(), 2);
    }
    noise /= static_cast<double>(clean.size());
    re /= static_cast<double>(clean.size());
    const double measured = 10.0 * std::log10(1.0 / noise);
    CAPTURE(snr);
    CHECK(std::abs(measured - snr) < 0.2);
    CHECK(re == doctest::Approx(0.5 * std::pow(10.0, -snr / 10.0)).epsilon(0.03));
  }
}

TEST_CASE("channel errors") {
  Rng rng(1);
  std::vector<Complex> zeros(4, Complex(0, 0));
  CHECK_THROWS_AS(apply_channel(zeros, {}, rng), InvalidArgument);
  CHECK_THROWS_AS(apply_channel({}, {}, rng), InvalidArgument);
  ChannelConfig c;
  c.cfo_norm = 0.02;
  std::vector<Complex> one = {Complex(1, 0)};
  CHECK_THROWS_AS(apply_channel(one, c, rng), InvalidArgument);
}

TEST_CASE("amplitude/phase examples and round trip") {
  auto a = to_amplitude_phase(Complex(1, 0));
  CHECK(a.amplitude == 1.0);
  CHECK(a.phase == 0.0);
  a = to_amplitude_phase(Complex(0, 1));
  CHECK(a.amplitude == doctest::Approx(1.0));
  CHECK(a.phase == doctest::Approx(pi / 2));
  a = to_amplitude_phase(Complex(3, 4));
  CHECK(std::abs(a.amplitude - 5.0) < 1e-12);
  CHECK(std::abs(a.phase - 0.92730) < 1e-5);
  a = to_amplitude_phase(Complex(0, 0));
  CHECK(a.amplitude == 0.0);
  CHECK(a.phase == 0.0);
  CHECK(to_amplitude_phase(Complex(-1, -0.0)).phase == doctest::Approx(pi));

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-100, 100);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Complex x(u(rng), u(rng));
    const auto r = to_amplitude_phase(x);
    CHECK(r.amplitude >= 0.0);
    CHECK(r.phase > -pi);
    CHECK(r.phase <= pi);
    worst = std::max(worst, std::abs(std::polar(r.amplitude, r.phase) - x));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("dataset: counts, stratified splits, determinism") {
  const auto cfg = small_config();
  const auto ds = generate_dataset(cfg, 42);
  REQUIRE(ds.samples.size() == 4u * 3u * 10u);
  CHECK(ds.count(Split::Train) == 96);
  CHECK(ds.count(Split::Val) == 12);
  CHECK(ds.count(Split::Test) == 12);
  std::map<std::pair<int, int>, std::array<int, 3>> cells;
  for (const auto& s : ds.samples) {
    CHECK(s.iq.size() == 128);
    for (auto v : s.iq) CHECK(std::isfinite(v.real()));
    cells[{s.label, s.snr_db}][static_cast<int>(s.split)]++;
  }
  CHECK(cells.size() == 12);
  for (const auto& [cell, n] : cells) CHECK(n == std::array<int, 3>{8, 1, 1});

  CHECK(encode_dataset(generate_dataset(cfg, 42)) == encode_dataset(ds));
  CHECK(encode_dataset(generate_dataset(cfg, 43)) != encode_dataset(ds));
}

TEST_CASE("dataset: full 11-class grid arithmetic") {
  GenerationConfig c;
  CHECK(c.snr_grid().size() == 10);
  const std::size_t cells = kNumSchemes * c.snr_grid().size();
  CHECK(cells * static_cast<std::size_t>(c.count_per_cell) == 110000);
  CHECK(static_cast<std::size_t>(std::llround(c.train_ratio * c.count_per_cell)) * cells == 88000);
  CHECK(static_cast<std::size_t>(std::llround(c.val_ratio * c.count_per_cell)) * cells == 11000);
}

TEST_CASE("dataset: generation errors") {
  auto c = small_config();
  c.count_per_cell = 0;
  CHECK_THROWS_AS(generate_dataset(c, 1), InvalidArgument);
  c = small_config();
  c.snr_step = 0;
  CHECK_THROWS_AS(generate_dataset(c, 1), InvalidArgument);
  c = small_config();
  c.snr_min = 20;
  CHECK_THROWS_AS(generate_dataset(c, 1), InvalidArgument);
}

TEST_CASE("dataset: generation is independent of the worker count") {
  const auto cfg = small_config();
  setenv("MODVIZ_THREADS", "1", 1);
  const auto one = encode_dataset(generate_dataset(cfg, 9));
  setenv("MODVIZ_THREADS", "4", 1);
  const auto four = encode_dataset(generate_dataset(cfg, 9));
  unsetenv("MODVIZ_THREADS");
  CHECK(one == four);
}

TEST_CASE("dataset file round trip is bit-identical") {
  testing::TempDir dir("signal");
  const auto ds = generate_dataset(small_config(), 3);
  write_dataset(ds, dir.file("d.rmlb"));
  const auto back = read_dataset(dir.file("d.rmlb"));
  REQUIRE(back.samples.size() == ds.samples.size());
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    CHECK(back.samples[i].label == ds.samples[i].label);
    CHECK(back.samples[i].snr_db == ds.samples[i].snr_db);
    CHECK(back.samples[i].split == ds.samples[i].split);
    CHECK(std::memcmp(back.samples[i].iq.data(), ds.samples[i].iq.data(), 128 * sizeof(std::complex<float>)) == 0);
  }
  CHECK(back.label_names == ds.label_names);
  CHECK(back.meta.get("generate.seed") == std::optional<std::string>("3"));
}

TEST_CASE("dataset container errors are distinct") {
  const auto ds = generate_dataset(small_config(), 3);
  const auto good = encode_dataset(ds);
  auto kind_of = [](std::vector<char> bytes) {
    try {
      decode_dataset(std::move(bytes));
    } catch (const FormatError& e) {
      return static_cast<int>(e.kind());
    }
    return -1;
  };
  auto bad = good;
  bad[0] = 'X';
  CHECK(kind_of(bad) == static_cast<int>(FormatError::Kind::BadMagic));
  bad = good;
  bad[4] = 2;
  CHECK(kind_of(bad) == static_cast<int>(FormatError::Kind::VersionMismatch));
  bad = good;
  bad.resize(bad.size() - 3);
  CHECK(kind_of(bad) == static_cast<int>(FormatError::Kind::TruncatedPayload));
  bad = good;
  bad[8] = static_cast<char>(bad[8] + 1);  // header count one larger than the payload
  CHECK(kind_of(bad) == static_cast<int>(FormatError::Kind::TruncatedPayload));
  bad = good;
  bad[20 + 4] = 7;  // split tag of the first sample
  CHECK(kind_of(bad) == static_cast<int>(FormatError::Kind::Malformed));
  CHECK_THROWS_AS(read_dataset("/nonexistent/dir/none.rmlb"), IoError);
}

TEST_CASE("split_samples halves and concatenation identity") {
  const auto ds = generate_dataset(small_config(), 8);
  const auto halves = split_samples(ds, 2);
  REQUIRE(halves.samples.size() == 2 * ds.samples.size());
  for (std::size_t k = 0; k < ds.samples.size(); ++k) {
    const auto& a = halves.samples[2 * k];
    const auto& b = halves.samples[2 * k + 1];
    CHECK(a.iq.size() == 64);
    CHECK(a.label == ds.samples[k].label);
    CHECK(b.snr_db == ds.samples[k].snr_db);
    CHECK(b.split == ds.samples[k].split);
    std::vector<std::complex<float>> joined(a.iq);
    joined.insert(joined.end(), b.iq.begin(), b.iq.end());
    CHECK(joined == ds.samples[k].iq);
  }
  Dataset odd;
  odd.samples.resize(1);
  odd.samples[0].iq.resize(7);
  CHECK_THROWS_AS(split_samples(odd, 2), InvalidArgument);
}
