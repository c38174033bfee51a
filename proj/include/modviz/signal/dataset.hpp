#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "modviz/common/kv_text.hpp"
#include "modviz/signal/modulation.hpp"

namespace modviz::signal {

enum class Split : std::uint8_t { Train = 0, Val = 1, Test = 2 };

const char* split_name(Split s);
Split parse_split(std::string_view name);

struct RadioSample {
  std::vector<std::complex<float>> iq;
  int label = 0;
  int snr_db = 0;
  Split split = Split::Train;
  std::uint64_t seed_tag = 0;  // not persisted by the binary container
};

struct Dataset {
  std::vector<RadioSample> samples;
  std::vector<std::string> label_names = signal::label_names();
  std::size_t samples_per_symbol = 8;
  /// Provenance: generation seed and config echo, carried by the sidecar.
  KeyValues meta;

  std::size_t n_x() const { return samples.empty() ? 0 : samples.front().iq.size(); }
  std::size_t count(Split s) const;
  std::vector<std::size_t> indices(Split s) const;
};

struct GenerationConfig {
  std::vector<Scheme> schemes;  // empty means all 11
  int snr_min = 0;
  int snr_max = 18;
  int snr_step = 2;
  int count_per_cell = 1000;
  std::size_t n_x = 128;
  std::size_t sps = 8;
  double train_ratio = 0.8;
  double val_ratio = 0.1;
  double cfo_max = 0.001;

  std::vector<int> snr_grid() const;
  KeyValues to_kv() const;
  /// Reads `generate.*` keys; unknown values fall back to the defaults above.
  static GenerationConfig from_kv(const KeyValues& kv);
};

/// Samples ordered by (label, snr, index). Each sample draws from its own
/// substream keyed by (seed, label, snr, index); splits are stratified per
/// (label, snr) cell from a cell substream of the same seed.
Dataset generate_dataset(const GenerationConfig& cfg, std::uint64_t seed);

/// Cuts every sample into `factor` consecutive pieces; piece j of input k
/// becomes sample factor*k + j and inherits label, SNR and split.
Dataset split_samples(const Dataset& ds, std::size_t factor);

}  // namespace modviz::signal
