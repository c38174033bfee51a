#include "modviz/signal/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "modviz/common/errors.hpp"
#include "modviz/common/parallel.hpp"
#include "modviz/common/rng.hpp"
#include "modviz/signal/channel.hpp"

namespace modviz::signal {

const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::Train;
  if (name == "val") return Split::Val;
  if (name == "test") return Split::Test;
  throw InvalidArgument("unknown split '" + std::string(name) + "'");
}

std::size_t Dataset::count(Split s) const {
  return static_cast<std::size_t>(
      std::count_if(samples.begin(), samples.end(), [s](const RadioSample& r) { return r.split == s; }));
}

std::vector<std::size_t> Dataset::indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (samples[i].split == s) out.push_back(i);
  return out;
}

std::vector<int> GenerationConfig::snr_grid() const {
  if (snr_step <= 0 || snr_min > snr_max) throw InvalidArgument("invalid SNR grid");
  std::vector<int> g;
  for (int s = snr_min; s <= snr_max; s += snr_step) g.push_back(s);
  return g;
}

KeyValues GenerationConfig::to_kv() const {
  KeyValues kv;
  std::string names;
  for (Scheme s : schemes) names += (names.empty() ? "" : ",") + scheme(s).name;
  kv.set("generate.schemes", names.empty() ? std::string("all") : names);
  kv.set("generate.snr_min", snr_min);
  kv.set("generate.snr_max", snr_max);
  kv.set("generate.snr_step", snr_step);
  kv.set("generate.count", count_per_cell);
  kv.set("generate.n_x", n_x);
  kv.set("generate.sps", sps);
  kv.set("generate.train_ratio", train_ratio);
  kv.set("generate.val_ratio", val_ratio);
  kv.set("generate.cfo_max", cfo_max);
  return kv;
}

GenerationConfig GenerationConfig::from_kv(const KeyValues& kv) {
  GenerationConfig c;
  auto names = kv.get_or("generate.schemes", "all");
  if (names != "all")
    for (const auto& n : split_list(names)) c.schemes.push_back(scheme_by_name(n).id);
  c.snr_min = static_cast<int>(kv.get_int("generate.snr_min", c.snr_min));
  c.snr_max = static_cast<int>(kv.get_int("generate.snr_max", c.snr_max));
  c.snr_step = static_cast<int>(kv.get_int("generate.snr_step", c.snr_step));
  c.count_per_cell = static_cast<int>(kv.get_int("generate.count", c.count_per_cell));
  c.n_x = static_cast<std::size_t>(kv.get_int("generate.n_x", static_cast<std::int64_t>(c.n_x)));
  c.sps = static_cast<std::size_t>(kv.get_int("generate.sps", static_cast<std::int64_t>(c.sps)));
  c.train_ratio = kv.get_double("generate.train_ratio", c.train_ratio);
  c.val_ratio = kv.get_double("generate.val_ratio", c.val_ratio);
  c.cfo_max = kv.get_double("generate.cfo_max", c.cfo_max);
  return c;
}

namespace {

RadioSample synthesize(const ModulationScheme& s, int snr, int index, const GenerationConfig& cfg,
                       std::uint64_t seed) {
  const std::initializer_list<std::uint64_t> key = {static_cast<std::uint64_t>(s.label()),
                                                    static_cast<std::uint64_t>(static_cast<std::int64_t>(snr)),
                                                    static_cast<std::uint64_t>(index)};
  Rng rng(substream_seed(seed, "sample", key));
  auto payload = random_payload(s, cfg.n_x, cfg.sps, rng);
  auto clean = modulate(s, payload, cfg.n_x, cfg.sps);
  const double gain = 1.0 / std::sqrt(mean_power(clean));
  for (auto& v : clean) v *= gain;

  std::uniform_real_distribution<double> u(0.0, 1.0);
  ChannelConfig ch;
  ch.snr_db = snr;
  ch.cfo_norm = cfg.cfo_max * (2.0 * u(rng) - 1.0);
  ch.phase0 = std::numbers::pi - 2.0 * std::numbers::pi * u(rng);
  auto noisy = apply_channel(clean, ch, rng);

  RadioSample r;
  r.label = s.label();
  r.snr_db = snr;
  r.seed_tag = substream_seed(seed, "sample", key);
  r.iq.reserve(noisy.size());
  for (const auto& v : noisy) r.iq.emplace_back(static_cast<float>(v.real()), static_cast<float>(v.imag()));
  return r;
}

}  // namespace

Dataset generate_dataset(const GenerationConfig& cfg, std::uint64_t seed) {
  if (cfg.count_per_cell <= 0) throw InvalidArgument("count per (label, snr) cell must be positive");
  if (cfg.n_x == 0) throw InvalidArgument("n_x must be positive");
  if (cfg.train_ratio < 0 || cfg.val_ratio < 0 || cfg.train_ratio + cfg.val_ratio > 1.0)
    throw InvalidArgument("split ratios must be non-negative and sum to at most 1");
  const auto grid = cfg.snr_grid();
  std::vector<Scheme> schemes = cfg.schemes;
  if (schemes.empty())
    for (const auto& s : registry()) schemes.push_back(s.id);
  std::sort(schemes.begin(), schemes.end());
  schemes.erase(std::unique(schemes.begin(), schemes.end()), schemes.end());
  for (Scheme s : schemes) required_payload(scheme(s), cfg.n_x, cfg.sps);  // validates n_x vs sps

  const std::size_t per_cell = static_cast<std::size_t>(cfg.count_per_cell);
  const std::size_t cells = schemes.size() * grid.size();
  Dataset ds;
  ds.samples_per_symbol = cfg.sps;
  ds.samples.resize(cells * per_cell);
  parallel_for(ds.samples.size(), [&](std::size_t i) {
    const std::size_t cell = i / per_cell;
    const auto& s = scheme(schemes[cell / grid.size()]);
    ds.samples[i] = synthesize(s, grid[cell % grid.size()], static_cast<int>(i % per_cell), cfg, seed);
  });

  const auto n_train = static_cast<std::size_t>(std::llround(cfg.train_ratio * static_cast<double>(per_cell)));
  const auto n_val = std::min(per_cell - n_train,
                              static_cast<std::size_t>(std::llround(cfg.val_ratio * static_cast<double>(per_cell))));
  std::vector<std::size_t> order(per_cell);
  for (std::size_t cell = 0; cell < cells; ++cell) {
    const auto& s = scheme(schemes[cell / grid.size()]);
    const int snr = grid[cell % grid.size()];
    for (std::size_t j = 0; j < per_cell; ++j) order[j] = j;
    Rng rng = substream(seed, "split", {static_cast<std::uint64_t>(s.label()),
                                        static_cast<std::uint64_t>(static_cast<std::int64_t>(snr))});
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t j = 0; j < per_cell; ++j) {
      Split tag = j < n_train ? Split::Train : (j < n_train + n_val ? Split::Val : Split::Test);
      ds.samples[cell * per_cell + order[j]].split = tag;
    }
  }

  ds.meta = cfg.to_kv();
  ds.meta.set_uint("generate.seed", seed);
  return ds;
}

Dataset split_samples(const Dataset& ds, std::size_t factor) {
  if (factor == 0) throw InvalidArgument("split factor must be positive");
  const std::size_t n = ds.n_x();
  if (n == 0 || n % factor != 0)
    throw InvalidArgument("sample length " + std::to_string(n) + " is not divisible by " + std::to_string(factor));
  const std::size_t piece = n / factor;
  Dataset out;
  out.label_names = ds.label_names;
  out.samples_per_symbol = ds.samples_per_symbol;
  out.meta = ds.meta;
  out.meta.set("split.factor", factor);
  out.meta.set("split.source_n_x", n);
  out.samples.reserve(ds.samples.size() * factor);
  for (const auto& s : ds.samples) {
    if (s.iq.size() != n) throw InvalidArgument("dataset has samples of differing length");
    for (std::size_t j = 0; j < factor; ++j) {
      RadioSample r = s;
      r.iq.assign(s.iq.begin() + static_cast<std::ptrdiff_t>(j * piece),
                  s.iq.begin() + static_cast<std::ptrdiff_t>((j + 1) * piece));
      out.samples.push_back(std::move(r));
    }
  }
  return out;
}

}  // namespace modviz::signal
