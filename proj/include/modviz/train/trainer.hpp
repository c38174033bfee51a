#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "modviz/common/kv_text.hpp"
#include "modviz/models/models.hpp"
#include "modviz/signal/dataset.hpp"

namespace modviz::train {

struct TrainConfig {
  std::size_t batch_size = 128;
  double lr = 0.001;
  std::size_t epochs = 150;
  std::uint64_t seed = 0;
  std::size_t patience = 0;       // epochs without improvement before stopping; 0 = off
  std::optional<double> dropout;  // overrides the architecture's rate
  double clip_norm = 0.0;         // global gradient-norm cap per batch; 0 = off

  void validate() const;
  KeyValues to_kv() const;  // "train.*" keys
  static TrainConfig from_kv(const KeyValues& kv, TrainConfig defaults);
  static TrainConfig from_kv(const KeyValues& kv);
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // mean of the batch losses seen during the epoch
  double val_accuracy = 0.0;
};

struct TrainHistory {
  double init_loss = 0.0;         // inference-mode training loss before any update
  double init_val_accuracy = 0.0;
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;     // 0 means the initialization was never beaten
  double best_val_accuracy = 0.0;
  bool stopped_early = false;
};

struct TrainResult {
  models::ModelSnapshot snapshot;  // parameters of the best-validation epoch
  TrainHistory history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Adam training with per-epoch shuffling from the "shuffle" substream and
/// dropout masks from the "dropout" substream of cfg.seed. Throws
/// DivergenceError naming the epoch and batch on a non-finite loss.
TrainResult train(models::ModelSpec spec, const signal::Dataset& ds, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

/// Mean inference-mode cross-entropy over a split.
double mean_loss(const models::Classifier<float>& model, const signal::Dataset& ds, signal::Split split);

}  // namespace modviz::train
