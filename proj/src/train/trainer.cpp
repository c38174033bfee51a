#include "modviz/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "modviz/common/errors.hpp"
#include "modviz/common/runtime.hpp"
#include "modviz/grad/adam.hpp"
#include "modviz/grad/ops.hpp"
#include "modviz/train/metrics.hpp"

namespace modviz::train {

using grad::Tensor;
using grad::Var;

void TrainConfig::validate() const {
  if (batch_size == 0) throw InvalidArgument("train.batch_size must be positive");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw InvalidArgument("train.lr must be finite and non-negative");
  if (!(clip_norm >= 0.0) || !std::isfinite(clip_norm)) throw InvalidArgument("train.clip_norm must be finite and non-negative");
  if (dropout && !(*dropout >= 0.0 && *dropout < 1.0)) throw InvalidArgument("train.dropout must be in [0,1)");
}

KeyValues TrainConfig::to_kv() const {
  KeyValues kv;
  kv.set("train.batch_size", batch_size);
  kv.set("train.lr", lr);
  kv.set("train.epochs", epochs);
  kv.set_uint("train.seed", seed);
  kv.set("train.patience", patience);
  if (dropout) kv.set("train.dropout", *dropout);
  if (clip_norm > 0.0) kv.set("train.clip_norm", clip_norm);
  return kv;
}

TrainConfig TrainConfig::from_kv(const KeyValues& kv, TrainConfig c) {
  auto count = [&](const char* key, std::size_t fallback) {
    const auto v = kv.get_int(key, static_cast<std::int64_t>(fallback));
    if (v < 0) throw InvalidArgument(std::string(key) + " must be non-negative");
    return static_cast<std::size_t>(v);
  };
  c.batch_size = count("train.batch_size", c.batch_size);
  c.lr = kv.get_double("train.lr", c.lr);
  c.epochs = count("train.epochs", c.epochs);
  c.seed = kv.get_uint("train.seed", c.seed);
  c.patience = count("train.patience", c.patience);
  c.clip_norm = kv.get_double("train.clip_norm", c.clip_norm);
  if (kv.contains("train.dropout")) c.dropout = kv.get_double("train.dropout", 0.0);
  c.validate();
  return c;
}

TrainConfig TrainConfig::from_kv(const KeyValues& kv) { return from_kv(kv, TrainConfig{}); }

namespace {

// All samples of one split packed as model input, plus labels.
struct PackedSplit {
  Tensor<float> inputs;  // [N, 2, n_x]
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::size_t row() const { return inputs.size() / std::max<std::size_t>(1, labels.size()); }

  Tensor<float> gather(std::span<const std::size_t> rows, std::vector<int>& out_labels) const {
    const std::size_t r = row();
    Tensor<float> out({rows.size(), inputs.dim(1), inputs.dim(2)});
    out_labels.resize(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
      std::memcpy(out.ptr() + k * r, inputs.ptr() + rows[k] * r, r * sizeof(float));
      out_labels[k] = labels[rows[k]];
    }
    return out;
  }
};

PackedSplit pack(const signal::Dataset& ds, signal::Split split, models::InputFormat fmt) {
  PackedSplit p;
  std::vector<const signal::RadioSample*> ptrs;
  for (auto i : ds.indices(split)) {
    ptrs.push_back(&ds.samples[i]);
    p.labels.push_back(ds.samples[i].label);
  }
  if (!ptrs.empty()) p.inputs = models::make_input<float>(ptrs, fmt);
  return p;
}

constexpr std::size_t kEvalBatch = 500;

double split_loss(const models::Classifier<float>& model, const PackedSplit& data) {
  grad::NoGradGuard guard;
  double total = 0.0;
  std::vector<std::size_t> rows;
  std::vector<int> labels;
  for (std::size_t start = 0; start < data.size(); start += kEvalBatch) {
    rows.resize(std::min(kEvalBatch, data.size() - start));
    std::iota(rows.begin(), rows.end(), start);
    auto x = Var<float>::leaf(data.gather(rows, labels));
    auto loss = grad::softmax_xent(model.forward(x, false, nullptr, false).logits, labels);
    total += static_cast<double>(loss.value()[0]) * static_cast<double>(rows.size());
  }
  return total / static_cast<double>(data.size());
}

double split_accuracy(const models::Classifier<float>& model, const PackedSplit& data) {
  if (data.size() == 0) return 0.0;
  std::size_t correct = 0;
  std::vector<std::size_t> rows;
  std::vector<int> labels;
  for (std::size_t start = 0; start < data.size(); start += kEvalBatch) {
    rows.resize(std::min(kEvalBatch, data.size() - start));
    std::iota(rows.begin(), rows.end(), start);
    const auto preds = models::predict(model, data.gather(rows, labels));
    for (std::size_t k = 0; k < rows.size(); ++k) correct += preds[k].j_star == labels[k];
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

void apply_dropout_override(models::ModelSpec& spec, double rate) {
  switch (spec.arch) {
    case models::Arch::LeNet: spec.lenet.dropout = rate; break;
    case models::Arch::ResNet: spec.resnet.dropout = rate; break;
    case models::Arch::Lstm: spec.lstm.dropout = rate; break;
  }
}

}  // namespace

double mean_loss(const models::Classifier<float>& model, const signal::Dataset& ds, signal::Split split) {
  auto data = pack(ds, split, model.spec().input_format);
  if (data.size() == 0) throw InvalidArgument("mean_loss: empty split");
  return split_loss(model, data);
}

TrainResult train(models::ModelSpec spec, const signal::Dataset& ds, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  const FlushDenormals ftz;
  if (ds.n_x() != spec.n_x)
    throw ShapeError("dataset has " + std::to_string(ds.n_x()) + "-point samples, model expects " +
                     std::to_string(spec.n_x));
  if (cfg.dropout) apply_dropout_override(spec, *cfg.dropout);

  const auto train_data = pack(ds, signal::Split::Train, spec.input_format);
  const auto val_data = pack(ds, signal::Split::Val, spec.input_format);
  if (train_data.size() == 0) throw InvalidArgument("train: the training split is empty");
  for (int l : train_data.labels)
    if (l < 0 || static_cast<std::size_t>(l) >= spec.n_y) throw InvalidArgument("train: label outside model classes");

  auto model = models::make_classifier<float>(spec, cfg.seed);
  grad::Adam<float> adam(model->params(), grad::AdamConfig{.lr = cfg.lr});

  TrainResult result;
  auto& h = result.history;
  h.init_loss = split_loss(*model, train_data);
  h.init_val_accuracy = split_accuracy(*model, val_data);
  h.best_val_accuracy = h.init_val_accuracy;
  result.snapshot = models::snapshot(*model, cfg.seed);

  std::vector<std::size_t> order(train_data.size());
  std::vector<int> labels;
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng = substream(cfg.seed, "shuffle", {epoch});
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    Rng dropout_rng = substream(cfg.seed, "dropout", {epoch});

    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - start);
      auto x = Var<float>::leaf(train_data.gather(std::span(order).subspan(start, n), labels));
      auto loss = grad::softmax_xent(model->forward(x, true, &dropout_rng, false).logits, labels);
      const double value = loss.value()[0];
      const std::string where = "epoch " + std::to_string(epoch) + " batch " + std::to_string(batches + 1);
      if (!std::isfinite(value)) throw DivergenceError("non-finite loss at " + where);
      model->params().zero_grad();
      grad::backward(loss);
      try {
        if (cfg.clip_norm > 0.0) grad::clip_grad_norm(model->params(), cfg.clip_norm);
        adam.step();
      } catch (const DivergenceError& e) {
        throw DivergenceError(std::string(e.what()) + " at " + where);
      }
      loss_sum += value;
      ++batches;
    }

    EpochRecord rec{epoch, loss_sum / static_cast<double>(batches), split_accuracy(*model, val_data)};
    h.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (rec.val_accuracy > h.best_val_accuracy) {
      h.best_val_accuracy = rec.val_accuracy;
      h.best_epoch = epoch;
      result.snapshot = models::snapshot(*model, cfg.seed);
      since_best = 0;
    } else if (cfg.patience && ++since_best >= cfg.patience) {
      h.stopped_early = true;
      break;
    }
  }
  return result;
}

}  // namespace modviz::train
