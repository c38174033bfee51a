#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "modviz/common/kv_text.hpp"
#include "modviz/common/rng.hpp"
#include "modviz/grad/params.hpp"
#include "modviz/signal/dataset.hpp"

namespace modviz::models {

enum class Arch { LeNet, ResNet, Lstm };
enum class InputFormat { IQ, AP };

const char* arch_id(Arch a);            // "lenet-v1" | "resnet-v1" | "lstm-v1"
Arch parse_arch(std::string_view text);  // accepts ids and bare names
const char* format_id(InputFormat f);   // "iq" | "ap"
InputFormat parse_format(std::string_view text);

struct LeNetDims {
  std::size_t conv1 = 64;
  std::size_t conv2 = 80;
  std::size_t kernel = 3;
  std::size_t dense1 = 256;
  std::size_t dense2 = 128;
  double dropout = 0.5;
};

struct ResNetDims {
  std::size_t channels = 32;
  std::size_t kernel = 3;
  std::size_t stacks = 3;
  std::size_t units_per_stack = 2;
  std::size_t dense1 = 128;
  std::size_t dense2 = 128;
  double dropout = 0.25;
};

/// Gate-bias initialization. ForgetOne: zeros with forget bias +1. Chrono:
/// forget bias log(u), u ~ U(1, n_x - 1), and input bias its negative, so
/// the cell starts out averaging over timescales up to the sequence length.
enum class LstmBiasInit { ForgetOne, Chrono };

struct LstmDims {
  std::size_t hidden = 128;
  std::size_t layers = 2;
  std::size_t dense = 32;  // width not fixed by any reference; recorded as a guess
  double dropout = 0.5;
  LstmBiasInit bias_init = LstmBiasInit::ForgetOne;
};

struct ModelSpec {
  Arch arch = Arch::LeNet;
  InputFormat input_format = InputFormat::IQ;
  std::size_t n_x = 128;
  std::size_t n_y = 11;
  LeNetDims lenet;
  ResNetDims resnet;
  LstmDims lstm;

  bool has_tap() const { return arch != Arch::Lstm; }
  /// Name of the feature-map extraction point; throws NoTapPoint for LSTM.
  std::string tap_name() const;
  /// Feature-map set shape N_f x U x V of one sample (U = 1).
  grad::Shape tap_shape() const;
  double dropout() const;

  KeyValues to_kv() const;
  static ModelSpec from_kv(const KeyValues& kv);
};

/// Two same-padded width-3 convs (64, 80 kernels) and three dense layers; the
/// tap is the ReLU output of the second conv. Requires n_x >= 8.
ModelSpec build_lenet(std::size_t n_x, std::size_t n_y = 11, InputFormat fmt = InputFormat::IQ);
/// Three residual stacks (1x1 conv + two residual units) each followed by a
/// width-2 max-pool outside the stack; the tap is the third stack's output
/// before its pool. Requires n_x divisible by 8.
ModelSpec build_resnet(std::size_t n_x, std::size_t n_y = 11, InputFormat fmt = InputFormat::IQ);
/// Two LSTM layers, final step, dropout, dense 32 ReLU, dense n_y.
ModelSpec build_lstm(std::size_t n_x, std::size_t n_y = 11, InputFormat fmt = InputFormat::AP);
ModelSpec build_model(Arch arch, std::size_t n_x, std::size_t n_y, InputFormat fmt);

/// Closed-form trainable parameter count of a spec.
std::size_t parameter_count(const ModelSpec& spec);

template <typename T>
struct ForwardResult {
  grad::Var<T> logits;  // [B, n_y], pre-softmax
  grad::Var<T> tap;     // [B, N_f, V] when requested
};

template <typename T>
class Classifier {
 public:
  explicit Classifier(ModelSpec spec) : spec_(std::move(spec)) {}
  virtual ~Classifier() = default;
  Classifier(const Classifier&) = delete;
  Classifier& operator=(const Classifier&) = delete;

  const ModelSpec& spec() const { return spec_; }
  const grad::ParamSet<T>& params() const { return params_; }

  /// input [B, 2, n_x] in the model spec's input format. `rng` is only read when
  /// train is true (dropout). Throws NoTapPoint if want_tap on an LSTM.
  virtual ForwardResult<T> forward(const grad::Var<T>& input, bool train, Rng* rng, bool want_tap) const = 0;

 protected:
  void check_input(const grad::Var<T>& input) const;

  ModelSpec spec_;
  grad::ParamSet<T> params_;
};

/// Fresh classifier initialized from the "init" substream of `seed`.
template <typename T>
std::unique_ptr<Classifier<T>> make_classifier(const ModelSpec& spec, std::uint64_t seed);

/// Model input for samples: channels (I, Q), or (A / rms(A), phi / pi) in AP.
template <typename T>
grad::Tensor<T> make_input(std::span<const signal::RadioSample* const> batch, InputFormat fmt);
template <typename T>
grad::Tensor<T> make_input(const signal::RadioSample& sample, InputFormat fmt);

struct PredictionVector {
  std::vector<double> probs;
  std::vector<double> logits;
  int j_star = 0;
};

/// Inference-mode prediction for each row of `input`.
template <typename T>
std::vector<PredictionVector> predict(const Classifier<T>& model, const grad::Tensor<T>& input);

/// Parameters as float tensors plus the model spec; what checkpoints hold.
struct ModelSnapshot {
  ModelSpec spec;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, grad::Tensor<float>>> tensors;
  KeyValues info;  // extra manifest entries (training config, history summary)
};

template <typename T>
ModelSnapshot snapshot(const Classifier<T>& model, std::uint64_t seed);

/// Classifier at precision T carrying the snapshot's parameters.
template <typename T>
std::unique_ptr<Classifier<T>> instantiate(const ModelSnapshot& snap);

/// Copies parameter values from `snap` into `model` (names and shapes must match).
template <typename T>
void load_parameters(const ModelSnapshot& snap, const Classifier<T>& model);

}  // namespace modviz::models
