#include "modviz/models/models.hpp"

#include <cmath>
#include <numbers>

#include "modviz/common/errors.hpp"
#include "modviz/grad/ops.hpp"

namespace modviz::models {

using grad::Shape;
using grad::Tensor;
using grad::Var;

const char* arch_id(Arch a) {
  switch (a) {
    case Arch::LeNet: return "lenet-v1";
    case Arch::ResNet: return "resnet-v1";
    case Arch::Lstm: return "lstm-v1";
  }
  return "?";
}

Arch parse_arch(std::string_view text) {
  if (text == "lenet" || text == "lenet-v1") return Arch::LeNet;
  if (text == "resnet" || text == "resnet-v1") return Arch::ResNet;
  if (text == "lstm" || text == "lstm-v1") return Arch::Lstm;
  throw InvalidArgument("unknown model '" + std::string(text) + "'");
}

const char* format_id(InputFormat f) { return f == InputFormat::IQ ? "iq" : "ap"; }

InputFormat parse_format(std::string_view text) {
  if (text == "iq") return InputFormat::IQ;
  if (text == "ap") return InputFormat::AP;
  throw InvalidArgument("unknown input format '" + std::string(text) + "'");
}

std::string ModelSpec::tap_name() const {
  switch (arch) {
    case Arch::LeNet: return "conv2.relu";
    case Arch::ResNet: return "stack" + std::to_string(resnet.stacks) + ".out";
    case Arch::Lstm: break;
  }
  throw NoTapPoint();
}

Shape ModelSpec::tap_shape() const {
  switch (arch) {
    case Arch::LeNet: return {lenet.conv2, 1, n_x};
    case Arch::ResNet: return {resnet.channels, 1, n_x >> (resnet.stacks - 1)};
    case Arch::Lstm: break;
  }
  throw NoTapPoint();
}

double ModelSpec::dropout() const {
  switch (arch) {
    case Arch::LeNet: return lenet.dropout;
    case Arch::ResNet: return resnet.dropout;
    case Arch::Lstm: return lstm.dropout;
  }
  return 0.0;
}

KeyValues ModelSpec::to_kv() const {
  KeyValues kv;
  kv.set("arch", arch_id(arch));
  kv.set("input_format", format_id(input_format));
  kv.set("n_x", n_x);
  kv.set("n_y", n_y);
  switch (arch) {
    case Arch::LeNet:
      kv.set("lenet.conv1", lenet.conv1);
      kv.set("lenet.conv2", lenet.conv2);
      kv.set("lenet.kernel", lenet.kernel);
      kv.set("lenet.dense1", lenet.dense1);
      kv.set("lenet.dense2", lenet.dense2);
      kv.set("lenet.dropout", lenet.dropout);
      break;
    case Arch::ResNet:
      kv.set("resnet.channels", resnet.channels);
      kv.set("resnet.kernel", resnet.kernel);
      kv.set("resnet.stacks", resnet.stacks);
      kv.set("resnet.units_per_stack", resnet.units_per_stack);
      kv.set("resnet.dense1", resnet.dense1);
      kv.set("resnet.dense2", resnet.dense2);
      kv.set("resnet.dropout", resnet.dropout);
      break;
    case Arch::Lstm:
      kv.set("lstm.hidden", lstm.hidden);
      kv.set("lstm.layers", lstm.layers);
      kv.set("lstm.dense", lstm.dense);
      kv.set("lstm.dense_guessed", "true");
      kv.set("lstm.dropout", lstm.dropout);
      kv.set("lstm.bias_init", lstm.bias_init == LstmBiasInit::Chrono ? "chrono" : "forget-one");
      break;
  }
  if (has_tap()) kv.set("tap", tap_name());
  if (arch == Arch::Lstm && lstm.bias_init == LstmBiasInit::Chrono)
    kv.set("init", "glorot-uniform kernels; uniform +-1/sqrt(H) lstm gates; zero biases; chrono lstm gate biases");
  else
    kv.set("init", "glorot-uniform kernels; uniform +-1/sqrt(H) lstm gates; zero biases; forget bias +1");
  return kv;
}

ModelSpec ModelSpec::from_kv(const KeyValues& kv) {
  ModelSpec s = build_model(parse_arch(kv.require("arch")), static_cast<std::size_t>(kv.get_int("n_x", 128)),
                            static_cast<std::size_t>(kv.get_int("n_y", 11)),
                            parse_format(kv.get_or("input_format", "iq")));
  auto sz = [&](const char* key, std::size_t& field) {
    field = static_cast<std::size_t>(kv.get_int(key, static_cast<std::int64_t>(field)));
  };
  sz("lenet.conv1", s.lenet.conv1);
  sz("lenet.conv2", s.lenet.conv2);
  sz("lenet.kernel", s.lenet.kernel);
  sz("lenet.dense1", s.lenet.dense1);
  sz("lenet.dense2", s.lenet.dense2);
  s.lenet.dropout = kv.get_double("lenet.dropout", s.lenet.dropout);
  sz("resnet.channels", s.resnet.channels);
  sz("resnet.kernel", s.resnet.kernel);
  sz("resnet.stacks", s.resnet.stacks);
  sz("resnet.units_per_stack", s.resnet.units_per_stack);
  sz("resnet.dense1", s.resnet.dense1);
  sz("resnet.dense2", s.resnet.dense2);
  s.resnet.dropout = kv.get_double("resnet.dropout", s.resnet.dropout);
  sz("lstm.hidden", s.lstm.hidden);
  sz("lstm.layers", s.lstm.layers);
  sz("lstm.dense", s.lstm.dense);
  s.lstm.dropout = kv.get_double("lstm.dropout", s.lstm.dropout);
  if (auto b = kv.get("lstm.bias_init")) {
    if (*b == "forget-one")
      s.lstm.bias_init = LstmBiasInit::ForgetOne;
    else if (*b == "chrono")
      s.lstm.bias_init = LstmBiasInit::Chrono;
    else
      throw InvalidArgument("lstm.bias_init must be forget-one or chrono, got " + *b);
  }
  if (s.arch == Arch::Lstm && s.lstm.bias_init == LstmBiasInit::Chrono && s.n_x < 3)
    throw InvalidArgument("lstm: chrono bias init needs n_x >= 3");
  if (s.arch == Arch::ResNet && (s.resnet.stacks == 0 || s.n_x % (std::size_t{1} << s.resnet.stacks) != 0))
    throw InvalidArgument("resnet: n_x must be divisible by 2^stacks");
  if (s.arch == Arch::Lstm && s.lstm.layers == 0) throw InvalidArgument("lstm: need at least one layer");
  return s;
}

ModelSpec build_lenet(std::size_t n_x, std::size_t n_y, InputFormat fmt) {
  if (n_x < 8) throw InvalidArgument("lenet: n_x must be at least 8");
  ModelSpec s;
  s.arch = Arch::LeNet;
  s.input_format = fmt;
  s.n_x = n_x;
  s.n_y = n_y;
  return s;
}

ModelSpec build_resnet(std::size_t n_x, std::size_t n_y, InputFormat fmt) {
  if (n_x == 0 || n_x % 8 != 0) throw InvalidArgument("resnet: n_x must be divisible by 8");
  ModelSpec s;
  s.arch = Arch::ResNet;
  s.input_format = fmt;
  s.n_x = n_x;
  s.n_y = n_y;
  return s;
}

ModelSpec build_lstm(std::size_t n_x, std::size_t n_y, InputFormat fmt) {
  if (n_x == 0) throw InvalidArgument("lstm: n_x must be positive");
  ModelSpec s;
  s.arch = Arch::Lstm;
  s.input_format = fmt;
  s.n_x = n_x;
  s.n_y = n_y;
  return s;
}

ModelSpec build_model(Arch arch, std::size_t n_x, std::size_t n_y, InputFormat fmt) {
  switch (arch) {
    case Arch::LeNet: return build_lenet(n_x, n_y, fmt);
    case Arch::ResNet: return build_resnet(n_x, n_y, fmt);
    case Arch::Lstm: return build_lstm(n_x, n_y, fmt);
  }
  throw InvalidArgument("unknown architecture");
}

std::size_t parameter_count(const ModelSpec& s) {
  auto conv = [](std::size_t cin, std::size_t cout, std::size_t k) { return cout * cin * k + cout; };
  auto dense = [](std::size_t din, std::size_t dout) { return din * dout + dout; };
  switch (s.arch) {
    case Arch::LeNet: {
      const auto& d = s.lenet;
      return conv(2, d.conv1, d.kernel) + conv(d.conv1, d.conv2, d.kernel) + dense(d.conv2 * s.n_x, d.dense1) +
             dense(d.dense1, d.dense2) + dense(d.dense2, s.n_y);
    }
    case Arch::ResNet: {
      const auto& d = s.resnet;
      std::size_t total = 0, cin = 2;
      for (std::size_t k = 0; k < d.stacks; ++k) {
        total += conv(cin, d.channels, 1) + d.units_per_stack * 2 * conv(d.channels, d.channels, d.kernel);
        cin = d.channels;
      }
      const std::size_t flat = d.channels * (s.n_x >> d.stacks);
      return total + dense(flat, d.dense1) + dense(d.dense1, d.dense2) + dense(d.dense2, s.n_y);
    }
    case Arch::Lstm: {
      const auto& d = s.lstm;
      std::size_t total = 0, din = 2;
      for (std::size_t l = 0; l < d.layers; ++l) {
        total += din * 4 * d.hidden + d.hidden * 4 * d.hidden + 4 * d.hidden;
        din = d.hidden;
      }
      return total + dense(d.hidden, d.dense) + dense(d.dense, s.n_y);
    }
  }
  return 0;
}

template <typename T>
void Classifier<T>::check_input(const Var<T>& input) const {
  const auto& sh = input.shape();
  if (sh.size() != 3 || sh[1] != 2 || sh[2] != spec_.n_x)
    throw ShapeError(std::string(arch_id(spec_.arch)) + " expects input [B,2," + std::to_string(spec_.n_x) +
                     "], got " + grad::shape_string(sh));
}

namespace {

template <typename T>
Tensor<T> uniform_tensor(Shape shape, double limit, Rng& rng) {
  std::uniform_real_distribution<double> u(-limit, limit);
  Tensor<T> t(std::move(shape));
  for (auto& v : t.vec()) v = static_cast<T>(u(rng));
  return t;
}

template <typename T>
struct LayerFactory {
  grad::ParamSet<T>& params;
  Rng& rng;

  std::pair<Var<T>, Var<T>> conv(const std::string& name, std::size_t cin, std::size_t cout, std::size_t k) {
    const double limit = std::sqrt(6.0 / static_cast<double>(cin * k + cout * k));
    auto w = params.add(name + ".w", uniform_tensor<T>({cout, cin, k}, limit, rng), "glorot-uniform");
    auto b = params.add(name + ".b", Tensor<T>({cout}), "zeros");
    return {w, b};
  }
  std::pair<Var<T>, Var<T>> dense(const std::string& name, std::size_t din, std::size_t dout) {
    const double limit = std::sqrt(6.0 / static_cast<double>(din + dout));
    auto w = params.add(name + ".w", uniform_tensor<T>({din, dout}, limit, rng), "glorot-uniform");
    auto b = params.add(name + ".b", Tensor<T>({dout}), "zeros");
    return {w, b};
  }
  struct Lstm {
    Var<T> wx, wh, b;
  };
  Lstm lstm(const std::string& name, std::size_t din, std::size_t hid, LstmBiasInit bias_init, std::size_t steps) {
    const double limit = 1.0 / std::sqrt(static_cast<double>(hid));
    Lstm l;
    l.wx = params.add(name + ".wx", uniform_tensor<T>({din, 4 * hid}, limit, rng), "uniform-inv-sqrt-h");
    l.wh = params.add(name + ".wh", uniform_tensor<T>({hid, 4 * hid}, limit, rng), "uniform-inv-sqrt-h");
    Tensor<T> bias({4 * hid});
    if (bias_init == LstmBiasInit::Chrono) {
      std::uniform_real_distribution<double> u(1.0, static_cast<double>(steps - 1));
      for (std::size_t j = 0; j < hid; ++j) {
        const double bf = std::log(u(rng));
        bias[hid + j] = static_cast<T>(bf);
        bias[j] = static_cast<T>(-bf);
      }
      l.b = params.add(name + ".b", std::move(bias), "chrono");
    } else {
      for (std::size_t j = hid; j < 2 * hid; ++j) bias[j] = T(1);
      l.b = params.add(name + ".b", std::move(bias), "zeros-forget-one");
    }
    return l;
  }
};

template <typename T>
class LeNet final : public Classifier<T> {
 public:
  LeNet(ModelSpec spec, Rng& rng) : Classifier<T>(std::move(spec)) {
    const auto& d = this->spec_.lenet;
    LayerFactory<T> f{this->params_, rng};
    c1_ = f.conv("conv1", 2, d.conv1, d.kernel);
    c2_ = f.conv("conv2", d.conv1, d.conv2, d.kernel);
    d1_ = f.dense("dense1", d.conv2 * this->spec_.n_x, d.dense1);
    d2_ = f.dense("dense2", d.dense1, d.dense2);
    d3_ = f.dense("dense3", d.dense2, this->spec_.n_y);
  }

  ForwardResult<T> forward(const Var<T>& input, bool train, Rng* rng, bool want_tap) const override {
    this->check_input(input);
    const double p = this->spec_.lenet.dropout;
    const std::size_t batch = input.shape()[0];
    auto h = grad::relu(grad::conv1d(input, c1_.first, c1_.second));
    h = grad::dropout(h, p, train, *rng_or(rng, train));
    auto maps = grad::relu(grad::conv1d(h, c2_.first, c2_.second));
    auto z = grad::reshape(maps, {batch, maps.size() / batch});
    z = grad::dropout(grad::relu(grad::dense(z, d1_.first, d1_.second)), p, train, *rng_or(rng, train));
    z = grad::relu(grad::dense(z, d2_.first, d2_.second));
    ForwardResult<T> r;
    r.logits = grad::dense(z, d3_.first, d3_.second);
    if (want_tap) r.tap = maps;
    return r;
  }

  static Rng* rng_or(Rng* rng, bool train) {
    static thread_local Rng unused;
    if (train && !rng) throw InvalidArgument("training forward needs an rng");
    return rng ? rng : &unused;
  }

 private:
  std::pair<Var<T>, Var<T>> c1_, c2_, d1_, d2_, d3_;
};

template <typename T>
class ResNet final : public Classifier<T> {
 public:
  ResNet(ModelSpec spec, Rng& rng) : Classifier<T>(std::move(spec)) {
    const auto& d = this->spec_.resnet;
    LayerFactory<T> f{this->params_, rng};
    std::size_t cin = 2;
    for (std::size_t k = 0; k < d.stacks; ++k) {
      const std::string name = "stack" + std::to_string(k + 1);
      Stack s;
      s.proj = f.conv(name + ".proj", cin, d.channels, 1);
      for (std::size_t u = 0; u < d.units_per_stack; ++u) {
        const std::string unit = name + ".unit" + std::to_string(u + 1);
        s.units.push_back({f.conv(unit + ".conv1", d.channels, d.channels, d.kernel),
                           f.conv(unit + ".conv2", d.channels, d.channels, d.kernel)});
      }
      stacks_.push_back(std::move(s));
      cin = d.channels;
    }
    d1_ = f.dense("dense1", d.channels * (this->spec_.n_x >> d.stacks), d.dense1);
    d2_ = f.dense("dense2", d.dense1, d.dense2);
    d3_ = f.dense("dense3", d.dense2, this->spec_.n_y);
  }

  ForwardResult<T> forward(const Var<T>& input, bool train, Rng* rng, bool want_tap) const override {
    this->check_input(input);
    ForwardResult<T> r;
    Var<T> x = input;
    for (std::size_t k = 0; k < stacks_.size(); ++k) {
      x = residual_stack(x, stacks_[k]);
      if (want_tap && k + 1 == stacks_.size()) r.tap = x;
      x = grad::maxpool1d(x, 2, 2);
    }
    const std::size_t batch = input.shape()[0];
    auto z = grad::reshape(x, {batch, x.size() / batch});
    z = grad::relu(grad::dense(z, d1_.first, d1_.second));
    z = grad::dropout(z, this->spec_.resnet.dropout, train, *LeNet<T>::rng_or(rng, train));
    z = grad::relu(grad::dense(z, d2_.first, d2_.second));
    r.logits = grad::dense(z, d3_.first, d3_.second);
    return r;
  }

  struct Unit {
    std::pair<Var<T>, Var<T>> conv1, conv2;
  };
  struct Stack {
    std::pair<Var<T>, Var<T>> proj;
    std::vector<Unit> units;
  };

  /// x + conv2(relu(conv1(x))) per unit, so zero kernels give the identity.
  static Var<T> residual_unit(const Var<T>& x, const Unit& u) {
    auto h = grad::relu(grad::conv1d(x, u.conv1.first, u.conv1.second));
    h = grad::conv1d(h, u.conv2.first, u.conv2.second);
    return grad::add(x, h);
  }

 private:
  static Var<T> residual_stack(const Var<T>& in, const Stack& s) {
    auto x = grad::conv1d(in, s.proj.first, s.proj.second);
    for (const auto& u : s.units) x = residual_unit(x, u);
    return x;
  }

  std::vector<Stack> stacks_;
  std::pair<Var<T>, Var<T>> d1_, d2_, d3_;
};

template <typename T>
class LstmNet final : public Classifier<T> {
 public:
  LstmNet(ModelSpec spec, Rng& rng) : Classifier<T>(std::move(spec)) {
    const auto& d = this->spec_.lstm;
    LayerFactory<T> f{this->params_, rng};
    std::size_t din = 2;
    for (std::size_t l = 0; l < d.layers; ++l) {
      layers_.push_back(f.lstm("lstm" + std::to_string(l + 1), din, d.hidden, d.bias_init, this->spec_.n_x));
      din = d.hidden;
    }
    d1_ = f.dense("dense1", d.hidden, d.dense);
    d2_ = f.dense("dense2", d.dense, this->spec_.n_y);
  }

  ForwardResult<T> forward(const Var<T>& input, bool train, Rng* rng, bool want_tap) const override {
    if (want_tap) throw NoTapPoint();
    this->check_input(input);
    auto h = grad::transpose_channels(input);
    for (const auto& l : layers_) h = grad::lstm(h, l.wx, l.wh, l.b);
    auto z = grad::last_step(h);
    z = grad::dropout(z, this->spec_.lstm.dropout, train, *LeNet<T>::rng_or(rng, train));
    z = grad::relu(grad::dense(z, d1_.first, d1_.second));
    ForwardResult<T> r;
    r.logits = grad::dense(z, d2_.first, d2_.second);
    return r;
  }

 private:
  std::vector<typename LayerFactory<T>::Lstm> layers_;
  std::pair<Var<T>, Var<T>> d1_, d2_;
};

}  // namespace

template <typename T>
std::unique_ptr<Classifier<T>> make_classifier(const ModelSpec& spec, std::uint64_t seed) {
  Rng rng = substream(seed, "init");
  switch (spec.arch) {
    case Arch::LeNet: return std::make_unique<LeNet<T>>(spec, rng);
    case Arch::ResNet: return std::make_unique<ResNet<T>>(spec, rng);
    case Arch::Lstm: return std::make_unique<LstmNet<T>>(spec, rng);
  }
  throw InvalidArgument("unknown architecture");
}

template <typename T>
Tensor<T> make_input(std::span<const signal::RadioSample* const> batch, InputFormat fmt) {
  if (batch.empty()) throw InvalidArgument("make_input: empty batch");
  const std::size_t n = batch.front()->iq.size();
  Tensor<T> out({batch.size(), 2, n});
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& iq = batch[b]->iq;
    if (iq.size() != n) throw ShapeError("make_input: samples of differing length");
    T* ch0 = out.ptr() + b * 2 * n;
    T* ch1 = ch0 + n;
    if (fmt == InputFormat::IQ) {
      for (std::size_t i = 0; i < n; ++i) {
        ch0[i] = static_cast<T>(iq[i].real());
        ch1[i] = static_cast<T>(iq[i].imag());
      }
      continue;
    }
    double sq = 0.0;
    std::vector<signal::AmpPhase> ap(n);
    for (std::size_t i = 0; i < n; ++i) {
      ap[i] = signal::to_amplitude_phase(signal::Complex(iq[i].real(), iq[i].imag()));
      sq += ap[i].amplitude * ap[i].amplitude;
    }
    const double rms = std::sqrt(sq / static_cast<double>(n));
    const double inv = rms > 0.0 ? 1.0 / rms : 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      ch0[i] = static_cast<T>(ap[i].amplitude * inv);
      ch1[i] = static_cast<T>(ap[i].phase / std::numbers::pi);
    }
  }
  return out;
}

template <typename T>
Tensor<T> make_input(const signal::RadioSample& sample, InputFormat fmt) {
  const signal::RadioSample* p = &sample;
  return make_input<T>(std::span<const signal::RadioSample* const>(&p, 1), fmt);
}

template <typename T>
std::vector<PredictionVector> predict(const Classifier<T>& model, const Tensor<T>& input) {
  grad::NoGradGuard guard;
  auto logits = model.forward(Var<T>::leaf(input), false, nullptr, false).logits;
  auto probs = grad::softmax(logits);
  const std::size_t batch = logits.shape()[0], classes = logits.shape()[1];
  std::vector<PredictionVector> out(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    auto& p = out[b];
    p.logits.assign(logits.value().ptr() + b * classes, logits.value().ptr() + (b + 1) * classes);
    p.probs.assign(probs.value().ptr() + b * classes, probs.value().ptr() + (b + 1) * classes);
    p.j_star = static_cast<int>(std::max_element(p.logits.begin(), p.logits.end()) - p.logits.begin());
  }
  return out;
}

template <typename T>
ModelSnapshot snapshot(const Classifier<T>& model, std::uint64_t seed) {
  ModelSnapshot s;
  s.spec = model.spec();
  s.seed = seed;
  for (const auto& p : model.params().items()) s.tensors.emplace_back(p.name, p.var.value().template cast<float>());
  return s;
}

template <typename T>
void load_parameters(const ModelSnapshot& snap, const Classifier<T>& model) {
  const auto& items = model.params().items();
  if (items.size() != snap.tensors.size())
    throw ShapeError("snapshot holds " + std::to_string(snap.tensors.size()) + " tensors, model expects " +
                     std::to_string(items.size()));
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& [name, t] = snap.tensors[i];
    if (name != items[i].name || t.shape() != items[i].var.shape())
      throw ShapeError("snapshot tensor " + name + " " + grad::shape_string(t.shape()) + " does not match " +
                       items[i].name + " " + grad::shape_string(items[i].var.shape()));
    items[i].var.mutable_value() = t.template cast<T>();
  }
}

template <typename T>
std::unique_ptr<Classifier<T>> instantiate(const ModelSnapshot& snap) {
  auto model = make_classifier<T>(snap.spec, snap.seed);
  load_parameters(snap, *model);
  return model;
}

#define MODVIZ_INSTANTIATE_MODELS(T)                                                                  \
  template class Classifier<T>;                                                                       \
  template std::unique_ptr<Classifier<T>> make_classifier<T>(const ModelSpec&, std::uint64_t);          \
  template Tensor<T> make_input<T>(std::span<const signal::RadioSample* const>, InputFormat);          \
  template Tensor<T> make_input<T>(const signal::RadioSample&, InputFormat);                          \
  template std::vector<PredictionVector> predict<T>(const Classifier<T>&, const Tensor<T>&);          \
  template ModelSnapshot snapshot<T>(const Classifier<T>&, std::uint64_t);                            \
  template void load_parameters<T>(const ModelSnapshot&, const Classifier<T>&);                       \
  template std::unique_ptr<Classifier<T>> instantiate<T>(const ModelSnapshot&);

MODVIZ_INSTANTIATE_MODELS(float)
MODVIZ_INSTANTIATE_MODELS(double)

}  // namespace modviz::models
