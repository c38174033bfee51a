#include "modviz/grad/adam.hpp"

#include <cmath>

namespace modviz::grad {

template <typename T>
void adam_step(std::span<T> values, std::span<const T> grads, AdamSlot<T>& slot, long step, const AdamConfig& cfg,
               const std::string& name) {
  if (grads.size() != values.size()) throw ShapeError("adam: gradient size mismatch for " + name);
  if (slot.m.empty()) {
    slot.m.assign(values.size(), T(0));
    slot.v.assign(values.size(), T(0));
  }
  if (slot.m.size() != values.size()) throw ShapeError("adam: state size mismatch for " + name);
  for (T g : grads)
    if (!std::isfinite(g)) throw DivergenceError("non-finite gradient in parameter " + name);

  const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
  const T c1 = static_cast<T>(1.0 - std::pow(cfg.beta1, static_cast<double>(step)));
  const T c2 = static_cast<T>(1.0 - std::pow(cfg.beta2, static_cast<double>(step)));
  const T lr = static_cast<T>(cfg.lr), eps = static_cast<T>(cfg.eps);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const T g = grads[i];
    slot.m[i] = b1 * slot.m[i] + (T(1) - b1) * g;
    slot.v[i] = b2 * slot.v[i] + (T(1) - b2) * g * g;
    const T mhat = slot.m[i] / c1;
    const T vhat = slot.v[i] / c2;
    values[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

template <typename T>
double clip_grad_norm(const ParamSet<T>& params, double max_norm) {
  if (!(max_norm > 0.0)) throw InvalidArgument("clip_grad_norm: max_norm must be positive");
  double sq = 0.0;
  for (const auto& p : params.items())
    for (T g : p.var.grad().span()) sq += static_cast<double>(g) * static_cast<double>(g);
  const double norm = std::sqrt(sq);
  if (norm > max_norm && std::isfinite(norm)) {
    const T scale = static_cast<T>(max_norm / norm);
    for (const auto& p : params.items())
      for (T& g : p.var.node()->grad_buffer().span()) g *= scale;
  }
  return norm;
}

template <typename T>
Adam<T>::Adam(const ParamSet<T>& params, AdamConfig cfg)
    : params_(&params), cfg_(cfg), slots_(params.size()) {}

template <typename T>
void Adam<T>::step() {
  ++t_;
  const auto& items = params_->items();
  // Validate all gradients first so a divergence leaves parameters untouched.
  for (const auto& p : items)
    for (T g : p.var.grad().vec())
      if (!std::isfinite(g)) throw DivergenceError("non-finite gradient in parameter " + p.name);
  for (std::size_t i = 0; i < items.size(); ++i) {
    auto& var = items[i].var;
    adam_step<T>(var.mutable_value().span(), var.grad().span(), slots_[i], t_, cfg_, items[i].name);
  }
}

template void adam_step<float>(std::span<float>, std::span<const float>, AdamSlot<float>&, long, const AdamConfig&,
                               const std::string&);
template void adam_step<double>(std::span<double>, std::span<const double>, AdamSlot<double>&, long,
                                const AdamConfig&, const std::string&);
template double clip_grad_norm<float>(const ParamSet<float>&, double);
template double clip_grad_norm<double>(const ParamSet<double>&, double);
template class Adam<float>;
template class Adam<double>;

}  // namespace modviz::grad
