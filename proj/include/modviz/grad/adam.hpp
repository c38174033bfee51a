#pragma once

#include <span>
#include <string>
#include <vector>

#include "modviz/grad/params.hpp"

namespace modviz::grad {

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moment estimates for one tensor.
template <typename T>
struct AdamSlot {
  std::vector<T> m;
  std::vector<T> v;
};

/// One bias-corrected Adam update of `values` in place. `step` is the
/// 1-based update count after this call. Throws DivergenceError naming
/// `name` on a non-finite gradient before touching anything.
template <typename T>
void adam_step(std::span<T> values, std::span<const T> grads, AdamSlot<T>& slot, long step, const AdamConfig& cfg,
               const std::string& name);

/// Rescales all gradients of `params` so their joint L2 norm is at most
/// `max_norm`. Returns the norm before scaling.
template <typename T>
double clip_grad_norm(const ParamSet<T>& params, double max_norm);

/// Adam over a ParamSet, reading each parameter's accumulated grad.
template <typename T>
class Adam {
 public:
  Adam(const ParamSet<T>& params, AdamConfig cfg);

  void step();
  long steps_taken() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  const ParamSet<T>* params_;
  AdamConfig cfg_;
  std::vector<AdamSlot<T>> slots_;
  long t_ = 0;
};

}  // namespace modviz::grad
