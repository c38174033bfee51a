#pragma once

#include <vector>

#include "modviz/common/kv_text.hpp"
#include "modviz/explain/cav.hpp"
#include "modviz/models/models.hpp"

namespace modviz::explain {

struct MaskConfig {
  double xi = 0.01;
  double lambda1 = 1e-4;
  double lambda2 = 1e-3;
  double p = 3.0;
  std::size_t iterations = 500;
  double step = 0.05;
  double init = 0.5;

  void validate() const;
  KeyValues to_kv() const;  // "mask.*" keys
  static MaskConfig from_kv(const KeyValues& kv, MaskConfig defaults);
};

/// (1 - w_i) x_{c,i} + xi w_i for x [2, L] (or [B, 2, L] with w [B, L]).
template <typename T>
grad::Tensor<T> apply_mask(const grad::Tensor<T>& x, std::span<const T> w, T xi);

struct MaskTerms {
  double objective = 0.0;
  double prob = 0.0;  // post-softmax probability of the target class
  double l1 = 0.0;    // lambda1 * sum |w|
  double tv = 0.0;    // lambda2 * sum |w_{i+1} - w_i|^p
};

/// Terms of the regularized objective for one sample x [1, 2, L], and the
/// gradient with respect to w when `grad_out` is non-null.
template <typename T>
MaskTerms mask_objective(const models::Classifier<T>& model, const grad::Tensor<T>& x, std::span<const T> w,
                         int target, const MaskConfig& cfg, std::vector<T>* grad_out = nullptr);

struct MaskTraceEntry {
  std::size_t iteration = 0;
  MaskTerms terms;
};

struct MaskTrace {
  std::vector<MaskTraceEntry> entries;  // iterate 0 (the init) through `iterations`
  std::size_t best = 0;
  std::string to_csv() const;
};

struct MaskResult {
  ClassActivationVector cav;
  MaskTrace trace;
  double unmasked_prob = 0.0;
};

/// Projected Adam on w for every row of `input` ([B, 2, L]). Each row's
/// objective only depends on its own w, and the optimizer is elementwise, so
/// rows evolve as if optimized alone. The target is the unmasked prediction.
/// Returns the best-objective iterate of each row.
template <typename T>
std::vector<MaskResult> optimize_mask(const models::Classifier<T>& model, const grad::Tensor<T>& input,
                                      const MaskConfig& cfg);

/// Mean over every model-input channel value of a split's samples; the
/// "mean" deletion value.
double input_channel_mean(const signal::Dataset& ds, signal::Split split, models::InputFormat fmt);

}  // namespace modviz::explain
