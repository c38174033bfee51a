#pragma once

#include <span>
#include <vector>

#include "modviz/explain/cav.hpp"
#include "modviz/grad/tensor.hpp"
#include "modviz/models/models.hpp"

namespace modviz::explain {

/// alpha_k = mean over the k-th gradient map. maps, grads: [N_f, V].
std::vector<double> gradcam_alphas(const grad::Tensor<double>& maps, const grad::Tensor<double>& grads);

/// max(sum_k alpha_k f^k, 0), length V.
std::vector<double> gradcam_vector(const grad::Tensor<double>& maps, std::span<const double> alphas);

/// v / max(v); all-zero input is returned unchanged. Throws InvalidArgument
/// on negative entries.
std::vector<double> normalize_unit(std::span<const double> v);

/// Half-pixel-centre linear resize with edge clamping:
/// s(t) = (t + 0.5) * V / n - 0.5.
std::vector<double> resize_bilinear(std::span<const double> v, std::size_t n);

struct GradcamOptions {
  double score_scale = 1.0;  // multiplies y_{j*} before backward
  int target_class = -1;      // < 0: the predicted class
};

struct GradcamResult {
  ClassActivationVector cav;
  std::vector<double> alphas;
  std::vector<double> raw;  // post-ReLU, pre-normalization, length V
};

/// Feature-map tap, gradients of the pre-softmax target score, alphas,
/// weighted sum, ReLU, normalization and resize for every row of `input`
/// ([B, 2, n_x]). Rows are independent in inference mode, so a batch gives
/// the same vectors as one call per sample. Throws NoTapPoint for LSTMs.
std::vector<GradcamResult> explain_gradcam(const models::Classifier<double>& model, const grad::Tensor<double>& input,
                                           const GradcamOptions& opt = {});

GradcamResult explain_gradcam(const models::Classifier<double>& model, const signal::RadioSample& sample,
                              const GradcamOptions& opt = {});

}  // namespace modviz::explain
