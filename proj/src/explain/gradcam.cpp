#include "modviz/explain/gradcam.hpp"

#include <algorithm>
#include <cmath>

#include "modviz/common/errors.hpp"
#include "modviz/grad/ops.hpp"

namespace modviz::explain {

using grad::Tensor;
using grad::Var;

std::vector<double> gradcam_alphas(const Tensor<double>& maps, const Tensor<double>& grads) {
  if (maps.rank() != 2 || maps.shape() != grads.shape())
    throw ShapeError("gradcam: maps " + grad::shape_string(maps.shape()) + " and grads " +
                     grad::shape_string(grads.shape()) + " must both be [N_f, V]");
  const std::size_t nf = maps.dim(0), v = maps.dim(1);
  std::vector<double> alpha(nf, 0.0);
  for (std::size_t k = 0; k < nf; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < v; ++i) s += grads[k * v + i];
    alpha[k] = s / static_cast<double>(v);
  }
  return alpha;
}

std::vector<double> gradcam_vector(const Tensor<double>& maps, std::span<const double> alphas) {
  if (maps.rank() != 2 || maps.dim(0) != alphas.size())
    throw ShapeError("gradcam: " + std::to_string(alphas.size()) + " weights for maps " +
                     grad::shape_string(maps.shape()));
  const std::size_t nf = maps.dim(0), v = maps.dim(1);
  std::vector<double> out(v, 0.0);
  for (std::size_t k = 0; k < nf; ++k)
    for (std::size_t i = 0; i < v; ++i) out[i] += alphas[k] * maps[k * v + i];
  for (auto& x : out) x = std::max(x, 0.0);
  return out;
}

std::vector<double> normalize_unit(std::span<const double> v) {
  double peak = 0.0;
  for (double x : v) {
    if (x < 0.0 || std::isnan(x)) throw InvalidArgument("normalize_unit: expects non-negative input");
    peak = std::max(peak, x);
  }
  std::vector<double> out(v.begin(), v.end());
  if (peak > 0.0)
    for (auto& x : out) x /= peak;
  return out;
}

std::vector<double> resize_bilinear(std::span<const double> v, std::size_t n) {
  if (v.empty()) throw InvalidArgument("resize_bilinear: empty input");
  if (n == v.size()) return {v.begin(), v.end()};
  const double ratio = static_cast<double>(v.size()) / static_cast<double>(n);
  const double last = static_cast<double>(v.size() - 1);
  std::vector<double> out(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double s = std::clamp((static_cast<double>(t) + 0.5) * ratio - 0.5, 0.0, last);
    const auto lo = static_cast<std::size_t>(std::floor(s));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = s - static_cast<double>(lo);
    out[t] = v[lo] + frac * (v[hi] - v[lo]);
  }
  return out;
}

std::vector<GradcamResult> explain_gradcam(const models::Classifier<double>& model, const Tensor<double>& input,
                                           const GradcamOptions& opt) {
  const auto& spec = model.spec();
  if (!spec.has_tap()) throw NoTapPoint();
  if (!(opt.score_scale > 0.0)) throw InvalidArgument("gradcam: score scale must be positive");
  auto fwd = model.forward(Var<double>::leaf(input), false, nullptr, true);
  const std::size_t batch = fwd.logits.shape()[0], classes = fwd.logits.shape()[1];

  std::vector<int> target(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    if (opt.target_class >= 0) {
      if (static_cast<std::size_t>(opt.target_class) >= classes) throw InvalidArgument("gradcam: target out of range");
      target[b] = opt.target_class;
    } else {
      const double* row = fwd.logits.value().ptr() + b * classes;
      target[b] = static_cast<int>(std::max_element(row, row + classes) - row);
    }
  }
  // Scores of different rows never mix, so one backward over their sum gives
  // each row its own gradient.
  auto score = grad::sum(grad::pick(fwd.logits, target));
  if (opt.score_scale != 1.0) score = grad::scale(score, opt.score_scale);
  model.params().zero_grad();
  grad::backward(score);

  const auto& tap = fwd.tap.value();
  const auto& tap_grad = fwd.tap.grad();
  const std::size_t nf = tap.dim(1), v = tap.dim(2);
  std::vector<GradcamResult> out(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    Tensor<double> maps({nf, v}), grads({nf, v});
    std::copy_n(tap.ptr() + b * nf * v, nf * v, maps.ptr());
    std::copy_n(tap_grad.ptr() + b * nf * v, nf * v, grads.ptr());
    auto& r = out[b];
    r.alphas = gradcam_alphas(maps, grads);
    r.raw = gradcam_vector(maps, r.alphas);
    // Upsampling at half-pixel centres only lands on the edge knots, so an
    // interior peak comes out below 1; scaling again restores max(w) = 1.
    // A no-op when V = n_x.
    r.cav.w = normalize_unit(resize_bilinear(normalize_unit(r.raw), spec.n_x));
    r.cav.target_class = target[b];
    r.cav.method = "gradcam";
    r.cav.pre_resize_length = v;
  }
  return out;
}

GradcamResult explain_gradcam(const models::Classifier<double>& model, const signal::RadioSample& sample,
                              const GradcamOptions& opt) {
  if (!model.spec().has_tap()) throw NoTapPoint();
  return explain_gradcam(model, models::make_input<double>(sample, model.spec().input_format), opt).front();
}

}  // namespace modviz::explain
