#include "modviz/explain/mask.hpp"

#include <cmath>

#include "modviz/common/errors.hpp"
#include "modviz/common/runtime.hpp"
#include "modviz/grad/adam.hpp"
#include "modviz/grad/ops.hpp"

namespace modviz::explain {

using grad::Tensor;
using grad::Var;

void MaskConfig::validate() const {
  if (!(p >= 1.0)) throw InvalidArgument("mask.p must be >= 1");
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) throw InvalidArgument("mask.lambda1 and mask.lambda2 must be >= 0");
  if (!std::isfinite(xi)) throw InvalidArgument("mask.xi must be finite");
  if (!(step > 0.0) || !std::isfinite(step)) throw InvalidArgument("mask.step must be positive");
  if (!(init >= 0.0 && init <= 1.0)) throw InvalidArgument("mask.init must lie in [0,1]");
}

KeyValues MaskConfig::to_kv() const {
  KeyValues kv;
  kv.set("mask.xi", xi);
  kv.set("mask.lambda1", lambda1);
  kv.set("mask.lambda2", lambda2);
  kv.set("mask.p", p);
  kv.set("mask.iterations", iterations);
  kv.set("mask.step", step);
  kv.set("mask.init", init);
  kv.set("mask.optimizer", "adam-projected");
  return kv;
}

MaskConfig MaskConfig::from_kv(const KeyValues& kv, MaskConfig c) {
  c.xi = kv.get_double("mask.xi", c.xi);
  c.lambda1 = kv.get_double("mask.lambda1", c.lambda1);
  c.lambda2 = kv.get_double("mask.lambda2", c.lambda2);
  c.p = kv.get_double("mask.p", c.p);
  const auto it = kv.get_int("mask.iterations", static_cast<std::int64_t>(c.iterations));
  if (it < 0) throw InvalidArgument("mask.iterations must be non-negative");
  c.iterations = static_cast<std::size_t>(it);
  c.step = kv.get_double("mask.step", c.step);
  c.init = kv.get_double("mask.init", c.init);
  c.validate();
  return c;
}

template <typename T>
Tensor<T> apply_mask(const Tensor<T>& x, std::span<const T> w, T xi) {
  const bool single = x.rank() == 2;
  const Tensor<T> x3 = single ? x.reshaped({1, x.dim(0), x.dim(1)}) : x;
  if (x3.rank() != 3 || w.size() != x3.dim(0) * x3.dim(2))
    throw ShapeError("apply_mask: " + std::to_string(w.size()) + " weights for input " + grad::shape_string(x.shape()));
  Tensor<T> wt({x3.dim(0), x3.dim(2)}, std::vector<T>(w.begin(), w.end()));
  grad::NoGradGuard guard;
  auto out = grad::mask_blend(x3, Var<T>::leaf(std::move(wt)), xi).value();
  return single ? out.reshaped(x.shape()) : out;
}

namespace {

template <typename T>
struct Evaluated {
  Var<T> total;
  std::vector<MaskTerms> terms;
};

// Builds sum_b [p_b + l1_b + tv_b] for w [B, L] and the per-row terms.
template <typename T>
Evaluated<T> build_objective(const models::Classifier<T>& model, const Tensor<T>& x, const Var<T>& w,
                             std::span<const int> target, const MaskConfig& cfg) {
  auto masked = grad::mask_blend(x, w, static_cast<T>(cfg.xi));
  auto probs = grad::softmax(model.forward(masked, false, nullptr, false).logits);
  auto picked = grad::pick(probs, target);
  auto total = grad::add(grad::add(grad::sum(picked), grad::scale(grad::abs_sum(w), static_cast<T>(cfg.lambda1))),
                         grad::scale(grad::tv_pow(w, static_cast<T>(cfg.p)), static_cast<T>(cfg.lambda2)));

  const std::size_t batch = w.shape()[0], len = w.shape()[1];
  Evaluated<T> e{total, std::vector<MaskTerms>(batch)};
  for (std::size_t b = 0; b < batch; ++b) {
    auto& t = e.terms[b];
    const T* row = w.value().ptr() + b * len;
    double l1 = 0.0, tv = 0.0;
    for (std::size_t i = 0; i < len; ++i) l1 += std::abs(static_cast<double>(row[i]));
    for (std::size_t i = 0; i + 1 < len; ++i)
      tv += std::pow(std::abs(static_cast<double>(row[i + 1]) - static_cast<double>(row[i])), cfg.p);
    t.prob = static_cast<double>(picked.value()[b]);
    t.l1 = cfg.lambda1 * l1;
    t.tv = cfg.lambda2 * tv;
    t.objective = t.prob + t.l1 + t.tv;
  }
  return e;
}

template <typename T>
std::vector<int> predicted(const models::Classifier<T>& model, const Tensor<T>& x, std::vector<double>* probs) {
  const auto preds = models::predict(model, x);
  std::vector<int> out;
  for (const auto& p : preds) {
    out.push_back(p.j_star);
    if (probs) probs->push_back(p.probs[static_cast<std::size_t>(p.j_star)]);
  }
  return out;
}

}  // namespace

template <typename T>
MaskTerms mask_objective(const models::Classifier<T>& model, const Tensor<T>& x, std::span<const T> w, int target,
                         const MaskConfig& cfg, std::vector<T>* grad_out) {
  if (x.rank() != 3 || x.dim(0) != 1 || w.size() != x.dim(2))
    throw ShapeError("mask_objective: need x [1,2,L] and L weights");
  auto wv = Var<T>::leaf(Tensor<T>({1, w.size()}, std::vector<T>(w.begin(), w.end())), grad_out != nullptr);
  const int tgt[1] = {target};
  auto e = build_objective(model, x, wv, tgt, cfg);
  if (grad_out) {
    grad::backward(e.total);
    grad_out->assign(wv.grad().vec().begin(), wv.grad().vec().end());
  }
  return e.terms.front();
}

std::string MaskTrace::to_csv() const {
  std::string out = "iteration,objective,prob,l1,tv\n";
  for (const auto& e : entries)
    out += std::to_string(e.iteration) + "," + format_double(e.terms.objective) + "," + format_double(e.terms.prob) +
           "," + format_double(e.terms.l1) + "," + format_double(e.terms.tv) + "\n";
  return out;
}

template <typename T>
std::vector<MaskResult> optimize_mask(const models::Classifier<T>& model, const Tensor<T>& input,
                                      const MaskConfig& cfg) {
  cfg.validate();
  const FlushDenormals ftz;
  if (input.rank() != 3) throw ShapeError("optimize_mask: input must be [B,2,L]");
  const std::size_t batch = input.dim(0), len = input.dim(2);

  std::vector<MaskResult> out(batch);
  std::vector<double> p0;
  const auto target = predicted(model, input, &p0);

  auto w = Var<T>::leaf(Tensor<T>({batch, len}, static_cast<T>(cfg.init)), true);
  std::vector<Tensor<T>> best_w(batch);
  grad::AdamSlot<T> slot;
  const grad::AdamConfig adam{.lr = cfg.step};

  for (std::size_t it = 0; it <= cfg.iterations; ++it) {
    const bool last = it == cfg.iterations;
    Evaluated<T> e;
    if (last) {
      grad::NoGradGuard guard;
      e = build_objective(model, input, w, target, cfg);
    } else {
      e = build_objective(model, input, w, target, cfg);
    }
    for (std::size_t b = 0; b < batch; ++b) {
      auto& trace = out[b].trace;
      if (!std::isfinite(e.terms[b].objective))
        throw DivergenceError("mask objective became non-finite at iteration " + std::to_string(it));
      trace.entries.push_back({it, e.terms[b]});
      if (it == 0 || e.terms[b].objective < trace.entries[trace.best].terms.objective) {
        trace.best = it;
        best_w[b] = Tensor<T>({len}, std::vector<T>(w.value().ptr() + b * len, w.value().ptr() + (b + 1) * len));
      }
    }
    if (last) break;

    w.zero_grad();
    grad::backward(e.total);
    try {
      grad::adam_step<T>(w.mutable_value().span(), w.grad().span(), slot, static_cast<long>(it + 1), adam, "mask");
    } catch (const DivergenceError&) {
      throw DivergenceError("mask gradient became non-finite at iteration " + std::to_string(it));
    }
    for (auto& v : w.mutable_value().vec()) v = std::clamp(v, T(0), T(1));
  }

  for (std::size_t b = 0; b < batch; ++b) {
    auto& r = out[b];
    r.unmasked_prob = p0[b];
    r.cav.method = "mask";
    r.cav.target_class = target[b];
    r.cav.pre_resize_length = len;
    r.cav.w.assign(best_w[b].vec().begin(), best_w[b].vec().end());
  }
  return out;
}

double input_channel_mean(const signal::Dataset& ds, signal::Split split, models::InputFormat fmt) {
  const auto idx = ds.indices(split);
  if (idx.empty()) throw InvalidArgument("input_channel_mean: split is empty");
  double total = 0.0;
  std::size_t n = 0;
  for (auto i : idx) {
    const auto x = models::make_input<double>(ds.samples[i], fmt);
    for (double v : x.vec()) total += v;
    n += x.size();
  }
  return total / static_cast<double>(n);
}

#define MODVIZ_INSTANTIATE_MASK(T)                                                                              \
  template Tensor<T> apply_mask<T>(const Tensor<T>&, std::span<const T>, T);                                   \
  template MaskTerms mask_objective<T>(const models::Classifier<T>&, const Tensor<T>&, std::span<const T>, int, \
                                       const MaskConfig&, std::vector<T>*);                                    \
  template std::vector<MaskResult> optimize_mask<T>(const models::Classifier<T>&, const Tensor<T>&,            \
                                                    const MaskConfig&);

MODVIZ_INSTANTIATE_MASK(float)
MODVIZ_INSTANTIATE_MASK(double)

}  // namespace modviz::explain
