#include "modviz/grad/ops.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <memory>

namespace modviz::grad {

namespace {

template <typename T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Map = Eigen::Map<MatR<T>>;
template <typename T>
using CMap = Eigen::Map<const MatR<T>>;

/// Gradient buffer of parent i, or nullptr when it needs none.
template <typename T>
Tensor<T>* parent_grad(Node<T>& n, std::size_t i) {
  auto& p = n.parents[i];
  return (p && p->requires_grad) ? &p->grad_buffer() : nullptr;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

template <typename T>
void require_same(const Var<T>& a, const Var<T>& b, const char* op) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                                      shape_string(b.shape()));
}

}  // namespace

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same(a, b, "add");
  Tensor<T> out = a.value();
  const T* pb = b.value().ptr();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += pb[i];
  return make_result<T>(std::move(out), {a, b}, "add", [](Node<T>& n) {
    for (std::size_t k = 0; k < 2; ++k)
      if (auto* g = parent_grad(n, k))
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += n.grad[i];
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same(a, b, "mul");
  Tensor<T> out = a.value();
  const T* pb = b.value().ptr();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= pb[i];
  return make_result<T>(std::move(out), {a, b}, "mul", [](Node<T>& n) {
    const auto& va = n.parents[0]->value;
    const auto& vb = n.parents[1]->value;
    if (auto* g = parent_grad(n, 0))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += n.grad[i] * vb[i];
    if (auto* g = parent_grad(n, 1))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += n.grad[i] * va[i];
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T factor) {
  Tensor<T> out = a.value();
  for (auto& v : out.vec()) v *= factor;
  return make_result<T>(std::move(out), {a}, "scale", [factor](Node<T>& n) {
    if (auto* g = parent_grad(n, 0))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += n.grad[i] * factor;
  });
}

template <typename T>
Var<T> sum(const Var<T>& a) {
  T total = T(0);
  for (T v : a.value().vec()) total += v;
  return make_result<T>(Tensor<T>({1}, total), {a}, "sum", [](Node<T>& n) {
    if (auto* g = parent_grad(n, 0))
      for (auto& v : g->vec()) v += n.grad[0];
  });
}

template <typename T>
Var<T> reshape(const Var<T>& a, Shape shape) {
  return make_result<T>(a.value().reshaped(std::move(shape)), {a}, "reshape", [](Node<T>& n) {
    if (auto* g = parent_grad(n, 0))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += n.grad[i];
  });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  Tensor<T> out = x.value();
  for (auto& v : out.vec()) v = v > T(0) ? v : T(0);
  return make_result<T>(std::move(out), {x}, "relu", [](Node<T>& n) {
    if (auto* g = parent_grad(n, 0)) {
      const auto& in = n.parents[0]->value;
      for (std::size_t i = 0; i < g->size(); ++i)
        if (in[i] > T(0)) (*g)[i] += n.grad[i];
    }
  });
}

template <typename T>
Var<T> dropout(const Var<T>& x, double rate, bool train, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw InvalidArgument("dropout rate must be in [0, 1)");
  if (!train || rate == 0.0) return x;
  auto keep = std::make_shared<std::vector<T>>(x.size());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const T kept = static_cast<T>(1.0 / (1.0 - rate));
  for (auto& k : *keep) k = u(rng) < rate ? T(0) : kept;
  Tensor<T> out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= (*keep)[i];
  return make_result<T>(std::move(out), {x}, "dropout", [keep](Node<T>& n) {
    if (auto* g = parent_grad(n, 0))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += n.grad[i] * (*keep)[i];
  });
}

template <typename T>
Var<T> dense(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  require(x.value().rank() == 2 && w.value().rank() == 2 && x.shape()[1] == w.shape()[0],
          "dense: cannot multiply " + shape_string(x.shape()) + " by " + shape_string(w.shape()));
  const std::size_t batch = x.shape()[0], din = w.shape()[0], dout = w.shape()[1];
  if (b.valid()) require(b.size() == dout, "dense: bias length does not match output width");
  Tensor<T> out({batch, dout});
  Map<T> y(out.ptr(), batch, dout);
  y.noalias() = CMap<T>(x.value().ptr(), batch, din) * CMap<T>(w.value().ptr(), din, dout);
  if (b.valid()) y.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(b.value().ptr(), dout);
  return make_result<T>(std::move(out), {x, w, b}, "dense", [batch, din, dout](Node<T>& n) {
    CMap<T> dy(n.grad.ptr(), batch, dout);
    if (auto* gx = parent_grad(n, 0))
      Map<T>(gx->ptr(), batch, din).noalias() += dy * CMap<T>(n.parents[1]->value.ptr(), din, dout).transpose();
    if (auto* gw = parent_grad(n, 1))
      Map<T>(gw->ptr(), din, dout).noalias() += CMap<T>(n.parents[0]->value.ptr(), batch, din).transpose() * dy;
    if (auto* gb = parent_grad(n, 2))
      Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(gb->ptr(), dout) += dy.colwise().sum();
  });
}

template <typename T>
Var<T> conv1d(const Var<T>& x, const Var<T>& w, const Var<T>& b, Padding pad) {
  const bool unbatched = x.value().rank() == 2;
  require(unbatched || x.value().rank() == 3, "conv1d: input must be [B,C,L] or [C,L]");
  require(w.value().rank() == 3, "conv1d: kernels must be [Cout,Cin,K]");
  const std::size_t batch = unbatched ? 1 : x.shape()[0];
  const std::size_t cin = x.shape()[unbatched ? 0 : 1];
  const std::size_t len = x.shape()[unbatched ? 1 : 2];
  const std::size_t cout = w.shape()[0], k = w.shape()[2];
  require(w.shape()[1] == cin, "conv1d: kernel expects " + std::to_string(w.shape()[1]) + " input channels, got " +
                                   std::to_string(cin));
  const std::size_t pad_left = pad == Padding::Same ? (k - 1) / 2 : 0;
  const std::size_t pad_total = pad == Padding::Same ? k - 1 : 0;
  require(k >= 1 && k <= len + pad_total, "conv1d: kernel wider than padded input");
  if (b.valid()) require(b.size() == cout, "conv1d: bias length does not match output channels");
  const std::size_t lout = len + pad_total - k + 1;
  const std::size_t ck = cin * k, cols = batch * lout;

  // im2col: row (c*K + j), column (b*Lout + l) holds x[b, c, l + j - pad_left].
  auto col = std::make_shared<MatR<T>>(MatR<T>::Zero(ck, cols));
  const T* px = x.value().ptr();
  for (std::size_t c = 0; c < cin; ++c) {
    for (std::size_t j = 0; j < k; ++j) {
      T* row = col->data() + (c * k + j) * cols;
      for (std::size_t bi = 0; bi < batch; ++bi) {
        const T* src = px + (bi * cin + c) * len;
        T* dst = row + bi * lout;
        for (std::size_t l = 0; l < lout; ++l) {
          const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(l + j) - static_cast<std::ptrdiff_t>(pad_left);
          if (s >= 0 && s < static_cast<std::ptrdiff_t>(len)) dst[l] = src[s];
        }
      }
    }
  }
  MatR<T> prod = CMap<T>(w.value().ptr(), cout, ck) * (*col);
  Shape out_shape = unbatched ? Shape{cout, lout} : Shape{batch, cout, lout};
  Tensor<T> out(out_shape);
  for (std::size_t bi = 0; bi < batch; ++bi)
    for (std::size_t o = 0; o < cout; ++o) {
      const T bias = b.valid() ? b.value()[o] : T(0);
      const T* src = prod.data() + o * cols + bi * lout;
      T* dst = out.ptr() + (bi * cout + o) * lout;
      for (std::size_t l = 0; l < lout; ++l) dst[l] = src[l] + bias;
    }

  return make_result<T>(std::move(out), {x, w, b}, "conv1d",
                        [col, batch, cin, len, cout, k, lout, ck, cols, pad_left](Node<T>& n) {
    MatR<T> dy(cout, cols);
    for (std::size_t bi = 0; bi < batch; ++bi)
      for (std::size_t o = 0; o < cout; ++o)
        std::copy_n(n.grad.ptr() + (bi * cout + o) * lout, lout, dy.data() + o * cols + bi * lout);
    if (auto* gw = parent_grad(n, 1)) Map<T>(gw->ptr(), cout, ck).noalias() += dy * col->transpose();
    if (auto* gb = parent_grad(n, 2))
      Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>(gb->ptr(), cout) += dy.rowwise().sum();
    if (auto* gx = parent_grad(n, 0)) {
      MatR<T> dcol = CMap<T>(n.parents[1]->value.ptr(), cout, ck).transpose() * dy;
      T* pg = gx->ptr();
      for (std::size_t c = 0; c < cin; ++c)
        for (std::size_t j = 0; j < k; ++j) {
          const T* row = dcol.data() + (c * k + j) * cols;
          for (std::size_t bi = 0; bi < batch; ++bi) {
            T* dst = pg + (bi * cin + c) * len;
            const T* src = row + bi * lout;
            for (std::size_t l = 0; l < lout; ++l) {
              const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(l + j) - static_cast<std::ptrdiff_t>(pad_left);
              if (s >= 0 && s < static_cast<std::ptrdiff_t>(len)) dst[s] += src[l];
            }
          }
        }
    }
  });
}

template <typename T>
Var<T> maxpool1d(const Var<T>& x, std::size_t width, std::size_t stride) {
  require(x.value().rank() == 3, "maxpool1d: input must be [B,C,L]");
  require(width >= 1 && stride >= 1 && width <= x.shape()[2], "maxpool1d: bad window");
  const std::size_t rows = x.shape()[0] * x.shape()[1], len = x.shape()[2];
  const std::size_t lout = (len - width) / stride + 1;
  auto argmax = std::make_shared<std::vector<std::size_t>>(rows * lout);
  Tensor<T> out({x.shape()[0], x.shape()[1], lout});
  const T* px = x.value().ptr();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t l = 0; l < lout; ++l) {
      std::size_t best = r * len + l * stride;
      for (std::size_t j = 1; j < width; ++j)
        if (px[r * len + l * stride + j] > px[best]) best = r * len + l * stride + j;
      (*argmax)[r * lout + l] = best;
      out[r * lout + l] = px[best];
    }
  return make_result<T>(std::move(out), {x}, "maxpool1d", [argmax](Node<T>& n) {
    if (auto* g = parent_grad(n, 0))
      for (std::size_t i = 0; i < argmax->size(); ++i) (*g)[(*argmax)[i]] += n.grad[i];
  });
}

template <typename T>
Var<T> transpose_channels(const Var<T>& x) {
  require(x.value().rank() == 3, "transpose_channels: input must be [B,C,L]");
  const std::size_t batch = x.shape()[0], ch = x.shape()[1], len = x.shape()[2];
  Tensor<T> out({batch, len, ch});
  const T* px = x.value().ptr();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < ch; ++c)
      for (std::size_t l = 0; l < len; ++l) out[(b * len + l) * ch + c] = px[(b * ch + c) * len + l];
  return make_result<T>(std::move(out), {x}, "transpose_channels", [batch, ch, len](Node<T>& n) {
    if (auto* g = parent_grad(n, 0))
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t c = 0; c < ch; ++c)
          for (std::size_t l = 0; l < len; ++l) (*g)[(b * ch + c) * len + l] += n.grad[(b * len + l) * ch + c];
  });
}

template <typename T>
Var<T> lstm(const Var<T>& x, const Var<T>& wx, const Var<T>& wh, const Var<T>& b) {
  require(x.value().rank() == 3, "lstm: input must be [B,steps,D]");
  const std::size_t batch = x.shape()[0], steps = x.shape()[1], din = x.shape()[2];
  require(wh.value().rank() == 2 && wh.shape()[1] % 4 == 0 && wh.shape()[0] * 4 == wh.shape()[1],
          "lstm: recurrent weights must be [H,4H]");
  const std::size_t hid = wh.shape()[0], g4 = 4 * hid;
  require(wx.value().rank() == 2 && wx.shape()[0] == din && wx.shape()[1] == g4,
          "lstm: input weights must be [D,4H], got " + shape_string(wx.shape()));
  require(b.valid() && b.size() == g4, "lstm: bias must be [4H]");
  const std::size_t rows = batch * steps;
  const auto B = static_cast<Eigen::Index>(batch), H = static_cast<Eigen::Index>(hid);

  // Internal buffers are time-major (row t * B + b) so each step is a
  // contiguous block. gates holds activated (i, f, g, o).
  auto xt = std::make_shared<MatR<T>>(rows, din);
  for (std::size_t bi = 0; bi < batch; ++bi)
    for (std::size_t t = 0; t < steps; ++t)
      std::copy_n(x.value().ptr() + (bi * steps + t) * din, din, xt->data() + (t * batch + bi) * din);
  auto gates = std::make_shared<MatR<T>>(rows, g4);
  auto hs = std::make_shared<MatR<T>>(rows, hid);
  auto cells = std::make_shared<MatR<T>>(rows, hid);
  auto tanh_c = std::make_shared<MatR<T>>(rows, hid);
  gates->noalias() = (*xt) * CMap<T>(wx.value().ptr(), din, g4);
  gates->rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(b.value().ptr(), g4);

  CMap<T> whm(wh.value().ptr(), hid, g4);
  const T half(0.5);
  for (std::size_t t = 0; t < steps; ++t) {
    const auto r0 = static_cast<Eigen::Index>(t * batch);
    auto z = gates->middleRows(r0, B);
    if (t > 0) z.noalias() += hs->middleRows(r0 - B, B) * whm;
    // sigmoid(z) = (1 + tanh(z / 2)) / 2 keeps every gate on the vectorized tanh path.
    z.leftCols(2 * H).array() = (z.leftCols(2 * H).array() * half).tanh() * half + half;
    z.rightCols(H).array() = (z.rightCols(H).array() * half).tanh() * half + half;
    z.middleCols(2 * H, H).array() = z.middleCols(2 * H, H).array().tanh();
    auto c = cells->middleRows(r0, B);
    if (t > 0)
      c.array() = z.middleCols(H, H).array() * cells->middleRows(r0 - B, B).array() +
                  z.leftCols(H).array() * z.middleCols(2 * H, H).array();
    else
      c.array() = z.leftCols(H).array() * z.middleCols(2 * H, H).array();
    auto tc = tanh_c->middleRows(r0, B);
    tc.array() = c.array().tanh();
    hs->middleRows(r0, B).array() = z.rightCols(H).array() * tc.array();
  }

  Tensor<T> out({batch, steps, hid});
  for (std::size_t bi = 0; bi < batch; ++bi)
    for (std::size_t t = 0; t < steps; ++t)
      std::copy_n(hs->data() + (t * batch + bi) * hid, hid, out.ptr() + (bi * steps + t) * hid);

  return make_result<T>(std::move(out), {x, wx, wh, b}, "lstm",
                        [xt, gates, hs, cells, tanh_c, batch, steps, din, hid, g4, rows, B, H](Node<T>& n) {
    MatR<T> dh_tm(rows, hid);
    for (std::size_t bi = 0; bi < batch; ++bi)
      for (std::size_t t = 0; t < steps; ++t)
        std::copy_n(n.grad.ptr() + (bi * steps + t) * hid, hid, dh_tm.data() + (t * batch + bi) * hid);
    MatR<T> dz(rows, g4);
    MatR<T> dh_next = MatR<T>::Zero(B, H);
    MatR<T> dc_next = MatR<T>::Zero(B, H);
    MatR<T> dh(B, H), dc(B, H);
    CMap<T> whm(n.parents[2]->value.ptr(), hid, g4);
    for (std::size_t t = steps; t-- > 0;) {
      const auto r0 = static_cast<Eigen::Index>(t * batch);
      const auto a = gates->middleRows(r0, B);
      const auto ig = a.leftCols(H).array(), fg = a.middleCols(H, H).array();
      const auto gg = a.middleCols(2 * H, H).array(), og = a.rightCols(H).array();
      const auto tc = tanh_c->middleRows(r0, B).array();
      auto d = dz.middleRows(r0, B);
      dh.array() = dh_tm.middleRows(r0, B).array() + dh_next.array();
      dc.array() = dc_next.array() + dh.array() * og * (T(1) - tc * tc);
      d.leftCols(H).array() = dc.array() * gg * ig * (T(1) - ig);
      if (t > 0)
        d.middleCols(H, H).array() = dc.array() * cells->middleRows(r0 - B, B).array() * fg * (T(1) - fg);
      else
        d.middleCols(H, H).setZero();
      d.middleCols(2 * H, H).array() = dc.array() * ig * (T(1) - gg * gg);
      d.rightCols(H).array() = dh.array() * tc * og * (T(1) - og);
      dc_next.array() = dc.array() * fg;
      if (t > 0) dh_next.noalias() = d * whm.transpose();
    }
    if (auto* gwh = parent_grad(n, 2); gwh && steps > 1) {
      // h_{t-1} pairs with the gate gradient of step t.
      const auto shifted = static_cast<Eigen::Index>((steps - 1) * batch);
      Map<T>(gwh->ptr(), hid, g4).noalias() += hs->topRows(shifted).transpose() * dz.bottomRows(shifted);
    }
    if (auto* gwx = parent_grad(n, 1)) Map<T>(gwx->ptr(), din, g4).noalias() += xt->transpose() * dz;
    if (auto* gb = parent_grad(n, 3)) Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(gb->ptr(), g4) += dz.colwise().sum();
    if (auto* gx = parent_grad(n, 0)) {
      MatR<T> dx = dz * CMap<T>(n.parents[1]->value.ptr(), din, g4).transpose();
      for (std::size_t bi = 0; bi < batch; ++bi)
        for (std::size_t t = 0; t < steps; ++t) {
          const T* src = dx.data() + (t * batch + bi) * din;
          T* dst = gx->ptr() + (bi * steps + t) * din;
          for (std::size_t k = 0; k < din; ++k) dst[k] += src[k];
        }
    }
  });
}

template <typename T>
Var<T> last_step(const Var<T>& h) {
  require(h.value().rank() == 3, "last_step: input must be [B,steps,H]");
  const std::size_t batch = h.shape()[0], steps = h.shape()[1], hid = h.shape()[2];
  Tensor<T> out({batch, hid});
  for (std::size_t b = 0; b < batch; ++b)
    std::copy_n(h.value().ptr() + (b * steps + steps - 1) * hid, hid, out.ptr() + b * hid);
  return make_result<T>(std::move(out), {h}, "last_step", [batch, steps, hid](Node<T>& n) {
    if (auto* g = parent_grad(n, 0))
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t j = 0; j < hid; ++j) (*g)[(b * steps + steps - 1) * hid + j] += n.grad[b * hid + j];
  });
}

namespace {
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& logits) {
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  Tensor<T> p(logits.shape());
  for (std::size_t b = 0; b < batch; ++b) {
    const T* z = logits.ptr() + b * classes;
    T* pr = p.ptr() + b * classes;
    T zmax = *std::max_element(z, z + classes);
    T total = T(0);
    for (std::size_t j = 0; j < classes; ++j) total += (pr[j] = std::exp(z[j] - zmax));
    for (std::size_t j = 0; j < classes; ++j) pr[j] /= total;
  }
  return p;
}
}  // namespace

template <typename T>
Var<T> softmax(const Var<T>& logits) {
  require(logits.value().rank() == 2, "softmax: logits must be [B,N]");
  const std::size_t batch = logits.shape()[0], classes = logits.shape()[1];
  return make_result<T>(softmax_rows(logits.value()), {logits}, "softmax", [batch, classes](Node<T>& n) {
    if (auto* g = parent_grad(n, 0))
      for (std::size_t b = 0; b < batch; ++b) {
        const T* p = n.value.ptr() + b * classes;
        const T* dp = n.grad.ptr() + b * classes;
        T dot = T(0);
        for (std::size_t j = 0; j < classes; ++j) dot += dp[j] * p[j];
        for (std::size_t j = 0; j < classes; ++j) (*g)[b * classes + j] += p[j] * (dp[j] - dot);
      }
  });
}

template <typename T>
Var<T> softmax_xent(const Var<T>& logits, std::span<const int> labels) {
  require(logits.value().rank() == 2, "softmax_xent: logits must be [B,N]");
  const std::size_t batch = logits.shape()[0], classes = logits.shape()[1];
  require(labels.size() == batch, "softmax_xent: one label per row required");
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= classes)
      throw InvalidArgument("softmax_xent: label " + std::to_string(y) + " out of range");
  auto probs = std::make_shared<Tensor<T>>(softmax_rows(logits.value()));
  std::vector<int> lab(labels.begin(), labels.end());
  T loss = T(0);
  for (std::size_t b = 0; b < batch; ++b) {
    const T* z = logits.value().ptr() + b * classes;
    T zmax = *std::max_element(z, z + classes);
    T total = T(0);
    for (std::size_t j = 0; j < classes; ++j) total += std::exp(z[j] - zmax);
    loss += zmax + std::log(total) - z[lab[b]];
  }
  loss /= static_cast<T>(batch);
  return make_result<T>(Tensor<T>({1}, loss), {logits}, "softmax_xent",
                        [probs, lab = std::move(lab), batch, classes](Node<T>& n) {
    if (auto* g = parent_grad(n, 0)) {
      const T s = n.grad[0] / static_cast<T>(batch);
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t j = 0; j < classes; ++j) {
          T d = (*probs)[b * classes + j] - (static_cast<int>(j) == lab[b] ? T(1) : T(0));
          (*g)[b * classes + j] += s * d;
        }
    }
  });
}

template <typename T>
Var<T> pick(const Var<T>& x, std::span<const int> index) {
  require(x.value().rank() == 2 && index.size() == x.shape()[0], "pick: need [B,N] and B indices");
  const std::size_t batch = x.shape()[0], classes = x.shape()[1];
  for (int j : index)
    if (j < 0 || static_cast<std::size_t>(j) >= classes) throw InvalidArgument("pick: index out of range");
  std::vector<int> idx(index.begin(), index.end());
  Tensor<T> out({batch});
  for (std::size_t b = 0; b < batch; ++b) out[b] = x.value()[b * classes + idx[b]];
  return make_result<T>(std::move(out), {x}, "pick", [idx = std::move(idx), classes](Node<T>& n) {
    if (auto* g = parent_grad(n, 0))
      for (std::size_t b = 0; b < idx.size(); ++b) (*g)[b * classes + idx[b]] += n.grad[b];
  });
}

template <typename T>
Var<T> mask_blend(const Tensor<T>& x, const Var<T>& w, T xi) {
  require(x.rank() == 3 && w.value().rank() == 2 && w.shape()[0] == x.dim(0) && w.shape()[1] == x.dim(2),
          "mask_blend: need x [B,C,L] and w [B,L], got " + shape_string(x.shape()) + " and " +
              shape_string(w.shape()));
  const std::size_t batch = x.dim(0), ch = x.dim(1), len = x.dim(2);
  auto xs = std::make_shared<Tensor<T>>(x);
  Tensor<T> out(x.shape());
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < ch; ++c)
      for (std::size_t l = 0; l < len; ++l) {
        const T wi = w.value()[b * len + l];
        const std::size_t i = (b * ch + c) * len + l;
        out[i] = (T(1) - wi) * x[i] + xi * wi;
      }
  return make_result<T>(std::move(out), {w}, "mask_blend", [xs, xi, batch, ch, len](Node<T>& n) {
    if (auto* g = parent_grad(n, 0))
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t c = 0; c < ch; ++c)
          for (std::size_t l = 0; l < len; ++l) {
            const std::size_t i = (b * ch + c) * len + l;
            (*g)[b * len + l] += n.grad[i] * (xi - (*xs)[i]);
          }
  });
}

template <typename T>
Var<T> abs_sum(const Var<T>& w) {
  T total = T(0);
  for (T v : w.value().vec()) total += std::abs(v);
  return make_result<T>(Tensor<T>({1}, total), {w}, "abs_sum", [](Node<T>& n) {
    if (auto* g = parent_grad(n, 0)) {
      const auto& v = n.parents[0]->value;
      for (std::size_t i = 0; i < g->size(); ++i)
        (*g)[i] += n.grad[0] * (v[i] > T(0) ? T(1) : (v[i] < T(0) ? T(-1) : T(0)));
    }
  });
}

template <typename T>
Var<T> tv_pow(const Var<T>& w, T p) {
  require(w.value().rank() == 2, "tv_pow: w must be [B,L]");
  if (!(p >= T(1))) throw InvalidArgument("tv_pow: norm order must be >= 1");
  const std::size_t batch = w.shape()[0], len = w.shape()[1];
  T total = T(0);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t i = 0; i + 1 < len; ++i)
      total += std::pow(std::abs(w.value()[b * len + i + 1] - w.value()[b * len + i]), p);
  return make_result<T>(Tensor<T>({1}, total), {w}, "tv_pow", [p, batch, len](Node<T>& n) {
    if (auto* g = parent_grad(n, 0)) {
      const auto& v = n.parents[0]->value;
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i + 1 < len; ++i) {
          const T d = v[b * len + i + 1] - v[b * len + i];
          if (d == T(0)) continue;
          const T gd = n.grad[0] * p * std::pow(std::abs(d), p - T(1)) * (d > T(0) ? T(1) : T(-1));
          (*g)[b * len + i + 1] += gd;
          (*g)[b * len + i] -= gd;
        }
    }
  });
}

#define MODVIZ_INSTANTIATE_OPS(T)                                                               \
  template Var<T> add(const Var<T>&, const Var<T>&);                                            \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                            \
  template Var<T> scale(const Var<T>&, T);                                                      \
  template Var<T> sum(const Var<T>&);                                                           \
  template Var<T> reshape(const Var<T>&, Shape);                                                \
  template Var<T> relu(const Var<T>&);                                                          \
  template Var<T> dropout(const Var<T>&, double, bool, Rng&);                                   \
  template Var<T> dense(const Var<T>&, const Var<T>&, const Var<T>&);                           \
  template Var<T> conv1d(const Var<T>&, const Var<T>&, const Var<T>&, Padding);                 \
  template Var<T> maxpool1d(const Var<T>&, std::size_t, std::size_t);                           \
  template Var<T> transpose_channels(const Var<T>&);                                            \
  template Var<T> lstm(const Var<T>&, const Var<T>&, const Var<T>&, const Var<T>&);             \
  template Var<T> last_step(const Var<T>&);                                                     \
  template Var<T> softmax(const Var<T>&);                                                       \
  template Var<T> softmax_xent(const Var<T>&, std::span<const int>);                            \
  template Var<T> pick(const Var<T>&, std::span<const int>);                                    \
  template Var<T> mask_blend(const Tensor<T>&, const Var<T>&, T);                               \
  template Var<T> abs_sum(const Var<T>&);                                                       \
  template Var<T> tv_pow(const Var<T>&, T);

MODVIZ_INSTANTIATE_OPS(float)
MODVIZ_INSTANTIATE_OPS(double)

}  // namespace modviz::grad
