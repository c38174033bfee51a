#pragma once

#include <span>

#include "modviz/common/rng.hpp"
#include "modviz/grad/graph.hpp"

namespace modviz::grad {

enum class Padding { Same, Valid };

// Elementwise and reductions. Binary ops require identical shapes.
template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> scale(const Var<T>& a, T factor);
/// Sum of all elements, shape {1}.
template <typename T> Var<T> sum(const Var<T>& a);
template <typename T> Var<T> reshape(const Var<T>& a, Shape shape);
template <typename T> Var<T> relu(const Var<T>& x);

/// Inverted dropout: kept units are scaled by 1/(1-rate) while training;
/// with train=false the input node itself is returned.
template <typename T> Var<T> dropout(const Var<T>& x, double rate, bool train, Rng& rng);

/// x [B, Din] times w [Din, Dout] plus b [Dout] (b may be an empty Var).
template <typename T> Var<T> dense(const Var<T>& x, const Var<T>& w, const Var<T>& b);

/// Cross-correlation (no kernel flip), stride 1.
/// x [B, Cin, L] or [Cin, L]; w [Cout, Cin, K]; b [Cout] or empty.
/// Same padding puts (K-1)/2 zeros on the left and the rest on the right.
template <typename T> Var<T> conv1d(const Var<T>& x, const Var<T>& w, const Var<T>& b, Padding pad = Padding::Same);

/// x [B, C, L] -> [B, C, (L - width) / stride + 1]; ties route to the first max.
template <typename T> Var<T> maxpool1d(const Var<T>& x, std::size_t width, std::size_t stride);

/// [B, C, L] -> [B, L, C].
template <typename T> Var<T> transpose_channels(const Var<T>& x);

/// Single LSTM layer over x [B, steps, D] with gate order (input, forget,
/// candidate, output): wx [D, 4H], wh [H, 4H], b [4H]. h_0 = c_0 = 0.
/// Returns the full hidden sequence [B, steps, H].
template <typename T> Var<T> lstm(const Var<T>& x, const Var<T>& wx, const Var<T>& wh, const Var<T>& b);

/// [B, steps, H] -> [B, H] at the final step.
template <typename T> Var<T> last_step(const Var<T>& h);

/// Row-wise softmax of [B, N].
template <typename T> Var<T> softmax(const Var<T>& logits);

/// Mean over the batch of -log softmax(logits)[label]; shape {1}.
template <typename T> Var<T> softmax_xent(const Var<T>& logits, std::span<const int> labels);

/// out[b] = x[b, index[b]] for x [B, N].
template <typename T> Var<T> pick(const Var<T>& x, std::span<const int> index);

/// (1 - w) * x + xi * w with w [B, L] broadcast over the channels of x [B, C, L].
template <typename T> Var<T> mask_blend(const Tensor<T>& x, const Var<T>& w, T xi);

/// Sum of |w|, shape {1}.
template <typename T> Var<T> abs_sum(const Var<T>& w);

/// Sum over rows of w [B, L] of |w[i+1] - w[i]|^p, shape {1}.
template <typename T> Var<T> tv_pow(const Var<T>& w, T p);

}  // namespace modviz::grad
