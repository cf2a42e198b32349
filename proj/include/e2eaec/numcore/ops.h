#pragma once

#include <cstddef>
#include <optional>

#include "e2eaec/numcore/graph.h"

// Differentiable operations. Every op records its backward rule on the graph
// of its first argument; all operands must live on the same graph.
//
// Layout conventions used across the project:
//   * linear weights are [in, out] (row-major), biases [out]
//   * GRU gate blocks are packed as [reset | update | candidate]
namespace e2eaec::numcore {

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> scale(const Var<T>& a, T factor);

template <typename T>
Var<T> sigmoid(const Var<T>& x);
template <typename T>
Var<T> tanh(const Var<T>& x);

// out[..., o] = sum_i x[..., i] * weight[i, o] + bias[o]
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias);
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight);

// Max-subtracted softmax over the trailing axis.
template <typename T>
Var<T> softmax(const Var<T>& x);

// Sliding windows along `axis`. Everything after `axis` is treated as one
// feature vector of length F; the output replaces [L, ...] with
// [L', kernel * F], window element j occupying columns [j*F, (j+1)*F).
// `pad` zeros are prepended (causal padding); the default kernel-1 keeps
// L' == L at stride 1.
template <typename T>
Var<T> unfold(const Var<T>& x, std::size_t kernel, std::size_t stride,
              std::size_t axis, std::optional<std::size_t> pad = std::nullopt);

// [A, B, ...] -> [B, A, ...]
template <typename T>
Var<T> transpose01(const Var<T>& x);

template <typename T>
Var<T> concat(const Var<T>& a, const Var<T>& b, std::size_t axis);

// Half-open range [begin, end) along `axis`.
template <typename T>
Var<T> slice(const Var<T>& x, std::size_t axis, std::size_t begin,
             std::size_t end);

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape);

// Mean over one axis; the axis is removed.
template <typename T>
Var<T> mean_axis(const Var<T>& x, std::size_t axis);

template <typename T>
Var<T> sum_all(const Var<T>& x);
template <typename T>
Var<T> mean_all(const Var<T>& x);

// One GRU update for a batch of rows: x [B, I], h [B, N].
//   r  = sigmoid(x W_ir + b_ir + h W_hr + b_hr)
//   z  = sigmoid(x W_iz + b_iz + h W_hz + b_hz)
//   n  = tanh(x W_in + b_in + r * (h W_hn + b_hn))
//   h' = (1 - z) * n + z * h
// w_ih is [I, 3N], w_hh [N, 3N], b_ih and b_hh [3N].
template <typename T>
Var<T> gru_step(const Var<T>& x, const Var<T>& h, const Var<T>& w_ih,
                const Var<T>& w_hh, const Var<T>& b_ih, const Var<T>& b_hh);

// Runs gru_step over S steps for B independent sequences: x [B, S, I],
// h0 [B, N] -> hidden states [B, S, N].
template <typename T>
Var<T> gru_scan(const Var<T>& x, const Var<T>& h0, const Var<T>& w_ih,
                const Var<T>& w_hh, const Var<T>& b_ih, const Var<T>& b_hh);

// Dot-product correlation between query frames and lagged key frames.
// query [T, F, C], keys [P + T, F, C] where the first P key frames are
// history preceding query frame 0:
//   out[t, d, c] = sum_f query[t, f, c] * keys[P + t - d, f, c]
// with zero contribution when P + t - d < 0. Output [T, max_lag, C].
template <typename T>
Var<T> lagged_correlation(const Var<T>& query, const Var<T>& keys,
                          std::size_t max_lag);

// Mixes lagged key frames with per-frame weights (same indexing as above):
//   out[t, f, c] = sum_d weights[t, d] * keys[P + t - d, f, c]
template <typename T>
Var<T> lagged_mix(const Var<T>& weights, const Var<T>& keys);

// out[t] = sum_d probs[t, d] * d for probs [T, D].
template <typename T>
Var<T> expected_index(const Var<T>& probs);

}  // namespace e2eaec::numcore
