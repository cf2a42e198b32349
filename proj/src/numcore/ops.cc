#include "e2eaec/numcore/ops.h"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "kernels.h"

namespace e2eaec::numcore {

namespace {

template <typename T>
Graph<T>& same_graph(const Var<T>& a, const Var<T>& b) {
  if (&a.graph() != &b.graph()) {
    throw ContractError("operands recorded on different graphs");
  }
  return a.graph();
}

template <typename T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  }
}

std::size_t prod(const Shape& s, std::size_t begin, std::size_t end) {
  std::size_t p = 1;
  for (std::size_t i = begin; i < end; ++i) p *= s[i];
  return p;
}

template <typename T>
T sigmoid_scalar(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

}  // namespace

std::size_t numel(const Shape& shape) {
  return prod(shape, 0, shape.size());
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  Graph<T>& g = same_graph(a, b);
  require_same_shape(a, b, "add");
  Tensor<T> out = a.value();
  const Tensor<T>& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  int ia = a.id(), ib = b.id();
  return g.record(std::move(out), {ia, ib},
                  [ia, ib](Graph<T>& g, const Tensor<T>& go) {
                    for (int id : {ia, ib}) {
                      if (!g.requires_grad(id)) continue;
                      Tensor<T>& gx = g.grad_buffer(id);
                      for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
                    }
                  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  Graph<T>& g = same_graph(a, b);
  require_same_shape(a, b, "sub");
  Tensor<T> out = a.value();
  const Tensor<T>& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  int ia = a.id(), ib = b.id();
  return g.record(std::move(out), {ia, ib},
                  [ia, ib](Graph<T>& g, const Tensor<T>& go) {
                    if (g.requires_grad(ia)) {
                      Tensor<T>& gx = g.grad_buffer(ia);
                      for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
                    }
                    if (g.requires_grad(ib)) {
                      Tensor<T>& gx = g.grad_buffer(ib);
                      for (std::size_t i = 0; i < go.size(); ++i) gx[i] -= go[i];
                    }
                  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  Graph<T>& g = same_graph(a, b);
  require_same_shape(a, b, "mul");
  Tensor<T> out = a.value();
  const Tensor<T>& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  int ia = a.id(), ib = b.id();
  return g.record(std::move(out), {ia, ib},
                  [ia, ib](Graph<T>& g, const Tensor<T>& go) {
                    const Tensor<T>& av = g.value(ia);
                    const Tensor<T>& bv = g.value(ib);
                    if (g.requires_grad(ia)) {
                      Tensor<T>& gx = g.grad_buffer(ia);
                      for (std::size_t i = 0; i < go.size(); ++i)
                        gx[i] += go[i] * bv[i];
                    }
                    if (g.requires_grad(ib)) {
                      Tensor<T>& gx = g.grad_buffer(ib);
                      for (std::size_t i = 0; i < go.size(); ++i)
                        gx[i] += go[i] * av[i];
                    }
                  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T factor) {
  Tensor<T> out = a.value();
  for (auto& v : out.values()) v *= factor;
  int ia = a.id();
  return a.graph().record(std::move(out), {ia},
                          [ia, factor](Graph<T>& g, const Tensor<T>& go) {
                            Tensor<T>& gx = g.grad_buffer(ia);
                            for (std::size_t i = 0; i < go.size(); ++i)
                              gx[i] += go[i] * factor;
                          });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  Graph<T>& g = x.graph();
  Tensor<T> out = x.value();
  for (auto& v : out.values()) v = sigmoid_scalar(v);
  int ix = x.id();
  int iy = static_cast<int>(g.size());
  return g.record(std::move(out), {ix},
                  [ix, iy](Graph<T>& g, const Tensor<T>& go) {
                    const Tensor<T>& yv = g.value(iy);
                    Tensor<T>& gx = g.grad_buffer(ix);
                    for (std::size_t i = 0; i < go.size(); ++i)
                      gx[i] += go[i] * yv[i] * (T(1) - yv[i]);
                  });
}

template <typename T>
Var<T> tanh(const Var<T>& x) {
  Graph<T>& g = x.graph();
  Tensor<T> out = x.value();
  for (auto& v : out.values()) v = std::tanh(v);
  int ix = x.id();
  int iy = static_cast<int>(g.size());
  return g.record(std::move(out), {ix},
                  [ix, iy](Graph<T>& g, const Tensor<T>& go) {
                    const Tensor<T>& yv = g.value(iy);
                    Tensor<T>& gx = g.grad_buffer(ix);
                    for (std::size_t i = 0; i < go.size(); ++i)
                      gx[i] += go[i] * (T(1) - yv[i] * yv[i]);
                  });
}

template <typename T>
Var<T> linear_impl(const Var<T>& x, const Var<T>& weight,
                   const std::optional<Var<T>>& bias) {
  Graph<T>& g = same_graph(x, weight);
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  if (ws.size() != 2 || xs.empty() || xs.back() != ws[0]) {
    throw DimensionError("linear: input " + shape_str(xs) + " vs weight " +
                         shape_str(ws));
  }
  const std::size_t in = ws[0], out_dim = ws[1];
  if (bias && bias->shape() != Shape{out_dim}) {
    throw DimensionError("linear: bias " + shape_str(bias->shape()) +
                         " vs weight " + shape_str(ws));
  }
  const std::size_t rows = x.value().size() / in;
  Shape os = xs;
  os.back() = out_dim;
  Tensor<T> out(os);
  if (bias) {
    const T* b = bias->value().data();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy(b, b + out_dim, out.data() + r * out_dim);
  }
  kernels::matmul_acc(x.value().data(), rows, in, weight.value().data(),
                      out_dim, out.data());
  int ix = x.id(), iw = weight.id();
  int ib = bias ? bias->id() : -1;
  std::vector<int> inputs{ix, iw};
  if (bias) inputs.push_back(ib);
  return g.record(
      std::move(out), inputs,
      [ix, iw, ib, rows, in, out_dim](Graph<T>& g, const Tensor<T>& go) {
        if (g.requires_grad(ix)) {
          kernels::matmul_bt_acc(go.data(), rows, out_dim,
                                 g.value(iw).data(), in,
                                 g.grad_buffer(ix).data());
        }
        if (g.requires_grad(iw)) {
          kernels::matmul_at_acc(g.value(ix).data(), rows, in, go.data(),
                                 out_dim, g.grad_buffer(iw).data());
        }
        if (ib >= 0 && g.requires_grad(ib)) {
          T* gb = g.grad_buffer(ib).data();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t o = 0; o < out_dim; ++o)
              gb[o] += go[r * out_dim + o];
        }
      });
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias) {
  return linear_impl(x, weight, std::optional<Var<T>>(bias));
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight) {
  return linear_impl<T>(x, weight, std::nullopt);
}

template <typename T>
Var<T> softmax(const Var<T>& x) {
  Graph<T>& g = x.graph();
  if (x.shape().empty()) throw DimensionError("softmax on a scalar");
  const std::size_t k = x.shape().back();
  const std::size_t rows = k ? x.value().size() / k : 0;
  Tensor<T> out = x.value();
  for (std::size_t r = 0; r < rows; ++r) {
    T* row = out.data() + r * k;
    T mx = *std::max_element(row, row + k);
    T sum = 0;
    for (std::size_t i = 0; i < k; ++i) {
      row[i] = std::exp(row[i] - mx);
      sum += row[i];
    }
    for (std::size_t i = 0; i < k; ++i) row[i] /= sum;
  }
  int ix = x.id();
  int iy = static_cast<int>(g.size());
  return g.record(std::move(out), {ix},
                  [ix, iy, rows, k](Graph<T>& g, const Tensor<T>& go) {
                    const Tensor<T>& y = g.value(iy);
                    Tensor<T>& gx = g.grad_buffer(ix);
                    for (std::size_t r = 0; r < rows; ++r) {
                      const std::size_t o = r * k;
                      T dot = 0;
                      for (std::size_t i = 0; i < k; ++i)
                        dot += go[o + i] * y[o + i];
                      for (std::size_t i = 0; i < k; ++i)
                        gx[o + i] += y[o + i] * (go[o + i] - dot);
                    }
                  });
}

template <typename T>
Var<T> unfold(const Var<T>& x, std::size_t kernel, std::size_t stride,
              std::size_t axis, std::optional<std::size_t> pad_opt) {
  Graph<T>& g = x.graph();
  const Shape& xs = x.shape();
  if (kernel < 1 || stride < 1) {
    throw DimensionError("unfold: kernel and stride must be >= 1");
  }
  if (axis >= xs.size()) {
    throw DimensionError("unfold: axis " + std::to_string(axis) +
                         " out of range for " + shape_str(xs));
  }
  const std::size_t pad = pad_opt.value_or(kernel - 1);
  const std::size_t outer = prod(xs, 0, axis);
  const std::size_t len = xs[axis];
  const std::size_t feat = prod(xs, axis + 1, xs.size());
  if (len + pad < kernel) {
    throw DimensionError("unfold: kernel " + std::to_string(kernel) +
                         " larger than padded axis of length " +
                         std::to_string(len + pad));
  }
  const std::size_t out_len = (len + pad - kernel) / stride + 1;
  Shape os(xs.begin(), xs.begin() + axis);
  os.push_back(out_len);
  os.push_back(kernel * feat);
  Tensor<T> out(os);
  const T* xd = x.value().data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t l = 0; l < out_len; ++l) {
      T* dst = out.data() + (o * out_len + l) * kernel * feat;
      for (std::size_t j = 0; j < kernel; ++j) {
        // source index = l*stride + j - pad
        const std::size_t pos = l * stride + j;
        if (pos < pad) continue;
        const std::size_t src = pos - pad;
        std::copy_n(xd + (o * len + src) * feat, feat, dst + j * feat);
      }
    }
  }
  int ix = x.id();
  return g.record(
      std::move(out), {ix},
      [=](Graph<T>& g, const Tensor<T>& go) {
        Tensor<T>& gx = g.grad_buffer(ix);
        for (std::size_t o = 0; o < outer; ++o) {
          for (std::size_t l = 0; l < out_len; ++l) {
            const T* src = go.data() + (o * out_len + l) * kernel * feat;
            for (std::size_t j = 0; j < kernel; ++j) {
              const std::size_t pos = l * stride + j;
              if (pos < pad) continue;
              T* dst = gx.data() + (o * len + pos - pad) * feat;
              for (std::size_t i = 0; i < feat; ++i) dst[i] += src[j * feat + i];
            }
          }
        }
      });
}

template <typename T>
Var<T> transpose01(const Var<T>& x) {
  Graph<T>& g = x.graph();
  const Shape& xs = x.shape();
  if (xs.size() < 2) throw DimensionError("transpose01 needs rank >= 2");
  const std::size_t a = xs[0], b = xs[1], inner = prod(xs, 2, xs.size());
  Shape os = xs;
  std::swap(os[0], os[1]);
  Tensor<T> out(os);
  const T* xd = x.value().data();
  for (std::size_t i = 0; i < a; ++i)
    for (std::size_t j = 0; j < b; ++j)
      std::copy_n(xd + (i * b + j) * inner, inner,
                  out.data() + (j * a + i) * inner);
  int ix = x.id();
  return g.record(std::move(out), {ix},
                  [ix, a, b, inner](Graph<T>& g, const Tensor<T>& go) {
                    Tensor<T>& gx = g.grad_buffer(ix);
                    for (std::size_t i = 0; i < a; ++i)
                      for (std::size_t j = 0; j < b; ++j) {
                        const T* s = go.data() + (j * a + i) * inner;
                        T* d = gx.data() + (i * b + j) * inner;
                        for (std::size_t k = 0; k < inner; ++k) d[k] += s[k];
                      }
                  });
}

template <typename T>
Var<T> concat(const Var<T>& a, const Var<T>& b, std::size_t axis) {
  Graph<T>& g = same_graph(a, b);
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  bool ok = as.size() == bs.size() && axis < as.size();
  for (std::size_t i = 0; ok && i < as.size(); ++i)
    ok = i == axis || as[i] == bs[i];
  if (!ok) {
    throw DimensionError("concat along axis " + std::to_string(axis) + ": " +
                         shape_str(as) + " vs " + shape_str(bs));
  }
  const std::size_t outer = prod(as, 0, axis);
  const std::size_t ai = prod(as, axis, as.size());
  const std::size_t bi = prod(bs, axis, bs.size());
  Shape os = as;
  os[axis] += bs[axis];
  Tensor<T> out(os);
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(a.value().data() + o * ai, ai, out.data() + o * (ai + bi));
    std::copy_n(b.value().data() + o * bi, bi,
                out.data() + o * (ai + bi) + ai);
  }
  int ia = a.id(), ib = b.id();
  return g.record(std::move(out), {ia, ib},
                  [=](Graph<T>& g, const Tensor<T>& go) {
                    if (g.requires_grad(ia)) {
                      Tensor<T>& gx = g.grad_buffer(ia);
                      for (std::size_t o = 0; o < outer; ++o)
                        for (std::size_t i = 0; i < ai; ++i)
                          gx[o * ai + i] += go[o * (ai + bi) + i];
                    }
                    if (g.requires_grad(ib)) {
                      Tensor<T>& gx = g.grad_buffer(ib);
                      for (std::size_t o = 0; o < outer; ++o)
                        for (std::size_t i = 0; i < bi; ++i)
                          gx[o * bi + i] += go[o * (ai + bi) + ai + i];
                    }
                  });
}

template <typename T>
Var<T> slice(const Var<T>& x, std::size_t axis, std::size_t begin,
             std::size_t end) {
  Graph<T>& g = x.graph();
  const Shape& xs = x.shape();
  if (axis >= xs.size() || begin > end || end > xs[axis]) {
    throw DimensionError("slice [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") on axis " +
                         std::to_string(axis) + " of " + shape_str(xs));
  }
  const std::size_t outer = prod(xs, 0, axis);
  const std::size_t len = xs[axis];
  const std::size_t inner = prod(xs, axis + 1, xs.size());
  const std::size_t n = end - begin;
  Shape os = xs;
  os[axis] = n;
  Tensor<T> out(os);
  for (std::size_t o = 0; o < outer; ++o)
    std::copy_n(x.value().data() + (o * len + begin) * inner, n * inner,
                out.data() + o * n * inner);
  int ix = x.id();
  return g.record(std::move(out), {ix},
                  [=](Graph<T>& g, const Tensor<T>& go) {
                    Tensor<T>& gx = g.grad_buffer(ix);
                    for (std::size_t o = 0; o < outer; ++o)
                      for (std::size_t i = 0; i < n * inner; ++i)
                        gx[(o * len + begin) * inner + i] +=
                            go[o * n * inner + i];
                  });
}

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape) {
  if (numel(shape) != x.value().size()) {
    throw DimensionError("reshape " + shape_str(x.shape()) + " to " +
                         shape_str(shape));
  }
  Tensor<T> out = x.value().reshaped(std::move(shape));
  int ix = x.id();
  return x.graph().record(std::move(out), {ix},
                          [ix](Graph<T>& g, const Tensor<T>& go) {
                            Tensor<T>& gx = g.grad_buffer(ix);
                            for (std::size_t i = 0; i < go.size(); ++i)
                              gx[i] += go[i];
                          });
}

template <typename T>
Var<T> mean_axis(const Var<T>& x, std::size_t axis) {
  const Shape& xs = x.shape();
  if (axis >= xs.size() || xs[axis] == 0) {
    throw DimensionError("mean_axis: axis " + std::to_string(axis) +
                         " invalid for " + shape_str(xs));
  }
  const std::size_t outer = prod(xs, 0, axis);
  const std::size_t len = xs[axis];
  const std::size_t inner = prod(xs, axis + 1, xs.size());
  Shape os = xs;
  os.erase(os.begin() + static_cast<std::ptrdiff_t>(axis));
  Tensor<T> out(os);
  const T* xd = x.value().data();
  const T inv = T(1) / static_cast<T>(len);
  for (std::size_t o = 0; o < outer; ++o) {
    T* dst = out.data() + o * inner;
    for (std::size_t l = 0; l < len; ++l) {
      const T* src = xd + (o * len + l) * inner;
      for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
    }
    for (std::size_t i = 0; i < inner; ++i) dst[i] *= inv;
  }
  int ix = x.id();
  return x.graph().record(std::move(out), {ix},
                          [=](Graph<T>& g, const Tensor<T>& go) {
                            Tensor<T>& gx = g.grad_buffer(ix);
                            for (std::size_t o = 0; o < outer; ++o)
                              for (std::size_t l = 0; l < len; ++l)
                                for (std::size_t i = 0; i < inner; ++i)
                                  gx[(o * len + l) * inner + i] +=
                                      go[o * inner + i] * inv;
                          });
}

template <typename T>
Var<T> sum_all(const Var<T>& x) {
  T s = 0;
  for (T v : x.value().values()) s += v;
  int ix = x.id();
  return x.graph().record(Tensor<T>::scalar(s), {ix},
                          [ix](Graph<T>& g, const Tensor<T>& go) {
                            Tensor<T>& gx = g.grad_buffer(ix);
                            for (auto& v : gx.values()) v += go[0];
                          });
}

template <typename T>
Var<T> mean_all(const Var<T>& x) {
  const std::size_t n = x.value().size();
  if (n == 0) throw DimensionError("mean_all of an empty tensor");
  return scale(sum_all(x), T(1) / static_cast<T>(n));
}

template <typename T>
Var<T> gru_scan(const Var<T>& x, const Var<T>& h0, const Var<T>& w_ih,
                const Var<T>& w_hh, const Var<T>& b_ih, const Var<T>& b_hh) {
  Graph<T>& g = same_graph(x, w_ih);
  const Shape& xs = x.shape();
  if (xs.size() != 3 || w_ih.shape().size() != 2 ||
      w_hh.shape().size() != 2) {
    throw DimensionError("gru_scan: input " + shape_str(xs) + ", w_ih " +
                         shape_str(w_ih.shape()) + ", w_hh " +
                         shape_str(w_hh.shape()));
  }
  const std::size_t B = xs[0], S = xs[1], I = xs[2];
  const std::size_t N = w_hh.dim(0);
  const std::size_t G = 3 * N;
  if (w_ih.shape() != Shape{I, G} || w_hh.shape() != Shape{N, G} ||
      b_ih.shape() != Shape{G} || b_hh.shape() != Shape{G} ||
      h0.shape() != Shape{B, N}) {
    throw DimensionError(
        "gru_scan: input " + shape_str(xs) + ", h0 " + shape_str(h0.shape()) +
        ", w_ih " + shape_str(w_ih.shape()) + ", w_hh " +
        shape_str(w_hh.shape()) + ", b_ih " + shape_str(b_ih.shape()) +
        ", b_hh " + shape_str(b_hh.shape()));
  }

  // Input projections for every step at once.
  auto xp = std::make_shared<std::vector<T>>(B * S * G);
  {
    const T* b = b_ih.value().data();
    for (std::size_t r = 0; r < B * S; ++r)
      std::copy(b, b + G, xp->data() + r * G);
    kernels::matmul_acc(x.value().data(), B * S, I, w_ih.value().data(), G,
                        xp->data());
  }
  // Saved activations, [B, S, N] each.
  auto rs = std::make_shared<std::vector<T>>(B * S * N);
  auto zs = std::make_shared<std::vector<T>>(B * S * N);
  auto ns = std::make_shared<std::vector<T>>(B * S * N);
  auto hns = std::make_shared<std::vector<T>>(B * S * N);

  Tensor<T> out({B, S, N});
  std::vector<T> h(h0.value().values().begin(), h0.value().values().end());
  std::vector<T> hp(B * G);
  const T* bh = b_hh.value().data();
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t b = 0; b < B; ++b) std::copy(bh, bh + G, &hp[b * G]);
    kernels::matmul_acc(h.data(), B, N, w_hh.value().data(), G, hp.data());
    for (std::size_t b = 0; b < B; ++b) {
      const T* xr = xp->data() + (b * S + s) * G;
      const T* hr = &hp[b * G];
      const std::size_t o = (b * S + s) * N;
      for (std::size_t j = 0; j < N; ++j) {
        const T r = sigmoid_scalar(xr[j] + hr[j]);
        const T z = sigmoid_scalar(xr[N + j] + hr[N + j]);
        const T n = std::tanh(xr[2 * N + j] + r * hr[2 * N + j]);
        const T hnew = (T(1) - z) * n + z * h[b * N + j];
        (*rs)[o + j] = r;
        (*zs)[o + j] = z;
        (*ns)[o + j] = n;
        (*hns)[o + j] = hr[2 * N + j];
        out[o + j] = hnew;
      }
    }
    for (std::size_t b = 0; b < B; ++b)
      std::copy_n(out.data() + (b * S + s) * N, N, &h[b * N]);
  }

  int ix = x.id(), ih0 = h0.id(), iwi = w_ih.id(), iwh = w_hh.id(),
      ibi = b_ih.id(), ibh = b_hh.id();
  int iy = static_cast<int>(g.size());
  return g.record(
      std::move(out), {ix, ih0, iwi, iwh, ibi, ibh},
      [=](Graph<T>& g, const Tensor<T>& go) {
        const Tensor<T>& y = g.value(iy);
        const T* h0v = g.value(ih0).data();
        const T* whh = g.value(iwh).data();
        std::vector<T> dxp(B * S * G);
        std::vector<T> dh(B * N, T(0));
        std::vector<T> dhp(B * G);
        std::vector<T> hprev(B * N);
        const bool want_whh = g.requires_grad(iwh);
        const bool want_bhh = g.requires_grad(ibh);
        for (std::size_t s = S; s-- > 0;) {
          for (std::size_t b = 0; b < B; ++b) {
            const T* src = s == 0 ? h0v + b * N : y.data() + (b * S + s - 1) * N;
            std::copy_n(src, N, &hprev[b * N]);
          }
          for (std::size_t b = 0; b < B; ++b) {
            const std::size_t o = (b * S + s) * N;
            T* dxr = dxp.data() + (b * S + s) * G;
            T* dhr = &dhp[b * G];
            for (std::size_t j = 0; j < N; ++j) {
              const T d = dh[b * N + j] + go[o + j];
              const T r = (*rs)[o + j], z = (*zs)[o + j], n = (*ns)[o + j];
              const T hn = (*hns)[o + j];
              const T dn = d * (T(1) - z);
              const T dz = d * (hprev[b * N + j] - n);
              const T dan = dn * (T(1) - n * n);
              const T dr = dan * hn;
              const T daz = dz * z * (T(1) - z);
              const T dar = dr * r * (T(1) - r);
              dxr[j] = dar;
              dxr[N + j] = daz;
              dxr[2 * N + j] = dan;
              dhr[j] = dar;
              dhr[N + j] = daz;
              dhr[2 * N + j] = dan * r;
              dh[b * N + j] = d * z;
            }
          }
          if (want_whh)
            kernels::matmul_at_acc(hprev.data(), B, N, dhp.data(), G,
                                   g.grad_buffer(iwh).data());
          if (want_bhh) {
            T* gb = g.grad_buffer(ibh).data();
            for (std::size_t b = 0; b < B; ++b)
              for (std::size_t k = 0; k < G; ++k) gb[k] += dhp[b * G + k];
          }
          kernels::matmul_bt_acc(dhp.data(), B, G, whh, N, dh.data());
        }
        if (g.requires_grad(ih0)) {
          Tensor<T>& gh = g.grad_buffer(ih0);
          for (std::size_t i = 0; i < B * N; ++i) gh[i] += dh[i];
        }
        if (g.requires_grad(iwi))
          kernels::matmul_at_acc(g.value(ix).data(), B * S, I, dxp.data(), G,
                                 g.grad_buffer(iwi).data());
        if (g.requires_grad(ibi)) {
          T* gb = g.grad_buffer(ibi).data();
          for (std::size_t r = 0; r < B * S; ++r)
            for (std::size_t k = 0; k < G; ++k) gb[k] += dxp[r * G + k];
        }
        if (g.requires_grad(ix))
          kernels::matmul_bt_acc(dxp.data(), B * S, G, g.value(iwi).data(), I,
                                 g.grad_buffer(ix).data());
      });
}

template <typename T>
Var<T> gru_step(const Var<T>& x, const Var<T>& h, const Var<T>& w_ih,
                const Var<T>& w_hh, const Var<T>& b_ih, const Var<T>& b_hh) {
  if (x.shape().size() != 2) {
    throw DimensionError("gru_step: input must be [B, I], got " +
                         shape_str(x.shape()));
  }
  const std::size_t B = x.dim(0);
  Var<T> seq = reshape(x, {B, 1, x.dim(1)});
  Var<T> out = gru_scan(seq, h, w_ih, w_hh, b_ih, b_hh);
  return reshape(out, {B, out.dim(2)});
}

template <typename T>
Var<T> lagged_correlation(const Var<T>& query, const Var<T>& keys,
                          std::size_t max_lag) {
  Graph<T>& g = same_graph(query, keys);
  const Shape& qs = query.shape();
  const Shape& ks = keys.shape();
  if (qs.size() != 3 || ks.size() != 3 || ks[1] != qs[1] || ks[2] != qs[2] ||
      ks[0] < qs[0]) {
    throw DimensionError("lagged_correlation: query " + shape_str(qs) +
                         " vs keys " + shape_str(ks));
  }
  const std::size_t T_ = qs[0], F = qs[1], C = qs[2];
  const std::size_t P = ks[0] - T_;
  Tensor<T> out({T_, max_lag, C});
  const T* q = query.value().data();
  const T* k = keys.value().data();
  for (std::size_t t = 0; t < T_; ++t) {
    for (std::size_t d = 0; d < max_lag && d <= P + t; ++d) {
      const std::size_t kt = P + t - d;
      T* dst = out.data() + (t * max_lag + d) * C;
      for (std::size_t f = 0; f < F; ++f) {
        const T* qr = q + (t * F + f) * C;
        const T* kr = k + (kt * F + f) * C;
        for (std::size_t c = 0; c < C; ++c) dst[c] += qr[c] * kr[c];
      }
    }
  }
  int iq = query.id(), ik = keys.id();
  return g.record(
      std::move(out), {iq, ik}, [=](Graph<T>& g, const Tensor<T>& go) {
        const T* q = g.value(iq).data();
        const T* k = g.value(ik).data();
        T* gq = g.requires_grad(iq) ? g.grad_buffer(iq).data() : nullptr;
        T* gk = g.requires_grad(ik) ? g.grad_buffer(ik).data() : nullptr;
        for (std::size_t t = 0; t < T_; ++t) {
          for (std::size_t d = 0; d < max_lag && d <= P + t; ++d) {
            const std::size_t kt = P + t - d;
            const T* gr = go.data() + (t * max_lag + d) * C;
            for (std::size_t f = 0; f < F; ++f) {
              const std::size_t qo = (t * F + f) * C, ko = (kt * F + f) * C;
              for (std::size_t c = 0; c < C; ++c) {
                if (gq) gq[qo + c] += gr[c] * k[ko + c];
                if (gk) gk[ko + c] += gr[c] * q[qo + c];
              }
            }
          }
        }
      });
}

template <typename T>
Var<T> lagged_mix(const Var<T>& weights, const Var<T>& keys) {
  Graph<T>& g = same_graph(weights, keys);
  const Shape& ws = weights.shape();
  const Shape& ks = keys.shape();
  if (ws.size() != 2 || ks.size() != 3 || ks[0] < ws[0]) {
    throw DimensionError("lagged_mix: weights " + shape_str(ws) +
                         " vs keys " + shape_str(ks));
  }
  const std::size_t T_ = ws[0], D = ws[1], FC = ks[1] * ks[2];
  const std::size_t P = ks[0] - T_;
  Tensor<T> out({T_, ks[1], ks[2]});
  const T* w = weights.value().data();
  const T* k = keys.value().data();
  for (std::size_t t = 0; t < T_; ++t) {
    T* dst = out.data() + t * FC;
    for (std::size_t d = 0; d < D && d <= P + t; ++d) {
      const T a = w[t * D + d];
      const T* src = k + (P + t - d) * FC;
      for (std::size_t i = 0; i < FC; ++i) dst[i] += a * src[i];
    }
  }
  int iw = weights.id(), ik = keys.id();
  return g.record(
      std::move(out), {iw, ik}, [=](Graph<T>& g, const Tensor<T>& go) {
        const T* w = g.value(iw).data();
        const T* k = g.value(ik).data();
        T* gw = g.requires_grad(iw) ? g.grad_buffer(iw).data() : nullptr;
        T* gk = g.requires_grad(ik) ? g.grad_buffer(ik).data() : nullptr;
        for (std::size_t t = 0; t < T_; ++t) {
          const T* gr = go.data() + t * FC;
          for (std::size_t d = 0; d < D && d <= P + t; ++d) {
            const std::size_t ko = (P + t - d) * FC;
            if (gw) {
              T s = 0;
              for (std::size_t i = 0; i < FC; ++i) s += gr[i] * k[ko + i];
              gw[t * D + d] += s;
            }
            if (gk) {
              const T a = w[t * D + d];
              for (std::size_t i = 0; i < FC; ++i) gk[ko + i] += a * gr[i];
            }
          }
        }
      });
}

template <typename T>
Var<T> expected_index(const Var<T>& probs) {
  const Shape& ps = probs.shape();
  if (ps.size() != 2) {
    throw DimensionError("expected_index needs [T, D], got " + shape_str(ps));
  }
  const std::size_t T_ = ps[0], D = ps[1];
  Tensor<T> out({T_});
  const T* p = probs.value().data();
  for (std::size_t t = 0; t < T_; ++t) {
    T s = 0;
    for (std::size_t d = 0; d < D; ++d) s += p[t * D + d] * static_cast<T>(d);
    out[t] = s;
  }
  int ip = probs.id();
  return probs.graph().record(
      std::move(out), {ip}, [=](Graph<T>& g, const Tensor<T>& go) {
        Tensor<T>& gp = g.grad_buffer(ip);
        for (std::size_t t = 0; t < T_; ++t)
          for (std::size_t d = 0; d < D; ++d)
            gp[t * D + d] += go[t] * static_cast<T>(d);
      });
}

#define E2EAEC_INSTANTIATE(T)                                                \
  template Var<T> add(const Var<T>&, const Var<T>&);                         \
  template Var<T> sub(const Var<T>&, const Var<T>&);                         \
  template Var<T> mul(const Var<T>&, const Var<T>&);                         \
  template Var<T> scale(const Var<T>&, T);                                   \
  template Var<T> sigmoid(const Var<T>&);                                    \
  template Var<T> tanh(const Var<T>&);                                       \
  template Var<T> linear(const Var<T>&, const Var<T>&, const Var<T>&);       \
  template Var<T> linear(const Var<T>&, const Var<T>&);                      \
  template Var<T> softmax(const Var<T>&);                                    \
  template Var<T> unfold(const Var<T>&, std::size_t, std::size_t,            \
                         std::size_t, std::optional<std::size_t>);           \
  template Var<T> transpose01(const Var<T>&);                                \
  template Var<T> concat(const Var<T>&, const Var<T>&, std::size_t);         \
  template Var<T> slice(const Var<T>&, std::size_t, std::size_t,             \
                        std::size_t);                                        \
  template Var<T> reshape(const Var<T>&, Shape);                             \
  template Var<T> mean_axis(const Var<T>&, std::size_t);                     \
  template Var<T> sum_all(const Var<T>&);                                    \
  template Var<T> mean_all(const Var<T>&);                                   \
  template Var<T> gru_step(const Var<T>&, const Var<T>&, const Var<T>&,      \
                           const Var<T>&, const Var<T>&, const Var<T>&);     \
  template Var<T> gru_scan(const Var<T>&, const Var<T>&, const Var<T>&,      \
                           const Var<T>&, const Var<T>&, const Var<T>&);     \
  template Var<T> lagged_correlation(const Var<T>&, const Var<T>&,           \
                                     std::size_t);                           \
  template Var<T> lagged_mix(const Var<T>&, const Var<T>&);                  \
  template Var<T> expected_index(const Var<T>&);

E2EAEC_INSTANTIATE(float)
E2EAEC_INSTANTIATE(double)

#undef E2EAEC_INSTANTIATE

}  // namespace e2eaec::numcore
