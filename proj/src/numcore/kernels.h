#pragma once

#include <cstddef>

// Dense inner loops shared by the ops. Each output element is accumulated in
// ascending reduction order regardless of how many rows are processed at
// once, so chunked and whole-sequence evaluation agree bit for bit.
namespace e2eaec::numcore::kernels {

// y[rows, out] += x[rows, in] * w[in, out]
template <typename T>
void matmul_acc(const T* x, std::size_t rows, std::size_t in, const T* w,
                std::size_t out, T* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = x + r * in;
    T* yr = y + r * out;
    for (std::size_t k = 0; k < in; ++k) {
      const T a = xr[k];
      if (a == T(0)) continue;
      const T* wk = w + k * out;
      for (std::size_t o = 0; o < out; ++o) yr[o] += a * wk[o];
    }
  }
}

// dx[rows, in] += g[rows, out] * w[in, out]^T
template <typename T>
void matmul_bt_acc(const T* g, std::size_t rows, std::size_t out, const T* w,
                   std::size_t in, T* dx) {
  for (std::size_t r = 0; r < rows; ++r) {
    const T* gr = g + r * out;
    T* dr = dx + r * in;
    for (std::size_t k = 0; k < in; ++k) {
      const T* wk = w + k * out;
      T s = 0;
      for (std::size_t o = 0; o < out; ++o) s += gr[o] * wk[o];
      dr[k] += s;
    }
  }
}

// dw[in, out] += x[rows, in]^T * g[rows, out]
template <typename T>
void matmul_at_acc(const T* x, std::size_t rows, std::size_t in, const T* g,
                   std::size_t out, T* dw) {
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = x + r * in;
    const T* gr = g + r * out;
    for (std::size_t k = 0; k < in; ++k) {
      const T a = xr[k];
      if (a == T(0)) continue;
      T* dk = dw + k * out;
      for (std::size_t o = 0; o < out; ++o) dk[o] += a * gr[o];
    }
  }
}

}  // namespace e2eaec::numcore::kernels
