#include "e2eaec/dsp/fft.h"

#include <fftw3.h>

#include <algorithm>
#include <cstring>
#include <mutex>

#include "e2eaec/error.h"

namespace e2eaec::dsp {

namespace {
// FFTW's planner is not re-entrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

RealFft::RealFft(std::size_t n) : n_(n) {
  if (n < 2) throw ContractError("FFT size must be >= 2");
  std::lock_guard<std::mutex> lock(planner_mutex());
  real_ = fftw_alloc_real(n);
  fftw_complex* spec = fftw_alloc_complex(n / 2 + 1);
  spec_ = spec;
  const int ni = static_cast<int>(n);
  fwd_ = fftw_plan_dft_r2c_1d(ni, real_, spec, FFTW_ESTIMATE);
  inv_ = fftw_plan_dft_c2r_1d(ni, spec, real_, FFTW_ESTIMATE);
}

RealFft::~RealFft() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(fwd_));
  fftw_destroy_plan(static_cast<fftw_plan>(inv_));
  fftw_free(real_);
  fftw_free(spec_);
}

void RealFft::forward(std::span<const double> in,
                      std::span<std::complex<double>> out) {
  if (in.size() > n_ || out.size() != bins()) {
    throw ContractError("RealFft::forward: size mismatch");
  }
  std::copy(in.begin(), in.end(), real_);
  std::fill(real_ + in.size(), real_ + n_, 0.0);
  fftw_execute(static_cast<fftw_plan>(fwd_));
  std::memcpy(static_cast<void*>(out.data()), spec_,
              bins() * sizeof(fftw_complex));
}

void RealFft::inverse(std::span<const std::complex<double>> in,
                      std::span<double> out) {
  if (in.size() != bins() || out.size() != n_) {
    throw ContractError("RealFft::inverse: size mismatch");
  }
  std::memcpy(spec_, static_cast<const void*>(in.data()),
              bins() * sizeof(fftw_complex));
  auto* spec = static_cast<fftw_complex*>(spec_);
  spec[0][1] = 0.0;
  if (n_ % 2 == 0) spec[n_ / 2][1] = 0.0;
  fftw_execute(static_cast<fftw_plan>(inv_));
  const double scale = 1.0 / static_cast<double>(n_);
  for (std::size_t i = 0; i < n_; ++i) out[i] = real_[i] * scale;
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

std::vector<double> fft_convolve(std::span<const double> x,
                                 std::span<const double> h,
                                 std::size_t out_len) {
  std::vector<double> out(out_len, 0.0);
  if (x.empty() || h.empty() || out_len == 0) return out;
  const std::size_t full = std::min(out_len, x.size() + h.size() - 1);
  // Short filters are cheaper in the time domain.
  if (h.size() <= 64) {
    for (std::size_t n = 0; n < full; ++n) {
      double acc = 0.0;
      const std::size_t kmax = std::min(h.size() - 1, n);
      for (std::size_t k = 0; k <= kmax; ++k)
        if (n - k < x.size()) acc += h[k] * x[n - k];
      out[n] = acc;
    }
    return out;
  }
  const std::size_t n = next_pow2(x.size() + h.size() - 1);
  RealFft fft(n);
  std::vector<std::complex<double>> X(fft.bins()), Hs(fft.bins());
  fft.forward(x, X);
  fft.forward(h, Hs);
  for (std::size_t k = 0; k < X.size(); ++k) X[k] *= Hs[k];
  std::vector<double> y(n);
  fft.inverse(X, y);
  std::copy_n(y.begin(), full, out.begin());
  return out;
}

}  // namespace e2eaec::dsp
