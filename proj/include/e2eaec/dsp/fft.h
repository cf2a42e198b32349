#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace e2eaec::dsp {

// Real-input FFT of a fixed size backed by FFTW. Instances are not shared
// between threads; creating and destroying them is thread-safe.
class RealFft {
 public:
  explicit RealFft(std::size_t n);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::size_t size() const { return n_; }
  std::size_t bins() const { return n_ / 2 + 1; }

  // in: n samples (shorter input is zero-padded), out: n/2+1 bins.
  void forward(std::span<const double> in,
               std::span<std::complex<double>> out);
  // in: n/2+1 bins, out: n samples, scaled by 1/n so inverse(forward(x)) == x.
  // The imaginary parts of the DC and Nyquist bins are ignored.
  void inverse(std::span<const std::complex<double>> in,
               std::span<double> out);

 private:
  std::size_t n_;
  double* real_;
  void* spec_;  // fftw_complex*
  void* fwd_;   // fftw_plan
  void* inv_;
};

std::size_t next_pow2(std::size_t n);

}  // namespace e2eaec::dsp

namespace e2eaec::dsp {

// Linear convolution truncated to the first `out_len` samples.
std::vector<double> fft_convolve(std::span<const double> x,
                                 std::span<const double> h,
                                 std::size_t out_len);

}  // namespace e2eaec::dsp
