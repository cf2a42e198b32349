#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "e2eaec/dsp/audio.h"

namespace e2eaec::dsp {

class RealFft;

struct StftGeometry {
  std::size_t frame_len = 320;  // 20 ms at 16 kHz
  std::size_t hop = 160;        // 10 ms at 16 kHz
  std::size_t fft_size = 512;

  std::size_t bins() const { return fft_size / 2 + 1; }

  // 20 ms frames, 10 ms hop, FFT size the next power of two.
  static StftGeometry for_rate(int sample_rate);

  // Frames produced for a signal of `len` samples. The signal is padded with
  // frame_len - hop zeros at the end so every sample is covered by the full
  // set of overlapping frames: T = ceil((len + frame_len - hop) / hop).
  std::size_t frames_for(std::size_t len) const;

  // First sample whose overlap-add normalisation is complete.
  std::size_t valid_begin() const { return frame_len - hop; }

  void validate() const;
  bool operator==(const StftGeometry&) const = default;
};

// T x F complex matrix, row-major by frame.
class Spectrogram {
 public:
  Spectrogram() = default;
  Spectrogram(StftGeometry geometry, std::size_t frames)
      : geometry_(geometry),
        frames_(frames),
        data_(frames * geometry.bins()) {}

  const StftGeometry& geometry() const { return geometry_; }
  std::size_t frames() const { return frames_; }
  std::size_t bins() const { return geometry_.bins(); }

  std::complex<double>& at(std::size_t t, std::size_t f) {
    return data_[t * bins() + f];
  }
  const std::complex<double>& at(std::size_t t, std::size_t f) const {
    return data_[t * bins() + f];
  }
  std::span<std::complex<double>> frame(std::size_t t) {
    return {data_.data() + t * bins(), bins()};
  }
  std::span<const std::complex<double>> frame(std::size_t t) const {
    return {data_.data() + t * bins(), bins()};
  }
  std::vector<std::complex<double>>& data() { return data_; }
  const std::vector<std::complex<double>>& data() const { return data_; }

 private:
  StftGeometry geometry_;
  std::size_t frames_ = 0;
  std::vector<std::complex<double>> data_;
};

// Square root of the periodic Hann window sampled at half-sample offsets,
// sin(pi (n + 0.5) / N). It has no zero samples, so every input sample is
// recoverable, and its squares sum to one at 50% overlap.
std::vector<double> sqrt_hann(std::size_t n);

// Causal STFT: frame t covers samples [t*hop, t*hop + frame_len), windowed
// and zero-padded to fft_size. Empty audio gives zero frames.
Spectrogram stft(const AudioBuffer& audio, const StftGeometry& geometry);

// Overlap-add synthesis with the same window and per-sample normalisation by
// the accumulated squared window. Output is truncated or zero-extended to
// out_len samples.
AudioBuffer istft(const Spectrogram& spec, std::size_t out_len,
                  int sample_rate);

// Frame-at-a-time analysis.
class StreamingStft {
 public:
  explicit StreamingStft(StftGeometry geometry);
  ~StreamingStft();

  // `frame` holds frame_len samples (shorter input is zero-padded).
  void analyze(std::span<const double> frame,
               std::span<std::complex<double>> out);

 private:
  StftGeometry geometry_;
  std::vector<double> window_;
  std::vector<double> buf_;
  std::unique_ptr<RealFft> fft_;
};

// Frame-at-a-time synthesis. After pushing frame t the samples
// [t*hop, (t+1)*hop) are final and returned. istft() is built on this class,
// so streamed and offline synthesis agree exactly.
class StreamingIstft {
 public:
  explicit StreamingIstft(StftGeometry geometry);
  ~StreamingIstft();

  std::span<const double> push(std::span<const std::complex<double>> frame);

  // Remaining frame_len - hop samples of the overlap tail.
  std::vector<double> flush();

 private:
  StftGeometry geometry_;
  std::vector<double> window_;
  std::vector<double> acc_;
  std::vector<double> norm_;
  std::vector<double> time_;
  std::vector<double> out_;
  std::unique_ptr<RealFft> fft_;
};

}  // namespace e2eaec::dsp
