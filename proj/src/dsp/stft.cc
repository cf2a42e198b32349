#include "e2eaec/dsp/stft.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "e2eaec/dsp/fft.h"
#include "e2eaec/error.h"

namespace e2eaec::dsp {

StftGeometry StftGeometry::for_rate(int sample_rate) {
  if (sample_rate < 100 || sample_rate % 100 != 0) {
    throw ContractError("sample rate must be a positive multiple of 100 Hz, got " +
                        std::to_string(sample_rate));
  }
  StftGeometry g;
  g.frame_len = static_cast<std::size_t>(sample_rate) / 50;
  g.hop = static_cast<std::size_t>(sample_rate) / 100;
  g.fft_size = next_pow2(g.frame_len);
  return g;
}

std::size_t StftGeometry::frames_for(std::size_t len) const {
  if (len == 0) return 0;
  const std::size_t padded = len + frame_len - hop;
  return (padded + hop - 1) / hop;
}

void StftGeometry::validate() const {
  if (hop == 0 || hop > frame_len || frame_len > fft_size) {
    throw ContractError("STFT geometry needs 0 < hop <= frame_len <= fft_size (" +
                        std::to_string(hop) + ", " + std::to_string(frame_len) +
                        ", " + std::to_string(fft_size) + ")");
  }
}

std::vector<double> sqrt_hann(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = std::sin(std::numbers::pi * (static_cast<double>(i) + 0.5) /
                    static_cast<double>(n));
  }
  return w;
}

StreamingStft::StreamingStft(StftGeometry geometry)
    : geometry_(geometry),
      window_(sqrt_hann(geometry.frame_len)),
      buf_(geometry.frame_len) {
  geometry_.validate();
  fft_ = std::make_unique<RealFft>(geometry_.fft_size);
}

StreamingStft::~StreamingStft() = default;

void StreamingStft::analyze(std::span<const double> frame,
                            std::span<std::complex<double>> out) {
  const std::size_t n = std::min(frame.size(), geometry_.frame_len);
  for (std::size_t i = 0; i < geometry_.frame_len; ++i)
    buf_[i] = i < n ? frame[i] * window_[i] : 0.0;
  fft_->forward(buf_, out);
}

Spectrogram stft(const AudioBuffer& audio, const StftGeometry& geometry) {
  geometry.validate();
  const std::size_t frames = geometry.frames_for(audio.size());
  Spectrogram spec(geometry, frames);
  if (frames == 0) return spec;
  StreamingStft analyzer(geometry);
  std::vector<double> frame(geometry.frame_len);
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t start = t * geometry.hop;
    for (std::size_t i = 0; i < geometry.frame_len; ++i) {
      const std::size_t n = start + i;
      frame[i] = n < audio.size() ? audio.samples[n] : 0.0;
    }
    analyzer.analyze(frame, spec.frame(t));
  }
  return spec;
}

StreamingIstft::StreamingIstft(StftGeometry geometry)
    : geometry_(geometry),
      window_(sqrt_hann(geometry.frame_len)),
      acc_(geometry.frame_len),
      norm_(geometry.frame_len),
      time_(geometry.fft_size),
      out_(geometry.hop) {
  geometry_.validate();
  fft_ = std::make_unique<RealFft>(geometry_.fft_size);
}

StreamingIstft::~StreamingIstft() = default;

std::span<const double> StreamingIstft::push(
    std::span<const std::complex<double>> frame) {
  if (frame.size() != geometry_.bins()) {
    throw ContractError("istft: frame has " + std::to_string(frame.size()) +
                        " bins, geometry expects " +
                        std::to_string(geometry_.bins()));
  }
  fft_->inverse(frame, time_);
  const std::size_t L = geometry_.frame_len, hop = geometry_.hop;
  for (std::size_t n = 0; n < L; ++n) {
    acc_[n] += time_[n] * window_[n];
    norm_[n] += window_[n] * window_[n];
  }
  for (std::size_t i = 0; i < hop; ++i)
    out_[i] = norm_[i] > 1e-10 ? acc_[i] / norm_[i] : 0.0;
  std::copy(acc_.begin() + static_cast<std::ptrdiff_t>(hop), acc_.end(),
            acc_.begin());
  std::copy(norm_.begin() + static_cast<std::ptrdiff_t>(hop), norm_.end(),
            norm_.begin());
  std::fill(acc_.end() - static_cast<std::ptrdiff_t>(hop), acc_.end(), 0.0);
  std::fill(norm_.end() - static_cast<std::ptrdiff_t>(hop), norm_.end(), 0.0);
  return out_;
}

std::vector<double> StreamingIstft::flush() {
  const std::size_t tail = geometry_.frame_len - geometry_.hop;
  std::vector<double> out(tail);
  for (std::size_t i = 0; i < tail; ++i)
    out[i] = norm_[i] > 1e-10 ? acc_[i] / norm_[i] : 0.0;
  std::fill(acc_.begin(), acc_.end(), 0.0);
  std::fill(norm_.begin(), norm_.end(), 0.0);
  return out;
}

AudioBuffer istft(const Spectrogram& spec, std::size_t out_len,
                  int sample_rate) {
  const StftGeometry& g = spec.geometry();
  g.validate();
  if (spec.data().size() != spec.frames() * g.bins()) {
    throw ContractError("istft: spectrogram storage does not match geometry");
  }
  AudioBuffer out(out_len, sample_rate);
  StreamingIstft synth(g);
  std::size_t pos = 0;
  for (std::size_t t = 0; t < spec.frames() && pos < out_len; ++t) {
    auto chunk = synth.push(spec.frame(t));
    for (std::size_t i = 0; i < chunk.size() && pos < out_len; ++i)
      out.samples[pos++] = chunk[i];
  }
  if (pos < out_len && spec.frames() > 0) {
    auto tail = synth.flush();
    for (std::size_t i = 0; i < tail.size() && pos < out_len; ++i)
      out.samples[pos++] = tail[i];
  }
  return out;
}

}  // namespace e2eaec::dsp
