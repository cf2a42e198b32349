#pragma once

#include <cstddef>
#include <vector>

namespace e2eaec::dsp {

// Mono time signal. Samples are nominally in [-1, 1].
struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = 16000;

  AudioBuffer() = default;
  AudioBuffer(std::vector<double> s, int rate)
      : samples(std::move(s)), sample_rate(rate) {}
  AudioBuffer(std::size_t n, int rate) : samples(n, 0.0), sample_rate(rate) {}

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  double& operator[](std::size_t i) { return samples[i]; }
  double operator[](std::size_t i) const { return samples[i]; }
};

// Throws ContractError unless the rate is positive and all samples finite.
void validate(const AudioBuffer& audio, const char* what);

double energy(const AudioBuffer& audio);

}  // namespace e2eaec::dsp
