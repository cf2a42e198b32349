#include "e2eaec/datasynth/signals.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace e2eaec::datasynth {

std::uint64_t split_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

dsp::AudioBuffer speech_like(std::size_t samples, int sample_rate,
                             std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto uni = [&](double a, double b) {
    return std::uniform_real_distribution<double>(a, b)(rng);
  };
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double fs = sample_rate;
  const double nyq = fs / 2.0;
  dsp::AudioBuffer out(samples, sample_rate);

  const double base_f0 = uni(100.0, 220.0);
  std::size_t pos = static_cast<std::size_t>(uni(0.0, 0.2) * fs);
  while (pos < samples) {
    const std::size_t len = static_cast<std::size_t>(uni(0.08, 0.3) * fs);
    const double f0a = base_f0 * uni(0.85, 1.15);
    const double f0b = f0a * uni(0.8, 1.25);
    const double formant[2] = {uni(300.0, 900.0), uni(900.0, 2500.0)};
    const bool fricative = uni(0.0, 1.0) < 0.15;
    const double gain = uni(0.5, 1.0);
    double phase = 0.0;
    for (std::size_t i = 0; i < len && pos + i < samples; ++i) {
      const double u = static_cast<double>(i) / static_cast<double>(len);
      const double env = std::pow(std::sin(std::numbers::pi * u), 0.6);
      double v = 0.0;
      if (fricative) {
        v = 0.3 * gauss(rng);
      } else {
        const double f0 = f0a + (f0b - f0a) * u;
        phase += 2.0 * std::numbers::pi * f0 / fs;
        for (int k = 1; k * f0 < nyq * 0.95; ++k) {
          const double fk = k * f0;
          double a = 0.0;
          for (double fm : formant) {
            const double x = (fk - fm) / (0.25 * fm);
            a += std::exp(-0.5 * x * x);
          }
          v += (a + 0.05) / std::sqrt(static_cast<double>(k)) *
               std::sin(k * phase);
        }
        v *= 0.25;
      }
      out[pos + i] = gain * env * v;
    }
    pos += len + static_cast<std::size_t>(uni(0.05, 0.4) * fs);
  }

  // Normalise the active part to about -25 dBFS RMS.
  double e = 0.0;
  std::size_t active = 0;
  for (double v : out.samples) {
    if (v != 0.0) {
      e += v * v;
      ++active;
    }
  }
  if (active > 0) {
    const double g = 0.056 / std::sqrt(e / static_cast<double>(active));
    for (double& v : out.samples) v *= g;
  }
  return out;
}

dsp::AudioBuffer coloured_noise(std::size_t samples, int sample_rate,
                                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double w_white = uni(rng), w_pink = uni(rng), w_brown = uni(rng);
  dsp::AudioBuffer out(samples, sample_rate);
  // Pink noise via the Paul Kellet filter; brown via a leaky integrator.
  double b0 = 0, b1 = 0, b2 = 0, brown = 0;
  for (std::size_t n = 0; n < samples; ++n) {
    const double w = gauss(rng);
    b0 = 0.99765 * b0 + w * 0.0990460;
    b1 = 0.96300 * b1 + w * 0.2965164;
    b2 = 0.57000 * b2 + w * 1.0526913;
    const double pink = (b0 + b1 + b2 + w * 0.1848) * 0.2;
    brown = 0.995 * brown + 0.1 * w;
    out[n] = w_white * w + w_pink * pink + w_brown * brown;
  }
  double e = 0.0;
  for (double v : out.samples) e += v * v;
  if (e > 0.0) {
    const double g = 1.0 / std::sqrt(e / static_cast<double>(samples));
    for (double& v : out.samples) v *= g;
  }
  return out;
}

}  // namespace e2eaec::datasynth
