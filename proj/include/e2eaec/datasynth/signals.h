#pragma once

#include <cstdint>

#include "e2eaec/dsp/audio.h"

namespace e2eaec::datasynth {

// Speech-like test signal: syllables of 80-300 ms built from harmonic
// complexes with a gliding pitch, a random formant envelope and a smooth
// amplitude contour, separated by pauses of 50-400 ms. Occasional noise
// bursts stand in for fricatives. RMS is about -25 dBFS while active.
dsp::AudioBuffer speech_like(std::size_t samples, int sample_rate,
                             std::uint64_t seed);

// Stationary coloured noise (a random mix of white, pink and brown) with
// unit RMS.
dsp::AudioBuffer coloured_noise(std::size_t samples, int sample_rate,
                                std::uint64_t seed);

// Splits a master seed into independent per-item seeds (splitmix64).
std::uint64_t split_seed(std::uint64_t master, std::uint64_t index);

}  // namespace e2eaec::datasynth
