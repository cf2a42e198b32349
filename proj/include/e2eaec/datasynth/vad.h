#pragma once

#include <cstddef>
#include <vector>

#include "e2eaec/dsp/audio.h"

namespace e2eaec::datasynth {

struct EnergyVadConfig {
  double margin_db = 12.0;       // above the tracked noise floor
  double min_threshold_db = -70.0;
  double floor_init_db = -100.0;
  double floor_rise_db = 0.02;   // per frame while above the floor
  std::size_t hangover = 5;      // gaps up to this many frames are bridged
};

// One 0/1 label per STFT frame (same framing as dsp::stft: frame t covers
// samples [t*hop, t*hop + frame_len), zero-padded, frames_for(len) frames).
// A frame is active when its RMS level in dBFS exceeds
// max(floor + margin, min_threshold). The floor follows level drops at
// once and rises slowly otherwise.
std::vector<int> energy_vad(const dsp::AudioBuffer& audio,
                            std::size_t frame_len, std::size_t hop,
                            const EnergyVadConfig& cfg = {});

}  // namespace e2eaec::datasynth
