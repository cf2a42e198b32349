#include "e2eaec/datasynth/vad.h"

#include <algorithm>
#include <cmath>

#include "e2eaec/dsp/stft.h"
#include "e2eaec/error.h"

namespace e2eaec::datasynth {

std::vector<int> energy_vad(const dsp::AudioBuffer& audio,
                            std::size_t frame_len, std::size_t hop,
                            const EnergyVadConfig& cfg) {
  dsp::validate(audio, "energy_vad input");
  if (hop == 0 || frame_len < hop) {
    throw ContractError("energy_vad: need 0 < hop <= frame_len");
  }
  const dsp::StftGeometry geo{frame_len, hop, frame_len};
  const std::size_t frames = geo.frames_for(audio.size());
  std::vector<int> labels(frames, 0);
  double floor_db = cfg.floor_init_db;
  for (std::size_t t = 0; t < frames; ++t) {
    double e = 0.0;
    for (std::size_t i = 0; i < frame_len; ++i) {
      const std::size_t n = t * hop + i;
      if (n < audio.size()) e += audio[n] * audio[n];
    }
    const double rms = std::sqrt(e / static_cast<double>(frame_len));
    const double level = 20.0 * std::log10(std::max(rms, 1e-7));
    const double threshold = std::max(floor_db + cfg.margin_db, cfg.min_threshold_db);
    labels[t] = level > threshold ? 1 : 0;
    floor_db = level < floor_db ? level : floor_db + cfg.floor_rise_db;
  }
  // Bridge short pauses between active frames.
  std::size_t last_active = frames;
  for (std::size_t t = 0; t < frames; ++t) {
    if (!labels[t]) continue;
    if (last_active != frames && t - last_active - 1 <= cfg.hangover)
      for (std::size_t k = last_active + 1; k < t; ++k) labels[k] = 1;
    last_active = t;
  }
  return labels;
}

}  // namespace e2eaec::datasynth
