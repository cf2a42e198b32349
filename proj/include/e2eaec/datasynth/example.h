#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "e2eaec/datasynth/rir.h"
#include "e2eaec/dsp/audio.h"
#include "e2eaec/dsp/stft.h"

namespace e2eaec::datasynth {

inline constexpr double kInfDb = std::numeric_limits<double>::infinity();

struct ExampleMeta {
  double delay_ms = 0.0;
  double ser_db = 0.0;
  double snr_db = 0.0;
  double rt60_s = 0.0;
  std::uint64_t seed = 0;
};

struct TrainingExample {
  dsp::AudioBuffer mic, ref;
  dsp::AudioBuffer target_stage1;  // reverberant near end + noise, no echo
  dsp::AudioBuffer target_stage2;  // anechoic near-end speech
  dsp::AudioBuffer near, echo, noise;  // mic == near + echo + noise
  std::vector<int> vad_labels;     // per STFT frame
  std::vector<int> delay_labels;   // per STFT frame, -1 where masked
  ExampleMeta meta;
};

struct ExampleOptions {
  std::size_t max_delay_frames = 100;  // H
  double clip_level = 0.0;             // >0: hard-clip the far end first
  double gcc_min_confidence = 4.0;
  double peak_limit = 0.99;            // common gain keeps |mic| below this
};

// Builds mic = speech * h_x + delay(farend) * h_r + noise with the echo and
// noise scaled to the requested SER and SNR against the reverberant near
// end. Infinite SER/SNR drop the component. Without near-end energy the
// echo keeps its natural level and SNR is taken against the echo. The RIRs
// have their propagation delay removed, so delay_ms is the whole echo lag.
// Throws ContractError naming any component whose zero energy makes the
// requested ratio undefined.
TrainingExample make_example(const dsp::AudioBuffer& speech,
                             const dsp::AudioBuffer& noise,
                             const dsp::AudioBuffer& farend, double delay_ms,
                             double ser_db, double snr_db, double rt60_s,
                             std::uint64_t seed,
                             const ExampleOptions& opt = {});

// Per-frame delay classes from GCC-PHAT (2 s windows, 100 ms hop) between
// `echo` and `ref`. Frames take the estimate of the window centred nearest
// to them and are masked (-1) when that window's confidence is below `min_confidence`, when the
// lag reaches before the signal start, or when the reference frame the lag
// points at is silent.
std::vector<int> delay_labels(const dsp::AudioBuffer& echo,
                              const dsp::AudioBuffer& ref,
                              const dsp::StftGeometry& geometry,
                              std::size_t max_delay_frames,
                              double min_confidence);

// Random shoebox geometry with separated source and mic.
Room random_room(std::uint64_t seed);

}  // namespace e2eaec::datasynth
