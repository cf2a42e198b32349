#pragma once

#include <cstddef>
#include <vector>

#include "e2eaec/dsp/audio.h"

namespace e2eaec::dsp {

struct GccPhatConfig {
  std::size_t max_delay = 0;      // samples, must be < window_len
  std::size_t window_len = 16000; // 1 s at 16 kHz
  std::size_t window_hop = 1600;  // 0.1 s at 16 kHz
  double magnitude_floor = 1e-12;

  // 1 s windows with a 0.1 s hop.
  static GccPhatConfig for_rate(int sample_rate, std::size_t max_delay);
};

struct DelayEstimate {
  std::size_t window_start = 0;  // first sample of the analysis window
  std::size_t delay = 0;         // samples by which mic lags ref
  double confidence = 0.0;       // peak / mean |correlation| over the lag range
};

// Phase-transform weighted cross-correlation per analysis window. Only
// non-negative lags (mic lagging ref) in [0, max_delay] are searched.
std::vector<DelayEstimate> gcc_phat(const AudioBuffer& mic,
                                    const AudioBuffer& ref,
                                    const GccPhatConfig& cfg);

// round(delay / hop), clamped to num_classes - 1.
std::size_t discretize_delay(double delay_samples, std::size_t hop,
                             std::size_t num_classes);

}  // namespace e2eaec::dsp
