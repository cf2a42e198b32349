#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "e2eaec/datasynth/example.h"

namespace e2eaec::datasynth {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct DatasetConfig {
  std::size_t count = 16;
  double duration_s = 4.0;
  int sample_rate = 16000;
  Range delay_ms{0.0, 500.0};
  Range ser_db{-10.0, 10.0};
  Range snr_db{5.0, 30.0};
  Range rt60_s{0.1, 0.6};
  double single_talk_prob = 0.2;   // near end silent
  double no_noise_prob = 0.1;
  double clip_prob = 0.0;
  double clip_level = 0.3;         // relative to the far-end peak
  std::size_t max_delay_frames = 100;
  std::uint64_t seed = 1;

  // Throws ContractError on empty ranges or a delay beyond max_delay_frames.
  void validate() const;
};

// Example `index` of the dataset; a pure function of (cfg, index).
TrainingExample synth_example(const DatasetConfig& cfg, std::size_t index);

// All examples, generated on `threads` workers (0 = hardware concurrency).
std::vector<TrainingExample> synth_dataset(const DatasetConfig& cfg,
                                           unsigned threads = 0);

// Far-end single talk from the start, background noise from `noise_at_s`,
// near-end speech from `talk_at_s`.
TrainingExample make_scene_example(int sample_rate, double duration_s,
                                   double delay_ms, double noise_at_s,
                                   double talk_at_s, std::uint64_t seed,
                                   std::size_t max_delay_frames = 100);

// Writes <dir>/NNNNN_{mic,ref,t1,t2}.wav (float32), NNNNN_labels.txt and
// manifest.jsonl with one record per example.
void write_dataset(const std::string& dir,
                   const std::vector<TrainingExample>& examples);

// Reads a directory written by write_dataset. The component signals
// (near, echo, noise) are not stored and come back empty.
std::vector<TrainingExample> load_dataset(const std::string& dir);

}  // namespace e2eaec::datasynth
