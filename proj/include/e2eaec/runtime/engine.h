#pragma once

#include <complex>
#include <cstddef>
#include <deque>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "e2eaec/dsp/audio.h"
#include "e2eaec/dsp/stft.h"
#include "e2eaec/model/model.h"

namespace e2eaec::runtime {

struct EngineConfig {
  std::size_t vad_smooth_frames = 5;
  double vad_nospeech_threshold = 0.9;  // on 1 - smoothed speech probability
  double mask_factor = 0.1;             // magnitude scale of masked frames
  bool vad_masking = true;
  std::string checkpoint;
  int sample_rate = 16000;

  void validate() const;
};

// Mean of the last vad_smooth_frames entries of `history` (speech
// probabilities, oldest first), or of all of them when fewer are held.
double smoothed_speech_prob(std::span<const double> history,
                            const EngineConfig& cfg);

// Scales `frame` by mask_factor when 1 - smoothed_speech_prob > threshold.
// Returns whether the frame was masked; unmasked frames are left untouched.
bool vad_mask(std::span<std::complex<double>> frame,
              std::span<const double> history, const EngineConfig& cfg);

// Applies vad_mask to every frame of `spec` with the trailing history of
// `vad` (one speech probability per frame). Returns the per-frame mask flags.
std::vector<int> mask_spectrogram(dsp::Spectrogram& spec,
                                  std::span<const double> vad,
                                  const EngineConfig& cfg);

// 10 log10(sum mic^2 / (sum enhanced^2 + 1e-12)). With `active` the sums
// run over the hop-sized frames t with active[t] != 0 (hop from the sample
// rate); samples past the mask are ignored.
double erle(const dsp::AudioBuffer& mic, const dsp::AudioBuffer& enhanced,
            std::span<const int> active = {});

struct EngineFrame {
  std::size_t index = 0;
  double vad = 0.0;    // raw speech probability
  double delay = 0.0;  // expected delay in frames
  bool masked = false;
};

struct EngineResult {
  dsp::AudioBuffer enhanced;
  std::vector<double> vad;
  std::vector<double> delay;
  std::vector<int> masked;
};

// Frame-synchronous streaming canceller. Samples are pushed in chunks of
// any size; each complete analysis frame runs one model step, masking of
// the stage-2 spectrum and overlap-add synthesis.
class Engine {
 public:
  Engine(model::ModelConfig model_cfg, const model::ModelParams& params,
         EngineConfig cfg);

  const dsp::StftGeometry& geometry() const { return geometry_; }

  // Appends the output samples that became final to `out`.
  void push(std::span<const double> mic, std::span<const double> ref,
            std::vector<double>& out);

  // Zero-pads to the last frame covering the input and drains the overlap
  // tail. Output past the pushed length is dropped. The engine is then
  // reset for a new stream.
  void finish(std::vector<double>& out);

  void set_frame_callback(std::function<void(const EngineFrame&)> cb) {
    on_frame_ = std::move(cb);
  }

 private:
  void run_frame(std::vector<double>& out);
  void reset();

  EngineConfig cfg_;
  dsp::StftGeometry geometry_;
  model::Model<float> model_;
  model::StreamState<float> state_;
  dsp::StreamingStft mic_stft_, ref_stft_;
  std::unique_ptr<dsp::StreamingIstft> synth_;
  std::vector<double> mic_buf_, ref_buf_;  // samples from the next frame start
  std::vector<std::complex<double>> mic_spec_, ref_spec_;
  std::deque<double> vad_hist_;
  std::size_t received_ = 0, emitted_ = 0, frames_ = 0;
  std::function<void(const EngineFrame&)> on_frame_;
};

EngineResult engine_process(const dsp::AudioBuffer& mic,
                            const dsp::AudioBuffer& ref,
                            const model::ModelConfig& model_cfg,
                            const model::ModelParams& params,
                            const EngineConfig& cfg);

// Whole-utterance forward pass followed by the same masking and synthesis.
EngineResult offline_process(const dsp::AudioBuffer& mic,
                             const dsp::AudioBuffer& ref,
                             const model::ModelConfig& model_cfg,
                             const model::ModelParams& params,
                             const EngineConfig& cfg);

}  // namespace e2eaec::runtime
