#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "e2eaec/datasynth/example.h"
#include "e2eaec/laec/nlms.h"
#include "e2eaec/model/config.h"
#include "e2eaec/model/params.h"
#include "e2eaec/train/losses.h"

namespace e2eaec::train {

enum class TrainMode { kE2E, kHybrid };

const char* to_string(TrainMode mode);
const char* to_string(DelayMode mode);
TrainMode train_mode_from_string(const std::string& s);
DelayMode delay_mode_from_string(const std::string& s);

struct TrainConfig {
  std::size_t steps = 300;
  double lr = 1e-3;
  double clip_norm = 5.0;
  DelayMode delay_mode = DelayMode::kMse;
  TrainMode mode = TrainMode::kE2E;
  std::uint64_t seed = 1;          // example order
  LossWeights weights = LossWeights::for_mode(DelayMode::kMse);
  laec::NlmsConfig nlms;           // HYBRID front end
  std::string log_path;            // per-step CSV, empty = none
};

// Model inputs and loss targets for one example. In HYBRID mode the mic is
// replaced by the NLMS error signal and the ref by the bulk-aligned ref;
// delay labels become residual lags (masked where negative).
struct PreparedExample {
  dsp::Spectrogram mic, ref;
  LossTargets targets;
  std::size_t bulk_delay = 0;  // samples, HYBRID only
};

PreparedExample prepare_example(const datasynth::TrainingExample& ex,
                                const model::ModelConfig& cfg, TrainMode mode,
                                const laec::NlmsConfig& nlms = {});

struct StepRecord {
  std::size_t step = 0;
  std::size_t example = 0;
  LossValues loss;
  double grad_norm = 0.0;
};

struct TrainResult {
  model::ModelParams params;
  std::vector<StepRecord> log;
};

// Loss and gradients of one example; `grads` receives one tensor per
// parameter. Throws std::runtime_error naming the term on a non-finite loss.
LossValues loss_and_grads(const model::ModelConfig& cfg,
                          const model::ModelParams& params,
                          const PreparedExample& ex, const LossWeights& w,
                          DelayMode mode, model::ModelParams* grads);

// Adam on one example per step, cycling through a seeded shuffle of the
// dataset each epoch. `on_step` is called after every update.
TrainResult train(const model::ModelConfig& cfg, model::ModelParams params,
                  const std::vector<PreparedExample>& data,
                  const TrainConfig& tc,
                  const std::function<void(const StepRecord&)>& on_step = {});

// Mean of the first `head` and of the last `tail` total losses, and the
// relative decrease (first - last) / |first|.
struct LossDecrease {
  double first = 0.0, last = 0.0, decrease = 0.0;
};
LossDecrease loss_decrease(const std::vector<StepRecord>& log,
                           std::size_t head = 5, std::size_t tail = 16);

// First step index at which the running decrease (first `head` steps vs the
// trailing `tail` window) reaches `target`; log.size() if never.
std::size_t steps_to_decrease(const std::vector<StepRecord>& log, double target,
                              std::size_t head = 5, std::size_t tail = 16);

// First step count after which the mean of the trailing `tail` total losses
// is at most `level`; log.size() if never.
std::size_t steps_to_level(const std::vector<StepRecord>& log, double level,
                           std::size_t tail = 16);

}  // namespace e2eaec::train
