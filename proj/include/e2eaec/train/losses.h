#pragma once

#include <cstddef>
#include <vector>

#include "e2eaec/dsp/audio.h"
#include "e2eaec/dsp/stft.h"
#include "e2eaec/model/model.h"
#include "e2eaec/numcore/graph.h"

namespace e2eaec::train {

using numcore::Graph;
using numcore::Tensor;
using numcore::Var;

enum class DelayMode { kMse, kCe };

struct LossWeights {
  double spec1 = 1.0;
  double spec2 = 1.0;
  double delay = 100.0;
  double vad = 1.0;
  double modulation = 0.1;  // blend inside each spectrum term
  double snr = 0.9;

  // Defaults with the delay weight for the given mode (100 MSE, 1 CE).
  static LossWeights for_mode(DelayMode mode);
  void validate() const;
};

inline constexpr double kSnrEps = 1e-8;
inline constexpr double kSnrClamp = 50.0;
inline constexpr std::size_t kModWindow = 32;
inline constexpr std::size_t kModHop = 16;
inline constexpr double kLogEps = 1e-12;

// Overlap-add synthesis of a [T, F, 2] spectrum with the dsp::istft window
// and normalisation; output [out_len].
template <typename T>
Var<T> istft_op(const Var<T>& spec, const dsp::StftGeometry& geometry,
                std::size_t out_len);

// -10 log10(|t|^2 / (|t - e|^2 + eps)) clamped to [-50, 50]. The gradient
// is zero where the clamp is active.
template <typename T>
Var<T> snr_loss(const Var<T>& est, const Tensor<T>& target);
double snr_loss(const dsp::AudioBuffer& est, const dsp::AudioBuffer& target);

// Magnitude envelope of each bin, |DFT| over 32-frame windows with hop 16
// (17 modulation bins), mean absolute difference. Fewer than 32 frames use
// one zero-padded window.
template <typename T>
Var<T> modulation_loss(const Var<T>& est_spec, const Tensor<T>& target_spec);

// Mean over frames with label >= 0. `empty` is set when no frame is valid,
// in which case the loss is 0.
template <typename T>
Var<T> delay_loss_mse(const Var<T>& delay, const std::vector<int>& labels,
                      bool* empty = nullptr);
// Mean of -log(A[t, label] + 1e-12) over valid frames. Throws ContractError
// on a label >= H.
template <typename T>
Var<T> delay_loss_ce(const Var<T>& attention, const std::vector<int>& labels,
                     bool* empty = nullptr);

// Mean binary cross-entropy with probabilities clamped to [1e-12, 1 - 1e-12].
template <typename T>
Var<T> vad_bce(const Var<T>& pred, const std::vector<int>& labels);

struct LossTargets {
  dsp::StftGeometry geometry;
  std::size_t out_len = 0;
  std::vector<double> target1, target2;  // waveforms
  std::vector<int> vad_labels;
  std::vector<int> delay_labels;
};

template <typename T>
struct LossTerms {
  Var<T> total, spec1, spec2, delay, vad;
  bool delay_empty = false;
};

struct LossValues {
  double total = 0, spec1 = 0, spec2 = 0, delay = 0, vad = 0;
};

template <typename T>
LossValues values_of(const LossTerms<T>& terms);

// total = w.spec1 * spec1 + w.spec2 * spec2 + w.delay * delay + w.vad * vad
template <typename T>
Var<T> combine_losses(const Var<T>& spec1, const Var<T>& spec2,
                      const Var<T>& delay, const Var<T>& vad,
                      const LossWeights& w);

// Spectrum term for one stage: modulation * mod(spec, stft(target)) +
// snr * snr(istft(spec), target).
template <typename T>
Var<T> spectrum_loss(const Var<T>& spec, const std::vector<double>& target,
                     const dsp::StftGeometry& geometry, std::size_t out_len,
                     const LossWeights& w);

template <typename T>
LossTerms<T> total_loss(const model::GraphOutputs<T>& out,
                        const LossTargets& targets, const LossWeights& w,
                        DelayMode mode);

}  // namespace e2eaec::train
