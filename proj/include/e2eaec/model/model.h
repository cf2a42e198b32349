#pragma once

#include <complex>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "e2eaec/dsp/stft.h"
#include "e2eaec/model/config.h"
#include "e2eaec/model/params.h"
#include "e2eaec/numcore/graph.h"

// Feature maps are stored channels-last as [T, F, C]; complex spectra as
// [T, F, 2] (real, imag).
namespace e2eaec::model {

using numcore::Graph;
using numcore::Tensor;
using numcore::Var;

// Parameters bound onto a graph, looked up by name.
template <typename T>
class BoundParams {
 public:
  BoundParams() = default;
  BoundParams(Graph<T>& g, const numcore::NamedTensors<T>& params,
              bool trainable);
  explicit BoundParams(std::map<std::string, Var<T>> vars)
      : vars_(std::move(vars)) {}

  const Var<T>& operator()(const std::string& name) const;
  const std::map<std::string, Var<T>>& all() const { return vars_; }

 private:
  std::map<std::string, Var<T>> vars_;
};

template <typename T>
struct BlockState {
  Tensor<T> time_hist;  // [F, kernel-1, C] inputs preceding the chunk
  Tensor<T> hidden;     // [F, N] time-GRU state
};

template <typename T>
struct StreamState {
  bool initialized = false;
  std::size_t frames = 0;
  std::vector<BlockState<T>> mic_enc, ref_enc, fusion;
  Tensor<T> ref_ring;  // [n, F, C], n = min(frames, H), oldest first
  Tensor<T> corr_hist; // [H, align_kernel-1, C] correlation rows
  Tensor<T> mic_hist;  // [ccm_kt-1, F, 2]

  std::size_t ring_frames() const {
    return ref_ring.rank() == 3 ? ref_ring.dim(0) : 0;
  }
};

template <typename T>
StreamState<T> initial_state(const ModelConfig& cfg);

// One RNN block: a causal time sub-block (per bin) followed by a frequency
// sub-block (per frame, low to high), each unfold -> GRU -> linear with a
// residual connection. `state` supplies and receives the time context.
template <typename T>
Var<T> rnn_block(const Var<T>& x, BlockState<T>& state,
                 const BoundParams<T>& p, const std::string& prefix,
                 const ModelConfig& cfg);

// Input projection to C channels followed by the branch's RNN blocks
// ("mic" or "ref"). Each block output is appended to `layers` if given.
template <typename T>
Var<T> encode_features(const Var<T>& spec_features,
                       std::vector<BlockState<T>>& states,
                       const BoundParams<T>& p, const std::string& branch,
                       const ModelConfig& cfg,
                       std::vector<Var<T>>* layers = nullptr);

template <typename T>
struct Alignment {
  Var<T> aligned;      // [T, F, C]
  Var<T> attention;    // [T, H]
  Var<T> correlation;  // [T, H, C], sum over F of Y * lagged R
  Var<T> delay;        // [T], expected lag in frames
};

// Attention alignment of `ref_feat` to `mic_feat`. `ring` holds preceding
// ref features (oldest first) and is replaced by the most recent H frames.
// A `forced` [T, H] attention bypasses the learned weights. With
// align_kernel > 1 the logits come from a causal convolution along time of
// the correlation; `corr_hist` carries its last align_kernel-1 rows (zeros
// when null).
template <typename T>
Alignment<T> align_attention(const Var<T>& mic_feat, const Var<T>& ref_feat,
                             Tensor<T>& ring, const BoundParams<T>& p,
                             const ModelConfig& cfg,
                             const Tensor<T>* forced = nullptr,
                             Tensor<T>* corr_hist = nullptr);

// out[t, f] = sum_{tau, phi} M[t, f, tau, phi] * S[t - tau, f + phi - Kf/2]
// (complex). mask [T, F, Kt*Kf*2] laid out (tau, phi, re/im); spec
// [P + T, F, 2] with P preceding frames; zero outside the spectrum.
template <typename T>
Var<T> apply_ccm(const Var<T>& mask, const Var<T>& spec, std::size_t kt,
                 std::size_t kf);

template <typename T>
Var<T> ccm_head(const Var<T>& x, const BoundParams<T>& p,
                const std::string& name);

// Mean over F, linear C -> 1, sigmoid. Returns [T].
template <typename T>
Var<T> vad_head(const Var<T>& x, const BoundParams<T>& p);

template <typename T>
struct GraphOutputs {
  Var<T> spec1, spec2;  // [T, F, 2]
  Var<T> vad;           // [T]
  Var<T> attention;     // [T, H]
  Var<T> delay;         // [T]
};

// Network input for a [T, F, 2] spectrum per the configured feature set.
template <typename T>
Tensor<T> input_features(const Tensor<T>& spec, const ModelConfig& cfg);

// Runs the network over a chunk of frames continuing from `state`. Offline
// inference and training call it once on a fresh state; streaming calls it
// once per frame.
template <typename T>
GraphOutputs<T> forward_chunk(Graph<T>& g, const BoundParams<T>& p,
                              const ModelConfig& cfg, const Tensor<T>& mic,
                              const Tensor<T>& ref, StreamState<T>& state);

template <typename T>
Tensor<T> spectrogram_tensor(const dsp::Spectrogram& spec);
template <typename T>
dsp::Spectrogram tensor_spectrogram(const Tensor<T>& t,
                                    const dsp::StftGeometry& geometry);

struct ModelOutputs {
  dsp::Spectrogram spec1, spec2;
  std::vector<double> vad;
  std::vector<double> attention;  // T x H row-major
  std::size_t max_delay = 0;
  std::vector<double> expected_delay;
};

struct StepOutput {
  std::vector<std::complex<double>> spec1, spec2;
  double vad = 0.0;
  double delay = 0.0;
  std::vector<double> attention;  // H values
};

// Inference wrapper: parameters are bound once into a private graph that is
// rewound after every call.
template <typename T>
class Model {
 public:
  Model(ModelConfig cfg, const ModelParams& params);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return cfg_; }
  StreamState<T> initial_state() const { return model::initial_state<T>(cfg_); }

  ModelOutputs forward(const dsp::Spectrogram& mic,
                       const dsp::Spectrogram& ref);

  // One frame of F bins per signal. Throws ContractError for a state that
  // did not come from initial_state().
  StepOutput step(std::span<const std::complex<double>> mic,
                  std::span<const std::complex<double>> ref,
                  StreamState<T>& state);

 private:
  ModelConfig cfg_;
  Graph<T> graph_;
  BoundParams<T> params_;
  std::size_t mark_ = 0;
};

ModelOutputs forward(const dsp::Spectrogram& mic, const dsp::Spectrogram& ref,
                     const ModelParams& params, const ModelConfig& cfg);

}  // namespace e2eaec::model
