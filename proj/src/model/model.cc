#include "e2eaec/model/model.h"

#include <algorithm>
#include <cmath>

#include "e2eaec/numcore/ops.h"

namespace e2eaec::model {

using namespace numcore;

template <typename T>
BoundParams<T>::BoundParams(Graph<T>& g, const NamedTensors<T>& params,
                            bool trainable) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    vars_[params.names()[i]] =
        trainable ? g.parameter(params.at(i)) : g.constant(params.at(i));
  }
}

template <typename T>
const Var<T>& BoundParams<T>::operator()(const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) {
    throw ContractError("model parameter '" + name + "' is not bound");
  }
  return it->second;
}

template <typename T>
StreamState<T> initial_state(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t F = cfg.bins, C = cfg.channels, N = cfg.gru_hidden;
  const std::size_t K = cfg.unfold_kernel;
  auto blocks = [&](std::size_t n) {
    std::vector<BlockState<T>> v(n);
    for (auto& b : v) {
      b.time_hist = Tensor<T>({F, K - 1, C});
      b.hidden = Tensor<T>({F, N});
    }
    return v;
  };
  StreamState<T> s;
  s.initialized = true;
  s.mic_enc = blocks(cfg.enc_blocks);
  s.ref_enc = blocks(cfg.enc_blocks);
  s.fusion = blocks(cfg.fusion_blocks);
  s.ref_ring = Tensor<T>({0, F, C});
  s.corr_hist = Tensor<T>({cfg.max_delay, cfg.align_kernel - 1, C});
  s.mic_hist = Tensor<T>({cfg.ccm_kt - 1, F, 2});
  return s;
}

namespace {

// Last `n` entries along axis 1 of a [A, L, B] tensor.
template <typename T>
Tensor<T> tail_axis1(const Tensor<T>& x, std::size_t n) {
  const std::size_t A = x.dim(0), L = x.dim(1), B = x.dim(2);
  Tensor<T> out({A, n, B});
  for (std::size_t a = 0; a < A; ++a)
    std::copy_n(x.data() + (a * L + L - n) * B, n * B,
                out.data() + a * n * B);
  return out;
}

// Last `n` frames along axis 0.
template <typename T>
Tensor<T> tail_axis0(const Tensor<T>& x, std::size_t n) {
  Shape s = x.shape();
  const std::size_t row = numel(s) / s[0];
  Tensor<T> out(Shape{n, s[1], s[2]});
  std::copy_n(x.data() + (s[0] - n) * row, n * row, out.data());
  return out;
}

template <typename T>
Var<T> sub_block(const Var<T>& x_seq, const Var<T>& h0, const BoundParams<T>& p,
                 const std::string& prefix) {
  Var<T> h = gru_scan(x_seq, h0, p(prefix + ".gru.w_ih"),
                      p(prefix + ".gru.w_hh"), p(prefix + ".gru.b_ih"),
                      p(prefix + ".gru.b_hh"));
  return linear(h, p(prefix + ".proj.w"), p(prefix + ".proj.b"));
}

}  // namespace

template <typename T>
Var<T> rnn_block(const Var<T>& x, BlockState<T>& state,
                 const BoundParams<T>& p, const std::string& prefix,
                 const ModelConfig& cfg) {
  Graph<T>& g = x.graph();
  const std::size_t frames = x.dim(0), F = x.dim(1), C = x.dim(2);
  const std::size_t K = cfg.unfold_kernel, N = cfg.gru_hidden;
  if (C != cfg.channels || state.time_hist.shape() != Shape{F, K - 1, C} ||
      state.hidden.shape() != Shape{F, N}) {
    throw DimensionError("rnn_block '" + prefix + "': input " +
                         shape_str(x.shape()) + ", history " +
                         shape_str(state.time_hist.shape()) + ", hidden " +
                         shape_str(state.hidden.shape()));
  }

  // Time: one sequence per bin, unfolded over [history, chunk].
  Var<T> seq = concat(g.constant(state.time_hist), transpose01(x), 1);
  Var<T> win = unfold(seq, K, 1, 1, std::size_t{0});
  Var<T> gh = gru_scan(win, g.constant(state.hidden),
                       p(prefix + ".time.gru.w_ih"),
                       p(prefix + ".time.gru.w_hh"),
                       p(prefix + ".time.gru.b_ih"),
                       p(prefix + ".time.gru.b_hh"));
  Var<T> ty = linear(gh, p(prefix + ".time.proj.w"), p(prefix + ".time.proj.b"));
  Var<T> a = add(x, transpose01(ty));

  state.time_hist = tail_axis1(seq.value(), K - 1);
  state.hidden = tail_axis1(gh.value(), 1).reshaped({F, N});

  // Frequency: one sequence per frame, low to high bins.
  Var<T> fwin = unfold(a, K, 1, 1);
  Var<T> fy = sub_block(fwin, g.constant(Tensor<T>({frames, N})), p,
                        prefix + ".freq");
  return add(a, fy);
}

template <typename T>
Var<T> encode_features(const Var<T>& spec_features,
                       std::vector<BlockState<T>>& states,
                       const BoundParams<T>& p, const std::string& branch,
                       const ModelConfig& cfg, std::vector<Var<T>>* layers) {
  Var<T> y = linear(spec_features, p(branch + "_in.w"), p(branch + "_in.b"));
  for (std::size_t i = 0; i < states.size(); ++i) {
    y = rnn_block(y, states[i], p, branch + "_enc." + std::to_string(i), cfg);
    if (layers) layers->push_back(y);
  }
  return y;
}

template <typename T>
Alignment<T> align_attention(const Var<T>& mic_feat, const Var<T>& ref_feat,
                             Tensor<T>& ring, const BoundParams<T>& p,
                             const ModelConfig& cfg, const Tensor<T>* forced,
                             Tensor<T>* corr_hist) {
  Graph<T>& g = mic_feat.graph();
  const std::size_t frames = mic_feat.dim(0);
  const std::size_t H = cfg.max_delay;
  if (ref_feat.shape() != mic_feat.shape()) {
    throw DimensionError("align_attention: mic features " +
                         shape_str(mic_feat.shape()) + " vs ref features " +
                         shape_str(ref_feat.shape()));
  }
  Var<T> keys = ring.size() > 0 ? concat(g.constant(ring), ref_feat, 0)
                                : ref_feat;
  Alignment<T> out;
  out.correlation = lagged_correlation(mic_feat, keys, H);
  if (forced) {
    if (forced->shape() != Shape{frames, H}) {
      throw DimensionError("align_attention: forced attention " +
                           shape_str(forced->shape()) + ", expected " +
                           shape_str({frames, H}));
    }
    out.attention = g.constant(*forced);
  } else {
    Var<T> logits;
    if (cfg.align_kernel == 1) {
      logits = linear(out.correlation, p("align.w"), p("align.b"));
    } else {
      // Causal convolution along time for each lag.
      const std::size_t Ka = cfg.align_kernel, C = mic_feat.dim(2);
      Tensor<T> zero({H, Ka - 1, C});
      Tensor<T>& hist = corr_hist ? *corr_hist : zero;
      if (hist.shape() != Shape{H, Ka - 1, C}) {
        throw DimensionError("align_attention: correlation history " +
                             shape_str(hist.shape()));
      }
      Var<T> seq = concat(g.constant(hist), transpose01(out.correlation), 1);
      Var<T> win = unfold(seq, Ka, 1, 1, std::size_t{0});
      logits = transpose01(linear(win, p("align.w"), p("align.b")));
      hist = tail_axis1(seq.value(), Ka - 1);
    }
    out.attention = softmax(reshape(logits, {frames, H}));
  }
  out.aligned = lagged_mix(out.attention, keys);
  out.delay = expected_index(out.attention);
  ring = tail_axis0(keys.value(), std::min(keys.dim(0), H));
  return out;
}

template <typename T>
Var<T> apply_ccm(const Var<T>& mask, const Var<T>& spec, std::size_t kt,
                 std::size_t kf) {
  Graph<T>& g = mask.graph();
  const Shape& ms = mask.shape();
  const Shape& ss = spec.shape();
  if (ms.size() != 3 || ss.size() != 3 || ss[2] != 2 || ms[1] != ss[1] ||
      ms[2] != 2 * kt * kf || ss[0] < ms[0]) {
    throw DimensionError("apply_ccm: mask " + shape_str(ms) + " vs spectrum " +
                         shape_str(ss) + " for " + std::to_string(kt) + "x" +
                         std::to_string(kf) + " taps");
  }
  const std::size_t frames = ms[0], F = ms[1], P = ss[0] - frames;
  const std::size_t M = ms[2];
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(kf / 2);

  // Calls fn(mask offset, spec offset, out offset) for every contributing tap.
  auto for_taps = [=](auto&& fn) {
    for (std::size_t t = 0; t < frames; ++t)
      for (std::size_t f = 0; f < F; ++f)
        for (std::size_t tau = 0; tau < kt && tau <= P + t; ++tau) {
          const std::size_t st = P + t - tau;
          for (std::size_t phi = 0; phi < kf; ++phi) {
            const std::ptrdiff_t sf = static_cast<std::ptrdiff_t>(f + phi) - half;
            if (sf < 0 || sf >= static_cast<std::ptrdiff_t>(F)) continue;
            fn((t * F + f) * M + 2 * (tau * kf + phi),
               (st * F + static_cast<std::size_t>(sf)) * 2, (t * F + f) * 2);
          }
        }
  };

  Tensor<T> out({frames, F, 2});
  const T* m = mask.value().data();
  const T* s = spec.value().data();
  T* o = out.data();
  for_taps([&](std::size_t mo, std::size_t so, std::size_t oo) {
    o[oo] += m[mo] * s[so] - m[mo + 1] * s[so + 1];
    o[oo + 1] += m[mo] * s[so + 1] + m[mo + 1] * s[so];
  });

  int im = mask.id(), is = spec.id();
  return g.record(std::move(out), {im, is},
                  [=](Graph<T>& g, const Tensor<T>& go) {
                    const T* m = g.value(im).data();
                    const T* s = g.value(is).data();
                    T* gm = g.requires_grad(im) ? g.grad_buffer(im).data() : nullptr;
                    T* gs = g.requires_grad(is) ? g.grad_buffer(is).data() : nullptr;
                    const T* gr = go.data();
                    for_taps([&](std::size_t mo, std::size_t so, std::size_t oo) {
                      const T dr = gr[oo], di = gr[oo + 1];
                      if (gm) {
                        gm[mo] += dr * s[so] + di * s[so + 1];
                        gm[mo + 1] += -dr * s[so + 1] + di * s[so];
                      }
                      if (gs) {
                        gs[so] += dr * m[mo] + di * m[mo + 1];
                        gs[so + 1] += -dr * m[mo + 1] + di * m[mo];
                      }
                    });
                  });
}

template <typename T>
Var<T> ccm_head(const Var<T>& x, const BoundParams<T>& p,
                const std::string& name) {
  return linear(x, p(name + ".w"), p(name + ".b"));
}

template <typename T>
Var<T> vad_head(const Var<T>& x, const BoundParams<T>& p) {
  const std::size_t frames = x.dim(0);
  Var<T> pooled = mean_axis(x, 1);
  return reshape(sigmoid(linear(pooled, p("vad.w"), p("vad.b"))), {frames});
}

template <typename T>
Tensor<T> input_features(const Tensor<T>& spec, const ModelConfig& cfg) {
  if (cfg.features == InputFeatures::kReIm) return spec;
  const std::size_t frames = spec.dim(0), F = spec.dim(1);
  Tensor<T> out({frames, F, 3});
  for (std::size_t i = 0; i < frames * F; ++i) {
    const T re = spec[2 * i], im = spec[2 * i + 1];
    out[3 * i] = re;
    out[3 * i + 1] = im;
    out[3 * i + 2] = std::log1p(std::sqrt(re * re + im * im));
  }
  return out;
}

template <typename T>
GraphOutputs<T> forward_chunk(Graph<T>& g, const BoundParams<T>& p,
                              const ModelConfig& cfg, const Tensor<T>& mic,
                              const Tensor<T>& ref, StreamState<T>& state) {
  if (!state.initialized) {
    throw ContractError("stream state used before initialisation");
  }
  if (mic.rank() != 3 || mic.dim(2) != 2 || mic.dim(1) != cfg.bins ||
      ref.shape() != mic.shape()) {
    throw ContractError("model input: mic " + shape_str(mic.shape()) +
                        ", ref " + shape_str(ref.shape()) + ", expected [T, " +
                        std::to_string(cfg.bins) + ", 2] for both");
  }
  const std::size_t E = cfg.enc_blocks;
  std::vector<Var<T>> layers;
  Var<T> y = encode_features(g.constant(input_features(mic, cfg)),
                             state.mic_enc, p, "mic", cfg, &layers);
  Var<T> r = encode_features(g.constant(input_features(ref, cfg)),
                             state.ref_enc, p, "ref", cfg, &layers);

  Alignment<T> al =
      align_attention<T>(y, r, state.ref_ring, p, cfg, nullptr, &state.corr_hist);
  Var<T> z = linear(concat(y, al.aligned, 2), p("fuse_in.w"), p("fuse_in.b"));
  for (std::size_t i = 0; i < cfg.fusion_blocks; ++i) {
    z = rnn_block(z, state.fusion[i], p, "fusion." + std::to_string(i), cfg);
    layers.push_back(z);
  }
  auto tap = [&](std::size_t layer) {
    return layer <= 2 * E ? layers[std::min(layer, E) - 1] : layers[layer - 1];
  };

  Var<T> spec = concat(g.constant(state.mic_hist), g.constant(mic), 0);
  GraphOutputs<T> out;
  out.spec1 = apply_ccm(ccm_head(tap(cfg.mid_tap_layer), p, "ccm1"), spec,
                        cfg.ccm_kt, cfg.ccm_kf);
  out.spec2 = apply_ccm(ccm_head(z, p, "ccm2"), spec, cfg.ccm_kt, cfg.ccm_kf);
  out.vad = vad_head(tap(cfg.vad_tap_layer), p);
  out.attention = al.attention;
  out.delay = al.delay;

  state.mic_hist = tail_axis0(spec.value(), cfg.ccm_kt - 1);
  state.frames += mic.dim(0);
  return out;
}

template <typename T>
Tensor<T> spectrogram_tensor(const dsp::Spectrogram& spec) {
  Tensor<T> out({spec.frames(), spec.bins(), 2});
  for (std::size_t i = 0; i < spec.data().size(); ++i) {
    out[2 * i] = static_cast<T>(spec.data()[i].real());
    out[2 * i + 1] = static_cast<T>(spec.data()[i].imag());
  }
  return out;
}

template <typename T>
dsp::Spectrogram tensor_spectrogram(const Tensor<T>& t,
                                    const dsp::StftGeometry& geometry) {
  if (t.rank() != 3 || t.dim(2) != 2 || t.dim(1) != geometry.bins()) {
    throw DimensionError("spectrum tensor " + shape_str(t.shape()) +
                         " does not fit " + std::to_string(geometry.bins()) +
                         " bins");
  }
  dsp::Spectrogram out(geometry, t.dim(0));
  for (std::size_t i = 0; i < out.data().size(); ++i)
    out.data()[i] = {static_cast<double>(t[2 * i]),
                     static_cast<double>(t[2 * i + 1])};
  return out;
}

namespace {

template <typename T>
std::vector<double> to_doubles(const Tensor<T>& t) {
  return std::vector<double>(t.values().begin(), t.values().end());
}

// Rewinds the graph to its bound parameters on scope exit.
template <typename T>
struct Rewind {
  Graph<T>& g;
  std::size_t mark;
  ~Rewind() { g.truncate(mark); }
};

}  // namespace

template <typename T>
Model<T>::Model(ModelConfig cfg, const ModelParams& params)
    : cfg_(cfg), graph_(false) {
  cfg_.validate();
  check_params(cfg_, params);
  params_ = BoundParams<T>(graph_, cast_params<T>(params), false);
  mark_ = graph_.size();
}

template <typename T>
ModelOutputs Model<T>::forward(const dsp::Spectrogram& mic,
                               const dsp::Spectrogram& ref) {
  if (mic.frames() != ref.frames() || !(mic.geometry() == ref.geometry())) {
    throw ContractError("forward: mic has " + std::to_string(mic.frames()) +
                        " frames, ref " + std::to_string(ref.frames()) +
                        " (geometries must match)");
  }
  Rewind<T> rewind{graph_, mark_};
  StreamState<T> state = initial_state();
  auto out = forward_chunk(graph_, params_, cfg_, spectrogram_tensor<T>(mic),
                           spectrogram_tensor<T>(ref), state);
  ModelOutputs res;
  res.spec1 = tensor_spectrogram(out.spec1.value(), mic.geometry());
  res.spec2 = tensor_spectrogram(out.spec2.value(), mic.geometry());
  res.vad = to_doubles(out.vad.value());
  res.attention = to_doubles(out.attention.value());
  res.max_delay = cfg_.max_delay;
  res.expected_delay = to_doubles(out.delay.value());
  return res;
}

template <typename T>
StepOutput Model<T>::step(std::span<const std::complex<double>> mic,
                          std::span<const std::complex<double>> ref,
                          StreamState<T>& state) {
  if (!state.initialized) {
    throw ContractError("forward_stream_step: state not initialised");
  }
  if (mic.size() != cfg_.bins || ref.size() != cfg_.bins) {
    throw ContractError("forward_stream_step: frames need " +
                        std::to_string(cfg_.bins) + " bins");
  }
  Rewind<T> rewind{graph_, mark_};
  Tensor<T> m({1, cfg_.bins, 2}), r({1, cfg_.bins, 2});
  for (std::size_t f = 0; f < cfg_.bins; ++f) {
    m[2 * f] = static_cast<T>(mic[f].real());
    m[2 * f + 1] = static_cast<T>(mic[f].imag());
    r[2 * f] = static_cast<T>(ref[f].real());
    r[2 * f + 1] = static_cast<T>(ref[f].imag());
  }
  auto out = forward_chunk(graph_, params_, cfg_, m, r, state);
  StepOutput res;
  const auto& s1 = out.spec1.value();
  const auto& s2 = out.spec2.value();
  res.spec1.resize(cfg_.bins);
  res.spec2.resize(cfg_.bins);
  for (std::size_t f = 0; f < cfg_.bins; ++f) {
    res.spec1[f] = {static_cast<double>(s1[2 * f]),
                    static_cast<double>(s1[2 * f + 1])};
    res.spec2[f] = {static_cast<double>(s2[2 * f]),
                    static_cast<double>(s2[2 * f + 1])};
  }
  res.vad = static_cast<double>(out.vad.value()[0]);
  res.delay = static_cast<double>(out.delay.value()[0]);
  res.attention = to_doubles(out.attention.value());
  return res;
}

ModelOutputs forward(const dsp::Spectrogram& mic, const dsp::Spectrogram& ref,
                     const ModelParams& params, const ModelConfig& cfg) {
  Model<float> m(cfg, params);
  return m.forward(mic, ref);
}

#define E2EAEC_INSTANTIATE(T)                                                  \
  template class BoundParams<T>;                                               \
  template class Model<T>;                                                     \
  template StreamState<T> initial_state<T>(const ModelConfig&);                \
  template Var<T> rnn_block(const Var<T>&, BlockState<T>&,                     \
                            const BoundParams<T>&, const std::string&,         \
                            const ModelConfig&);                               \
  template Var<T> encode_features(const Var<T>&, std::vector<BlockState<T>>&,  \
                                  const BoundParams<T>&, const std::string&,   \
                                  const ModelConfig&, std::vector<Var<T>>*);   \
  template Alignment<T> align_attention(const Var<T>&, const Var<T>&,          \
                                        Tensor<T>&, const BoundParams<T>&,     \
                                        const ModelConfig&, const Tensor<T>*,  \
                                        Tensor<T>*);                           \
  template Var<T> apply_ccm(const Var<T>&, const Var<T>&, std::size_t,         \
                            std::size_t);                                      \
  template Var<T> ccm_head(const Var<T>&, const BoundParams<T>&,               \
                           const std::string&);                                \
  template Var<T> vad_head(const Var<T>&, const BoundParams<T>&);              \
  template Tensor<T> input_features(const Tensor<T>&, const ModelConfig&);     \
  template GraphOutputs<T> forward_chunk(Graph<T>&, const BoundParams<T>&,     \
                                         const ModelConfig&, const Tensor<T>&, \
                                         const Tensor<T>&, StreamState<T>&);   \
  template Tensor<T> spectrogram_tensor<T>(const dsp::Spectrogram&);           \
  template dsp::Spectrogram tensor_spectrogram(const Tensor<T>&,               \
                                               const dsp::StftGeometry&);

E2EAEC_INSTANTIATE(float)
E2EAEC_INSTANTIATE(double)

#undef E2EAEC_INSTANTIATE

}  // namespace e2eaec::model
