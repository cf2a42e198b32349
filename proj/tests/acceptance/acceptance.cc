// Acceptance runner: one PASS/FAIL line per criterion. Tolerances and the
// toy-training recipe are fixed here. `acceptance 3 9` runs a subset.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "e2eaec/datasynth/dataset.h"
#include "e2eaec/datasynth/signals.h"
#include "e2eaec/datasynth/vad.h"
#include "e2eaec/dsp/gcc_phat.h"
#include "e2eaec/dsp/stft.h"
#include "e2eaec/error.h"
#include "e2eaec/laec/nlms.h"
#include "e2eaec/model/model.h"
#include "e2eaec/model/params.h"
#include "e2eaec/numcore/ops.h"
#include "e2eaec/runtime/checkpoint.h"
#include "e2eaec/runtime/engine.h"
#include "e2eaec/runtime/wav.h"
#include "e2eaec/train/gradcheck_suite.h"
#include "e2eaec/train/trainer.h"

using namespace e2eaec;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

dsp::AudioBuffer white(std::size_t n, int rate, std::uint64_t seed, double amp = 0.3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, amp);
  dsp::AudioBuffer a(n, rate);
  for (auto& v : a.samples) v = std::clamp(d(rng), -1.0, 1.0);
  return a;
}

dsp::AudioBuffer delayed(const dsp::AudioBuffer& x, std::size_t d) {
  dsp::AudioBuffer y(x.size(), x.sample_rate);
  for (std::size_t n = d; n < x.size(); ++n) y[n] = x[n - d];
  return y;
}

template <typename T>
numcore::Tensor<T> random_tensor(numcore::Shape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  numcore::Tensor<T> t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<T>(u(rng));
  return t;
}

model::ModelParams random_params(const model::ModelConfig& cfg, std::uint64_t seed) {
  auto p = model::init_params(cfg, seed);
  std::mt19937_64 rng(seed + 1);
  std::uniform_real_distribution<float> u(-0.3f, 0.3f);
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p.at(i).rank() == 1)
      for (float& v : p.at(i).values()) v = u(rng);
  return p;
}

// 1. Finite-difference checks of every differentiable op.
Outcome gradient_integrity() {
  const auto t0 = Clock::now();
  const auto results = train::run_gradcheck_suite();
  const double secs = seconds_since(t0);
  double worst = 0.0;
  std::string worst_name, failed;
  for (const auto& r : results) {
    if (r.max_rel_error >= worst) {
      worst = r.max_rel_error;
      worst_name = r.name;
    }
    if (!(r.passed && r.max_rel_error < 1e-4)) failed += " " + r.name;
  }
  return {failed.empty() && secs < 5.0,
          fmt("%zu ops, worst rel err %.2e (%s) < 1e-4%s, %.2f s < 5 s", results.size(), worst,
              worst_name.c_str(), failed.empty() ? "" : (", failed:" + failed).c_str(), secs)};
}

// 2. istft(stft(x)) on 100 random 1 s signals at 16 kHz.
Outcome stft_round_trip() {
  const auto t0 = Clock::now();
  const auto geo = dsp::StftGeometry::for_rate(16000);
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto x = white(16000, 16000, 100 + s, 0.5);
    const auto y = dsp::istft(dsp::stft(x, geo), x.size(), 16000);
    for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(x[i] - y[i]));
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-6 && secs < 10.0,
          fmt("max |istft(stft(x)) - x| = %.2e < 1e-6, %.2f s < 10 s", worst, secs)};
}

// 3. GCC-PHAT on pure delays and at 20 dB SNR.
Outcome gcc_phat_oracle() {
  const auto t0 = Clock::now();
  const int rate = 16000;
  const auto ref = white(4 * rate, rate, 31, 0.5);
  const auto cfg = dsp::GccPhatConfig::for_rate(rate, 12000);
  std::size_t exact = 0, windows = 0;
  for (std::size_t d : {std::size_t{0}, std::size_t{10}, std::size_t{240},
                        std::size_t{650 * rate / 1000}}) {
    const auto mic = delayed(ref, d);
    for (const auto& e : dsp::gcc_phat(mic, ref, cfg)) {
      if (e.window_start < d) continue;  // echo not yet present
      ++windows;
      exact += e.delay == d;
    }
  }
  const std::size_t d650 = 650 * rate / 1000;
  auto mic = delayed(ref, d650);
  const double ps = dsp::energy(mic) / static_cast<double>(mic.size() - d650);
  const auto noise = white(mic.size(), rate, 32, std::sqrt(ps / 100.0));
  for (std::size_t n = 0; n < mic.size(); ++n) mic[n] += noise[n];
  std::size_t hits = 0, total = 0;
  for (const auto& e : dsp::gcc_phat(mic, ref, cfg)) {
    if (e.window_start < d650) continue;
    ++total;
    hits += e.delay + 1 >= d650 && e.delay <= d650 + 1;
  }
  const double frac = total ? static_cast<double>(hits) / total : 0.0;
  const double secs = seconds_since(t0);
  return {exact == windows && windows > 0 && frac >= 0.95 && secs < 30.0,
          fmt("noiseless %zu/%zu windows exact; 650 ms at 20 dB SNR within +-1 sample in "
              "%.1f%% >= 95%% of %zu windows; %.2f s < 30 s",
              exact, windows, 100.0 * frac, total, secs)};
}

// 4. NLMS on a known 64-tap path.
Outcome nlms_erle() {
  const auto t0 = Clock::now();
  const std::size_t n = 160000;
  const auto ref = white(n, 16000, 2);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> h(64);
  for (std::size_t k = 0; k < h.size(); ++k) h[k] = d(rng) * std::exp(-static_cast<double>(k) / 16.0) * 0.5;
  dsp::AudioBuffer mic(n, 16000);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < h.size() && k <= i; ++k) mic[i] += h[k] * ref[i - k];
  laec::NlmsConfig nc;
  nc.taps = 64;
  const auto out = laec::nlms_run(mic, ref, nc);
  const double erle = laec::erle_db(mic, out.error, 3 * n / 4, n);
  const double secs = seconds_since(t0);
  return {erle >= 20.0 && secs < 30.0,
          fmt("steady-state ERLE %.1f dB >= 20 dB, %.2f s < 30 s", erle, secs)};
}

// 5. Alignment against a loop oracle, forced one-hot shifts and the
// expected-delay readout.
Outcome alignment_equations() {
  model::ModelConfig cfg;
  cfg.channels = 3;
  cfg.max_delay = 5;
  cfg.bins = 4;
  const std::size_t T = 9, F = 4, C = 3, H = 5;
  const auto Y = random_tensor<double>({T, F, C}, 41);
  const auto R = random_tensor<double>({T, F, C}, 42);
  const auto w = random_tensor<double>({C, 1}, 43);
  const auto b = random_tensor<double>({1}, 44);
  numcore::NamedTensors<double> np;
  np.add("align.w", w);
  np.add("align.b", b);
  numcore::Graph<double> g(false);
  model::BoundParams<double> p(g, np, false);
  numcore::Tensor<double> ring({0, F, C});
  const auto al = model::align_attention(g.constant(Y), g.constant(R), ring, p, cfg);

  double err = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    std::vector<double> logit(H, b[0]);
    for (std::size_t d = 0; d < H; ++d)
      for (std::size_t c = 0; c < C; ++c) {
        double dp = 0.0;
        for (std::size_t f = 0; f < F; ++f) dp += Y.at({t, f, c}) * (t >= d ? R.at({t - d, f, c}) : 0.0);
        logit[d] += w[c] * dp;
      }
    const double mx = *std::max_element(logit.begin(), logit.end());
    double z = 0.0;
    for (double l : logit) z += std::exp(l - mx);
    double expected = 0.0;
    std::vector<double> A(H);
    for (std::size_t d = 0; d < H; ++d) {
      A[d] = std::exp(logit[d] - mx) / z;
      expected += A[d] * d;
      err = std::max(err, std::abs(A[d] - al.attention.value().at({t, d})));
    }
    err = std::max(err, std::abs(expected - al.delay.value()[t]));
    for (std::size_t f = 0; f < F; ++f)
      for (std::size_t c = 0; c < C; ++c) {
        double r = 0.0;
        for (std::size_t d = 0; d < H && d <= t; ++d) r += A[d] * R.at({t - d, f, c});
        err = std::max(err, std::abs(r - al.aligned.value().at({t, f, c})));
      }
  }

  bool shifts = true;
  for (std::size_t d0 = 0; d0 < H; ++d0) {
    numcore::Tensor<double> forced({T, H});
    for (std::size_t t = 0; t < T; ++t) forced.at({t, d0}) = 1.0;
    numcore::Tensor<double> r2({0, F, C});
    const auto a2 = model::align_attention(g.constant(Y), g.constant(R), r2, p, cfg, &forced);
    for (std::size_t t = 0; t < T; ++t) {
      shifts = shifts && a2.delay.value()[t] == static_cast<double>(d0);
      for (std::size_t f = 0; f < F; ++f)
        for (std::size_t c = 0; c < C; ++c)
          shifts = shifts && a2.aligned.value().at({t, f, c}) == (t >= d0 ? R.at({t - d0, f, c}) : 0.0);
    }
  }
  bool readout = true;
  for (std::size_t k : {0u, 1u, 37u, 65u, 99u}) {
    numcore::Tensor<double> oh({1, 100});
    oh.at({0, k}) = 1.0;
    readout = readout && numcore::expected_index(g.constant(oh)).value()[0] == static_cast<double>(k);
  }
  return {err < 1e-6 && shifts && readout,
          fmt("oracle max err %.2e < 1e-6; one-hot shifts %s; one-hot expected delay %s", err,
              shifts ? "exact" : "WRONG", readout ? "exact" : "WRONG")};
}

// 6. Streaming engine against the offline pass, plus a causality probe.
Outcome streaming_equivalence() {
  const int rate = 16000;
  model::ModelConfig cfg;
  cfg.channels = 8;
  cfg.gru_hidden = 8;
  cfg.max_delay = 20;
  cfg.align_kernel = 4;
  cfg.fusion_blocks = 2;
  cfg.vad_tap_layer = 3;
  cfg.mid_tap_layer = 3;
  cfg.bins = dsp::StftGeometry::for_rate(rate).bins();
  const auto params = random_params(cfg, 61);
  runtime::EngineConfig ec;
  ec.sample_rate = rate;
  ec.vad_nospeech_threshold = 0.51;
  const auto mic = white(rate, rate, 62), ref = white(rate, rate, 63);
  const auto s = runtime::engine_process(mic, ref, cfg, params, ec);
  const auto o = runtime::offline_process(mic, ref, cfg, params, ec);
  double diff = 0.0;
  for (std::size_t i = 0; i < mic.size(); ++i)
    diff = std::max(diff, std::abs(s.enhanced[i] - o.enhanced[i]));

  const auto geo = dsp::StftGeometry::for_rate(rate);
  const std::size_t n = rate / 2;
  auto m2 = mic;
  m2[n] += 0.5;
  auto r2 = ref;
  r2[n] += 0.5;
  const auto pm = runtime::engine_process(m2, ref, cfg, params, ec);
  const auto pr = runtime::engine_process(mic, r2, cfg, params, ec);
  const std::size_t first = (n + 1 - geo.frame_len + geo.hop - 1) / geo.hop * geo.hop;
  bool causal = true, reacts = false;
  for (std::size_t i = 0; i < mic.size(); ++i) {
    if (i < first) {
      causal = causal && pm.enhanced[i] == s.enhanced[i] && pr.enhanced[i] == s.enhanced[i];
    } else {
      reacts = reacts || pm.enhanced[i] != s.enhanced[i];
    }
  }
  return {diff < 1e-5 && s.masked == o.masked && causal && reacts,
          fmt("max |stream - offline| = %.2e < 1e-5 over 1 s at 16 kHz; mask flags %s; "
              "perturbation at sample %zu leaves output before %zu unchanged: %s",
              diff, s.masked == o.masked ? "equal" : "DIFFER", n, first,
              causal && reacts ? "yes" : "NO")};
}

// 7. Total loss equals the weighted breakdown in both delay modes.
Outcome loss_composition() {
  model::ModelConfig cfg;
  cfg.channels = 4;
  cfg.gru_hidden = 4;
  cfg.max_delay = 12;
  cfg.fusion_blocks = 2;
  cfg.vad_tap_layer = 3;
  cfg.mid_tap_layer = 3;
  cfg.bins = dsp::StftGeometry::for_rate(1600).bins();
  datasynth::DatasetConfig dc;
  dc.count = 1;
  dc.duration_s = 1.0;
  dc.sample_rate = 1600;
  dc.delay_ms = {20.0, 80.0};
  dc.max_delay_frames = 12;
  dc.single_talk_prob = 0.0;
  dc.seed = 71;
  const auto ex = train::prepare_example(datasynth::synth_example(dc, 0), cfg,
                                         train::TrainMode::kE2E);
  const auto params = random_params(cfg, 72);
  double worst = 0.0;
  const auto wm = train::LossWeights::for_mode(train::DelayMode::kMse);
  const auto wc = train::LossWeights::for_mode(train::DelayMode::kCe);
  for (auto mode : {train::DelayMode::kMse, train::DelayMode::kCe}) {
    const auto w = train::LossWeights::for_mode(mode);
    const auto v = train::loss_and_grads(cfg, params, ex, w, mode, nullptr);
    const double sum = w.spec1 * v.spec1 + w.spec2 * v.spec2 + w.delay * v.delay + w.vad * v.vad;
    worst = std::max(worst, std::abs(v.total - sum) / std::max(1.0, std::abs(sum)));
  }
  const bool weights = wm.delay == 100.0 && wc.delay == 1.0 && wm.spec1 == 1.0 &&
                       wm.spec2 == 1.0 && wm.vad == 1.0;
  return {worst < 1e-6 && weights,
          fmt("|total - sum w_i L_i| = %.2e < 1e-6 (relative) in MSE and CE modes; delay "
              "weight %g (MSE) / %g (CE)",
              worst, wm.delay, wc.delay)};
}

// Toy training recipe shared by criteria 8 and 10.
struct ToyRecipe {
  int rate = 8000;
  std::size_t steps = 300;
  double lr = 1e-2;
  model::ModelConfig model;
  datasynth::DatasetConfig data;
  std::vector<double> heldout_ms{150.0, 300.0, 450.0, 700.0};
  std::size_t skip_frames = 100;

  ToyRecipe() {
    model.channels = 8;
    model.gru_hidden = 8;
    model.max_delay = 90;
    model.align_kernel = 32;
    model.fusion_blocks = 2;
    model.vad_tap_layer = 3;
    model.mid_tap_layer = 3;
    model.features = model::InputFeatures::kReImLogMag;
    model.bins = dsp::StftGeometry::for_rate(rate).bins();
    data.count = 16;
    data.duration_s = 4.0;
    data.sample_rate = rate;
    data.delay_ms = {100.0, 800.0};
    data.ser_db = {-10.0, 0.0};
    data.snr_db = {20.0, 40.0};
    data.single_talk_prob = 0.0;
    data.max_delay_frames = model.max_delay;
    data.seed = 7;
  }

  train::TrainConfig train_config(train::TrainMode mode) const {
    train::TrainConfig tc;
    tc.steps = steps;
    tc.lr = lr;
    tc.mode = mode;
    tc.nlms.taps = 256;
    return tc;
  }
};

struct ToyRun {
  train::TrainResult result;
  double seconds = 0.0;
};

ToyRun toy_train(const ToyRecipe& r, const std::vector<datasynth::TrainingExample>& ds,
                 train::TrainMode mode, model::ModelParams init, std::size_t steps) {
  const auto t0 = Clock::now();
  auto tc = r.train_config(mode);
  tc.steps = steps;
  std::vector<train::PreparedExample> prepared;
  for (const auto& ex : ds) prepared.push_back(train::prepare_example(ex, r.model, mode, tc.nlms));
  ToyRun run;
  run.result = train::train(r.model, std::move(init), prepared, tc);
  run.seconds = seconds_since(t0);
  return run;
}

struct ToyState {
  ToyRecipe recipe;
  std::vector<datasynth::TrainingExample> data;
  ToyRun e2e;
  double synth_seconds = 0.0;
  bool ready = false;
};

ToyState& toy_state() {
  static ToyState s;
  if (!s.ready) {
    const auto t0 = Clock::now();
    s.data = datasynth::synth_dataset(s.recipe.data);
    s.synth_seconds = seconds_since(t0);
    s.e2e = toy_train(s.recipe, s.data, train::TrainMode::kE2E,
                      model::init_params(s.recipe.model, 1), s.recipe.steps);
    s.ready = true;
  }
  return s;
}

// 8. Overfit run on 16 examples, then delay accuracy on held-out clips.
Outcome toy_training() {
  auto& s = toy_state();
  const auto& r = s.recipe;
  const auto dec = train::loss_decrease(s.e2e.result.log);
  model::Model<float> m(r.model, s.e2e.result.params);
  double err = 0.0;
  std::size_t n = 0;
  std::string per_clip;
  const auto t0 = Clock::now();
  for (double dm : r.heldout_ms) {
    auto hc = r.data;
    hc.count = 1;
    hc.seed = 1000 + static_cast<std::uint64_t>(dm);
    hc.delay_ms = {dm, dm};
    const auto ex = datasynth::synth_example(hc, 0);
    const auto pe = train::prepare_example(ex, r.model, train::TrainMode::kE2E);
    const auto out = m.forward(pe.mic, pe.ref);
    const double truth = dm / (1000.0 * pe.targets.geometry.hop / r.rate);
    double e = 0.0;
    std::size_t k = 0;
    for (std::size_t t = r.skip_frames; t < out.expected_delay.size(); ++t) {
      if (ex.delay_labels[t] < 0) continue;
      e += std::abs(out.expected_delay[t] - truth);
      ++k;
    }
    err += e;
    n += k;
    per_clip += fmt(" %.0fms:%.2f", dm, k ? e / k : NAN);
  }
  const double mean = n ? err / n : INFINITY;
  const double secs = s.synth_seconds + s.e2e.seconds + seconds_since(t0);
  return {dec.decrease >= 0.9 && mean < 2.0 && secs < 900.0,
          fmt("loss decrease %.1f%% >= 90%%; held-out mean |expected delay - truth| %.2f "
              "frames < 2 over %zu frames (per clip%s); %.0f s < 900 s",
              100.0 * dec.decrease, mean, n, per_clip.c_str(), secs)};
}

// 9. Masking energy identity on far-end-only input with an oracle VAD.
Outcome vad_masking_identity() {
  const auto t0 = Clock::now();
  const int rate = 16000;
  const auto geo = dsp::StftGeometry::for_rate(rate);
  const std::size_t len = 3 * rate;
  const dsp::AudioBuffer silent(len, rate);
  const auto far = datasynth::speech_like(len, rate, 91);
  const auto noise = dsp::AudioBuffer(len, rate);
  const auto ex = datasynth::make_example(silent, noise, far, 120.0, 0.0,
                                          datasynth::kInfDb, 0.3, 92);
  model::ModelConfig cfg;
  cfg.channels = 8;
  cfg.gru_hidden = 8;
  cfg.max_delay = 20;
  cfg.fusion_blocks = 2;
  cfg.vad_tap_layer = 3;
  cfg.mid_tap_layer = 3;
  cfg.bins = geo.bins();
  model::Model<float> m(cfg, random_params(cfg, 93));
  auto out = m.forward(dsp::stft(ex.mic, geo), dsp::stft(ex.ref, geo));
  const auto unmasked = dsp::istft(out.spec2, len, rate);

  // Oracle speech probability from the (silent) near-end target.
  const auto labels = datasynth::energy_vad(ex.target_stage2, geo.frame_len, geo.hop);
  std::vector<double> oracle(out.spec2.frames(), 0.0);
  for (std::size_t t = 0; t < oracle.size() && t < labels.size(); ++t) oracle[t] = labels[t];
  runtime::EngineConfig ec;
  ec.sample_rate = rate;
  auto spec = out.spec2;
  const auto flags = runtime::mask_spectrogram(spec, oracle, ec);
  const auto masked = dsp::istft(spec, len, rate);
  const double gain = runtime::erle(ex.mic, masked) - runtime::erle(ex.mic, unmasked);
  const double frac = static_cast<double>(std::count(flags.begin(), flags.end(), 1)) / flags.size();
  const double budget = -20.0 * std::log10(ec.mask_factor);
  const double secs = seconds_since(t0);
  return {gain >= 0.8 * budget && secs < 60.0,
          fmt("ERLE(masked) - ERLE(unmasked) = %.3f dB >= %.1f dB (%.0f%% of frames masked, "
              "budget %.1f dB); %.2f s < 60 s",
              gain, 0.8 * budget, 100.0 * frac, budget, secs)};
}

// 10. HYBRID checkpoint transfer and its effect on E2E training speed.
Outcome knowledge_transfer() {
  auto& s = toy_state();
  const auto& r = s.recipe;
  const std::size_t pre_steps = r.steps / 2;
  const auto pre = toy_train(r, s.data, train::TrainMode::kHybrid,
                             model::init_params(r.model, 1), pre_steps);
  const fs::path ck = fs::temp_directory_path() / "e2eaec_acceptance_hybrid.ckpt";
  runtime::checkpoint_save(pre.result.params, ck.string());
  auto init = model::init_params(r.model, 1);
  const auto rep = model::transfer_init(init, runtime::checkpoint_load(ck.string()));
  fs::remove(ck);
  const bool all = rep.copied.size() == init.size() && rep.skipped.empty() && rep.unused.empty();
  const auto tr = toy_train(r, s.data, train::TrainMode::kE2E, std::move(init), r.steps);

  // Both runs chase the same absolute level: a 90% decrease from the
  // random-init starting loss.
  const auto& base = s.e2e.result.log;
  const double level = 0.1 * train::loss_decrease(base).first;
  const std::size_t n_rand = train::steps_to_level(base, level);
  const std::size_t n_tr = train::steps_to_level(tr.result.log, level);
  const bool reached = n_rand < base.size();
  const bool faster = reached && static_cast<double>(n_tr) <= 0.8 * static_cast<double>(n_rand);
  return {all && faster,
          fmt("%zu/%zu tensors transferred; steps to loss %.1f: transfer %zu vs random %zu%s "
              "(need <= 0.8x); hybrid pretrain %zu steps %.0f s",
              rep.copied.size(), init.size(), level, n_tr, n_rand,
              reached ? "" : " (random init never reached it)", pre_steps, pre.seconds)};
}

// 11. Default parameter budget.
Outcome parameter_budget() {
  const model::ModelConfig cfg;
  const std::size_t n = model::param_count(cfg);
  const double rel = (static_cast<double>(n) - 1.2e6) / 1.2e6;
  return {std::abs(rel) <= 0.3,
          fmt("default model has %zu trainable parameters (%+.1f%% vs 1.2M, tolerance 30%%)", n,
              100.0 * rel)};
}

// 12. Bit-exact persistence and corrupted-file errors.
Outcome persistence() {
  const fs::path dir = fs::temp_directory_path() / "e2eaec_acceptance";
  fs::create_directories(dir);
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::vector<char>(std::istreambuf_iterator<char>(in), {});
  };
  auto spit = [](const fs::path& p, const std::vector<char>& b) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(b.data(), static_cast<std::streamsize>(b.size()));
  };
  auto kind = [](const std::function<void()>& fn) -> int {
    try {
      fn();
    } catch (const FormatError& e) {
      return static_cast<int>(e.kind());
    }
    return -1;
  };
  using K = FormatError::Kind;

  const model::ModelConfig cfg;
  const auto params = random_params(cfg, 121);
  const auto ck = dir / "model.ckpt";
  runtime::checkpoint_save(params, ck.string());
  const auto back = runtime::checkpoint_load(ck.string());
  bool ck_exact = back.names() == params.names();
  for (std::size_t i = 0; ck_exact && i < params.size(); ++i)
    ck_exact = back.at(i).shape() == params.at(i).shape() &&
               std::memcmp(back.at(i).data(), params.at(i).data(),
                           params.at(i).size() * sizeof(float)) == 0;

  auto audio = white(16000, 16000, 122, 0.4);
  for (auto& v : audio.samples) v = static_cast<float>(v);
  const auto wav = dir / "a.wav";
  runtime::wav_write(wav.string(), audio, runtime::WavEncoding::kFloat32);
  const auto wav_back = runtime::wav_read(wav.string());
  const bool wav_exact = wav_back.sample_rate == audio.sample_rate &&
                         wav_back.samples.size() == audio.samples.size() &&
                         std::memcmp(wav_back.samples.data(), audio.samples.data(),
                                     audio.size() * sizeof(double)) == 0;

  std::vector<std::string> bad;
  const auto bad_path = dir / "bad.bin";
  const auto ck_bytes = slurp(ck);
  auto expect = [&](const char* name, const std::vector<char>& bytes, bool is_wav, K want) {
    spit(bad_path, bytes);
    const int got = kind([&] {
      if (is_wav) {
        runtime::wav_read(bad_path.string());
      } else {
        runtime::checkpoint_load(bad_path.string());
      }
    });
    if (got != static_cast<int>(want)) bad.push_back(name);
  };
  auto magic = ck_bytes;
  magic[6] = '9';
  expect("ckpt magic", magic, false, K::kMagic);
  expect("ckpt truncated", std::vector<char>(ck_bytes.begin(), ck_bytes.end() - 8), false, K::kLength);
  std::string text(ck_bytes.begin(), ck_bytes.end());
  text.replace(text.find(" f32 "), 5, " i64 ");
  expect("ckpt dtype", std::vector<char>(text.begin(), text.end()), false, K::kDtype);

  const auto wav_bytes = slurp(wav);
  expect("wav header", std::vector<char>(wav_bytes.begin(), wav_bytes.begin() + 20), true, K::kHeader);
  auto riff = wav_bytes;
  riff[0] = 'X';
  expect("wav magic", riff, true, K::kMagic);
  expect("wav truncated", std::vector<char>(wav_bytes.begin(), wav_bytes.end() - 10), true, K::kLength);
  auto stereo = wav_bytes;
  stereo[22] = 2;
  expect("wav channels", stereo, true, K::kUnsupported);
  fs::remove_all(dir);

  std::string failures;
  for (const auto& b : bad) failures += " " + b;
  return {ck_exact && wav_exact && bad.empty(),
          fmt("checkpoint (%zu tensors) %s; float32 WAV %s; 7 corrupted fixtures%s", params.size(),
              ck_exact ? "bit-exact" : "DIFFERS", wav_exact ? "bit-exact" : "DIFFERS",
              bad.empty() ? " raise their designated errors" : (" wrong:" + failures).c_str())};
}

struct Criterion {
  int id;
  const char* name;
  Outcome (*run)();
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "gradient integrity", gradient_integrity},
      {2, "stft round trip", stft_round_trip},
      {3, "gcc-phat oracle", gcc_phat_oracle},
      {4, "nlms erle", nlms_erle},
      {5, "alignment equations", alignment_equations},
      {6, "streaming equivalence", streaming_equivalence},
      {7, "loss composition", loss_composition},
      {8, "toy training", toy_training},
      {9, "vad masking energy identity", vad_masking_identity},
      {10, "knowledge transfer", knowledge_transfer},
      {11, "parameter budget", parameter_budget},
      {12, "persistence", persistence},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s [%2d] %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
