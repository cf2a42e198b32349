#include "e2eaec/runtime/engine.h"

#include <algorithm>
#include <cmath>

#include "e2eaec/error.h"

namespace e2eaec::runtime {

void EngineConfig::validate() const {
  if (vad_smooth_frames == 0) {
    throw ContractError("engine: vad_smooth_frames must be positive");
  }
  if (!(mask_factor > 0.0 && mask_factor <= 1.0)) {
    throw ContractError("engine: mask_factor must lie in (0, 1]");
  }
  if (!(vad_nospeech_threshold > 0.5 && vad_nospeech_threshold < 1.0)) {
    throw ContractError("engine: vad_nospeech_threshold must lie in (0.5, 1)");
  }
  if (sample_rate <= 0) throw ContractError("engine: sample_rate must be positive");
}

double smoothed_speech_prob(std::span<const double> history,
                            const EngineConfig& cfg) {
  if (history.empty()) throw ContractError("vad_mask: empty probability history");
  const std::size_t n = std::min(history.size(), cfg.vad_smooth_frames);
  double sum = 0.0;
  for (std::size_t i = history.size() - n; i < history.size(); ++i) sum += history[i];
  return sum / static_cast<double>(n);
}

bool vad_mask(std::span<std::complex<double>> frame,
              std::span<const double> history, const EngineConfig& cfg) {
  if (!(1.0 - smoothed_speech_prob(history, cfg) > cfg.vad_nospeech_threshold)) {
    return false;
  }
  for (auto& c : frame) c *= cfg.mask_factor;
  return true;
}

std::vector<int> mask_spectrogram(dsp::Spectrogram& spec,
                                  std::span<const double> vad,
                                  const EngineConfig& cfg) {
  if (vad.size() != spec.frames()) {
    throw ContractError("mask_spectrogram: " + std::to_string(vad.size()) +
                        " probabilities for " + std::to_string(spec.frames()) + " frames");
  }
  std::vector<int> masked(spec.frames(), 0);
  for (std::size_t t = 0; t < spec.frames(); ++t) {
    const std::size_t lo = t + 1 > cfg.vad_smooth_frames ? t + 1 - cfg.vad_smooth_frames : 0;
    masked[t] = vad_mask(spec.frame(t), vad.subspan(lo, t + 1 - lo), cfg) ? 1 : 0;
  }
  return masked;
}

double erle(const dsp::AudioBuffer& mic, const dsp::AudioBuffer& enhanced,
            std::span<const int> active) {
  if (mic.size() != enhanced.size()) {
    throw ContractError("erle: mic has " + std::to_string(mic.size()) +
                        " samples, enhanced " + std::to_string(enhanced.size()));
  }
  const std::size_t hop = dsp::StftGeometry::for_rate(mic.sample_rate).hop;
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < mic.size(); ++i) {
    if (!active.empty()) {
      const std::size_t t = i / hop;
      if (t >= active.size() || active[t] == 0) continue;
    }
    num += mic[i] * mic[i];
    den += enhanced[i] * enhanced[i];
  }
  if (num <= 0.0) throw ContractError("erle: mic energy is zero over the measured frames");
  return 10.0 * std::log10(num / (den + 1e-12));
}

Engine::Engine(model::ModelConfig model_cfg, const model::ModelParams& params,
               EngineConfig cfg)
    : cfg_(std::move(cfg)),
      geometry_(dsp::StftGeometry::for_rate(cfg_.sample_rate)),
      model_(std::move(model_cfg), params),
      mic_stft_(geometry_),
      ref_stft_(geometry_),
      mic_spec_(geometry_.bins()),
      ref_spec_(geometry_.bins()) {
  cfg_.validate();
  if (model_.config().bins != geometry_.bins()) {
    throw ContractError("engine: model expects " + std::to_string(model_.config().bins) +
                        " bins, " + std::to_string(cfg_.sample_rate) + " Hz gives " +
                        std::to_string(geometry_.bins()));
  }
  reset();
}

void Engine::reset() {
  state_ = model_.initial_state();
  synth_ = std::make_unique<dsp::StreamingIstft>(geometry_);
  mic_buf_.clear();
  ref_buf_.clear();
  vad_hist_.clear();
  received_ = emitted_ = frames_ = 0;
}

void Engine::push(std::span<const double> mic, std::span<const double> ref,
                  std::vector<double>& out) {
  if (mic.size() != ref.size()) {
    throw ContractError("engine: mic chunk has " + std::to_string(mic.size()) +
                        " samples, ref " + std::to_string(ref.size()));
  }
  mic_buf_.insert(mic_buf_.end(), mic.begin(), mic.end());
  ref_buf_.insert(ref_buf_.end(), ref.begin(), ref.end());
  received_ += mic.size();
  while (mic_buf_.size() >= geometry_.frame_len) run_frame(out);
}

void Engine::run_frame(std::vector<double>& out) {
  const std::size_t L = geometry_.frame_len, hop = geometry_.hop;
  mic_stft_.analyze({mic_buf_.data(), L}, mic_spec_);
  ref_stft_.analyze({ref_buf_.data(), L}, ref_spec_);
  mic_buf_.erase(mic_buf_.begin(), mic_buf_.begin() + hop);
  ref_buf_.erase(ref_buf_.begin(), ref_buf_.begin() + hop);

  auto step = model_.step(mic_spec_, ref_spec_, state_);
  vad_hist_.push_back(step.vad);
  if (vad_hist_.size() > cfg_.vad_smooth_frames) vad_hist_.pop_front();
  bool masked = false;
  if (cfg_.vad_masking) {
    const std::vector<double> hist(vad_hist_.begin(), vad_hist_.end());
    masked = vad_mask(step.spec2, hist, cfg_);
  }
  auto samples = synth_->push(step.spec2);
  out.insert(out.end(), samples.begin(), samples.end());
  emitted_ += samples.size();
  if (on_frame_) on_frame_({frames_, step.vad, step.delay, masked});
  ++frames_;
}

void Engine::finish(std::vector<double>& out) {
  const std::size_t total = received_ == 0 ? 0 : geometry_.frames_for(received_);
  const std::size_t start = out.size();
  while (frames_ < total) {
    mic_buf_.resize(std::max(mic_buf_.size(), geometry_.frame_len), 0.0);
    ref_buf_.resize(mic_buf_.size(), 0.0);
    run_frame(out);
  }
  if (total > 0) {
    auto tail = synth_->flush();
    out.insert(out.end(), tail.begin(), tail.end());
    emitted_ += tail.size();
  }
  // Drop synthesis past the pushed input.
  if (emitted_ > received_) {
    const std::size_t excess = emitted_ - received_;
    out.resize(out.size() - std::min(excess, out.size() - start));
  }
  reset();
}

namespace {

void check_inputs(const dsp::AudioBuffer& mic, const dsp::AudioBuffer& ref,
                  const EngineConfig& cfg) {
  dsp::validate(mic, "mic");
  dsp::validate(ref, "ref");
  if (mic.sample_rate != ref.sample_rate || mic.sample_rate != cfg.sample_rate) {
    throw ContractError("engine: sample rates differ (mic " + std::to_string(mic.sample_rate) +
                        ", ref " + std::to_string(ref.sample_rate) + ", engine " +
                        std::to_string(cfg.sample_rate) + ")");
  }
  if (mic.size() != ref.size()) {
    throw ContractError("engine: mic has " + std::to_string(mic.size()) +
                        " samples, ref " + std::to_string(ref.size()));
  }
}

}  // namespace

EngineResult engine_process(const dsp::AudioBuffer& mic,
                            const dsp::AudioBuffer& ref,
                            const model::ModelConfig& model_cfg,
                            const model::ModelParams& params,
                            const EngineConfig& cfg) {
  check_inputs(mic, ref, cfg);
  Engine engine(model_cfg, params, cfg);
  EngineResult res;
  engine.set_frame_callback([&](const EngineFrame& f) {
    res.vad.push_back(f.vad);
    res.delay.push_back(f.delay);
    res.masked.push_back(f.masked ? 1 : 0);
  });
  std::vector<double> out;
  out.reserve(mic.size());
  const std::size_t hop = engine.geometry().hop;
  for (std::size_t i = 0; i < mic.size(); i += hop) {
    const std::size_t n = std::min(hop, mic.size() - i);
    engine.push({mic.samples.data() + i, n}, {ref.samples.data() + i, n}, out);
  }
  engine.finish(out);
  res.enhanced = dsp::AudioBuffer(std::move(out), mic.sample_rate);
  return res;
}

EngineResult offline_process(const dsp::AudioBuffer& mic,
                             const dsp::AudioBuffer& ref,
                             const model::ModelConfig& model_cfg,
                             const model::ModelParams& params,
                             const EngineConfig& cfg) {
  check_inputs(mic, ref, cfg);
  cfg.validate();
  const auto geometry = dsp::StftGeometry::for_rate(cfg.sample_rate);
  model::Model<float> m(model_cfg, params);
  auto out = m.forward(dsp::stft(mic, geometry), dsp::stft(ref, geometry));
  EngineResult res;
  res.vad = out.vad;
  res.delay = out.expected_delay;
  res.masked = cfg.vad_masking ? mask_spectrogram(out.spec2, res.vad, cfg)
                               : std::vector<int>(out.spec2.frames(), 0);
  res.enhanced = dsp::istft(out.spec2, mic.size(), mic.sample_rate);
  return res;
}

}  // namespace e2eaec::runtime
