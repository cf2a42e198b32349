#include "e2eaec/train/trainer.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <stdexcept>

#include "e2eaec/error.h"
#include "e2eaec/model/model.h"
#include "e2eaec/numcore/adam.h"

namespace e2eaec::train {

const char* to_string(TrainMode mode) { return mode == TrainMode::kE2E ? "e2e" : "hybrid"; }
const char* to_string(DelayMode mode) { return mode == DelayMode::kMse ? "mse" : "ce"; }

TrainMode train_mode_from_string(const std::string& s) {
  if (s == "e2e") return TrainMode::kE2E;
  if (s == "hybrid") return TrainMode::kHybrid;
  throw ContractError("unknown training mode '" + s + "' (expected e2e or hybrid)");
}

DelayMode delay_mode_from_string(const std::string& s) {
  if (s == "mse") return DelayMode::kMse;
  if (s == "ce") return DelayMode::kCe;
  throw ContractError("unknown delay loss '" + s + "' (expected mse or ce)");
}

PreparedExample prepare_example(const datasynth::TrainingExample& ex,
                                const model::ModelConfig& cfg, TrainMode mode,
                                const laec::NlmsConfig& nlms) {
  const auto geo = dsp::StftGeometry::for_rate(ex.mic.sample_rate);
  if (geo.bins() != cfg.bins) {
    throw ContractError("example at " + std::to_string(ex.mic.sample_rate) + " Hz gives " +
                        std::to_string(geo.bins()) + " bins, model expects " +
                        std::to_string(cfg.bins));
  }
  PreparedExample p;
  p.targets.geometry = geo;
  p.targets.out_len = ex.mic.size();
  p.targets.target1 = ex.target_stage1.samples;
  p.targets.target2 = ex.target_stage2.samples;
  p.targets.vad_labels = ex.vad_labels;
  p.targets.delay_labels = ex.delay_labels;
  if (mode == TrainMode::kE2E) {
    p.mic = dsp::stft(ex.mic, geo);
    p.ref = dsp::stft(ex.ref, geo);
    return p;
  }
  const std::size_t max_delay = cfg.max_delay * geo.hop;
  auto h = laec::hybrid_frontend(ex.mic, ex.ref, max_delay, nlms);
  p.bulk_delay = h.bulk_delay;
  p.mic = dsp::stft(h.error, geo);
  p.ref = dsp::stft(h.aligned_ref, geo);
  const double bulk_frames = static_cast<double>(h.bulk_delay) / static_cast<double>(geo.hop);
  for (int& l : p.targets.delay_labels) {
    if (l < 0) continue;
    const long r = std::lround(static_cast<double>(l) - bulk_frames);
    l = r < 0 ? -1 : static_cast<int>(std::min<long>(r, static_cast<long>(cfg.max_delay) - 1));
  }
  return p;
}

LossValues loss_and_grads(const model::ModelConfig& cfg, const model::ModelParams& params,
                          const PreparedExample& ex, const LossWeights& w, DelayMode mode,
                          model::ModelParams* grads) {
  numcore::Graph<float> g(grads != nullptr);
  model::BoundParams<float> bound(g, params, grads != nullptr);
  auto state = model::initial_state<float>(cfg);
  auto out = model::forward_chunk(g, bound, cfg, model::spectrogram_tensor<float>(ex.mic),
                                  model::spectrogram_tensor<float>(ex.ref), state);
  auto terms = total_loss(out, ex.targets, w, mode);
  const LossValues v = values_of(terms);
  const std::pair<const char*, double> named[] = {
      {"spec1", v.spec1}, {"spec2", v.spec2}, {"delay", v.delay}, {"vad", v.vad}, {"total", v.total}};
  for (const auto& [name, val] : named) {
    if (!std::isfinite(val)) {
      throw std::runtime_error(std::string("non-finite ") + name + " loss (" +
                               std::to_string(val) + ")");
    }
  }
  if (grads) {
    g.backward(terms.total);
    *grads = model::ModelParams();
    for (const auto& name : params.names()) {
      const auto* gr = g.grad(bound(name));
      grads->add(name, gr ? *gr : numcore::Tensor<float>(params.get(name).shape()));
    }
  }
  return v;
}

TrainResult train(const model::ModelConfig& cfg, model::ModelParams params,
                  const std::vector<PreparedExample>& data, const TrainConfig& tc,
                  const std::function<void(const StepRecord&)>& on_step) {
  if (data.empty()) throw ContractError("train: dataset is empty");
  cfg.validate();
  model::check_params(cfg, params);
  tc.weights.validate();

  std::ofstream log;
  if (!tc.log_path.empty()) {
    log.open(tc.log_path, std::ios::app);
    if (!log) throw FormatError(FormatError::Kind::kIo, "cannot open loss log " + tc.log_path);
    log << "step,example,total,spec1,spec2,delay,vad,grad_norm\n";
    log << std::setprecision(9);
  }

  numcore::AdamConfig ac;
  ac.lr = tc.lr;
  ac.clip_norm = tc.clip_norm;
  numcore::Adam<float> adam(ac);
  std::mt19937_64 rng(tc.seed);
  std::vector<std::size_t> order(data.size());
  TrainResult res;
  for (std::size_t step = 0; step < tc.steps; ++step) {
    const std::size_t pos = step % data.size();
    if (pos == 0) {
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
    }
    const std::size_t idx = order[pos];
    model::ModelParams grads;
    StepRecord rec;
    rec.step = step;
    rec.example = idx;
    try {
      rec.loss = loss_and_grads(cfg, params, data[idx], tc.weights, tc.delay_mode, &grads);
    } catch (const std::runtime_error& e) {
      throw std::runtime_error("step " + std::to_string(step) + ", example " +
                               std::to_string(idx) + ": " + e.what());
    }
    rec.grad_norm = adam.step(params, grads);
    if (log) {
      log << rec.step << ',' << rec.example << ',' << rec.loss.total << ',' << rec.loss.spec1
          << ',' << rec.loss.spec2 << ',' << rec.loss.delay << ',' << rec.loss.vad << ','
          << rec.grad_norm << '\n';
    }
    res.log.push_back(rec);
    if (on_step) on_step(rec);
  }
  res.params = std::move(params);
  return res;
}

LossDecrease loss_decrease(const std::vector<StepRecord>& log, std::size_t head,
                           std::size_t tail) {
  if (log.size() < std::max(head, tail) || head == 0 || tail == 0) {
    throw ContractError("loss_decrease: log has " + std::to_string(log.size()) + " steps");
  }
  LossDecrease d;
  for (std::size_t i = 0; i < head; ++i) d.first += log[i].loss.total;
  for (std::size_t i = log.size() - tail; i < log.size(); ++i) d.last += log[i].loss.total;
  d.first /= static_cast<double>(head);
  d.last /= static_cast<double>(tail);
  d.decrease = d.first != 0.0 ? (d.first - d.last) / std::abs(d.first) : 0.0;
  return d;
}

std::size_t steps_to_decrease(const std::vector<StepRecord>& log, double target,
                              std::size_t head, std::size_t tail) {
  if (log.size() < head + tail) return log.size();
  double first = 0.0;
  for (std::size_t i = 0; i < head; ++i) first += log[i].loss.total;
  first /= static_cast<double>(head);
  double window = 0.0;
  for (std::size_t i = 0; i < log.size(); ++i) {
    window += log[i].loss.total;
    if (i >= tail) window -= log[i - tail].loss.total;
    if (i + 1 >= head + tail && i + 1 >= tail) {
      const double last = window / static_cast<double>(tail);
      if (first != 0.0 && (first - last) / std::abs(first) >= target) return i + 1;
    }
  }
  return log.size();
}

std::size_t steps_to_level(const std::vector<StepRecord>& log, double level,
                           std::size_t tail) {
  if (tail == 0) throw ContractError("steps_to_level: tail must be positive");
  double window = 0.0;
  for (std::size_t i = 0; i < log.size(); ++i) {
    window += log[i].loss.total;
    if (i >= tail) window -= log[i - tail].loss.total;
    if (i + 1 >= tail && window / static_cast<double>(tail) <= level) return i + 1;
  }
  return log.size();
}

}  // namespace e2eaec::train
