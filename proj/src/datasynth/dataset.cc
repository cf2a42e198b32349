#include "e2eaec/datasynth/dataset.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "e2eaec/datasynth/signals.h"
#include "e2eaec/error.h"
#include "e2eaec/runtime/wav.h"

namespace e2eaec::datasynth {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_range(const Range& r, const char* name) {
  if (!(r.lo <= r.hi) || !std::isfinite(r.lo) || !std::isfinite(r.hi)) {
    throw ContractError(std::string("dataset: bad range for ") + name);
  }
}

std::string stem(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%05zu", i);
  return buf;
}

void write_labels(const std::string& path, const TrainingExample& ex) {
  std::ofstream out(path);
  if (!out) throw FormatError(FormatError::Kind::kIo, "cannot write " + path);
  out << "vad";
  for (int v : ex.vad_labels) out << ' ' << v;
  out << "\ndelay";
  for (int v : ex.delay_labels) out << ' ' << v;
  out << '\n';
}

void read_labels(const std::string& path, TrainingExample& ex) {
  std::ifstream in(path);
  if (!in) throw FormatError(FormatError::Kind::kIo, "cannot read " + path);
  std::string line;
  bool got_vad = false, got_delay = false;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    std::vector<int> vals;
    int v;
    while (ss >> v) vals.push_back(v);
    if (!ss.eof()) throw FormatError(FormatError::Kind::kHeader, "bad label line in " + path);
    if (key == "vad") {
      ex.vad_labels = std::move(vals);
      got_vad = true;
    } else if (key == "delay") {
      ex.delay_labels = std::move(vals);
      got_delay = true;
    } else if (!key.empty()) {
      throw FormatError(FormatError::Kind::kHeader, "unknown label key '" + key + "' in " + path);
    }
  }
  if (!got_vad || !got_delay) {
    throw FormatError(FormatError::Kind::kHeader, "missing labels in " + path);
  }
}

}  // namespace

void DatasetConfig::validate() const {
  if (sample_rate <= 0) throw ContractError("dataset: sample rate must be positive");
  if (!(duration_s > 0.0)) throw ContractError("dataset: duration must be positive");
  check_range(delay_ms, "delay_ms");
  check_range(ser_db, "ser_db");
  check_range(snr_db, "snr_db");
  check_range(rt60_s, "rt60_s");
  if (delay_ms.lo < 0.0) throw ContractError("dataset: negative delay");
  if (rt60_s.lo < 0.05 || rt60_s.hi > 1.0) throw ContractError("dataset: rt60 outside [0.05, 1]");
  if (max_delay_frames == 0) throw ContractError("dataset: max_delay_frames must be positive");
  const double hop_ms = 10.0;
  if (delay_ms.hi > (static_cast<double>(max_delay_frames) - 0.5) * hop_ms) {
    throw ContractError("dataset: delay range exceeds max_delay_frames");
  }
  if (delay_ms.hi >= duration_s * 1000.0) throw ContractError("dataset: delay exceeds duration");
}

TrainingExample synth_example(const DatasetConfig& cfg, std::size_t index) {
  const std::uint64_t s = split_seed(cfg.seed, index);
  std::mt19937_64 rng(split_seed(s, 100));
  auto uni = [&](const Range& r) {
    return r.lo == r.hi ? r.lo : std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
  };
  auto coin = [&](double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; };

  const double delay = uni(cfg.delay_ms);
  const double ser = uni(cfg.ser_db);
  const double snr_draw = uni(cfg.snr_db);
  const double rt60 = uni(cfg.rt60_s);
  const bool single_talk = coin(cfg.single_talk_prob);
  const bool no_noise = coin(cfg.no_noise_prob);
  const bool clip = coin(cfg.clip_prob);

  const auto n = static_cast<std::size_t>(std::lround(cfg.duration_s * cfg.sample_rate));
  dsp::AudioBuffer speech = single_talk ? dsp::AudioBuffer(n, cfg.sample_rate)
                                        : speech_like(n, cfg.sample_rate, split_seed(s, 101));
  const auto noise = coloured_noise(n, cfg.sample_rate, split_seed(s, 102));
  const auto farend = speech_like(n, cfg.sample_rate, split_seed(s, 103));

  ExampleOptions opt;
  opt.max_delay_frames = cfg.max_delay_frames;
  if (clip) {
    double peak = 0.0;
    for (double v : farend.samples) peak = std::max(peak, std::abs(v));
    opt.clip_level = cfg.clip_level * peak;
  }
  return make_example(speech, noise, farend, delay, ser, no_noise ? kInfDb : snr_draw, rt60,
                      split_seed(s, 104), opt);
}

std::vector<TrainingExample> synth_dataset(const DatasetConfig& cfg, unsigned threads) {
  cfg.validate();
  std::vector<TrainingExample> out(cfg.count);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(cfg.count, 1)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (std::size_t i; (i = next++) < cfg.count;) {
      try {
        out[i] = synth_example(cfg, i);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

TrainingExample make_scene_example(int sample_rate, double duration_s, double delay_ms,
                                   double noise_at_s, double talk_at_s, std::uint64_t seed,
                                   std::size_t max_delay_frames) {
  const auto n = static_cast<std::size_t>(std::lround(duration_s * sample_rate));
  auto speech = speech_like(n, sample_rate, split_seed(seed, 1));
  auto noise = coloured_noise(n, sample_rate, split_seed(seed, 2));
  const auto farend = speech_like(n, sample_rate, split_seed(seed, 3));
  const auto talk_at = static_cast<std::size_t>(std::max(0.0, talk_at_s) * sample_rate);
  const auto noise_at = static_cast<std::size_t>(std::max(0.0, noise_at_s) * sample_rate);
  for (std::size_t i = 0; i < std::min(talk_at, n); ++i) speech[i] = 0.0;
  for (std::size_t i = 0; i < std::min(noise_at, n); ++i) noise[i] = 0.0;
  ExampleOptions opt;
  opt.max_delay_frames = max_delay_frames;
  const bool has_talk = talk_at < n;
  const bool has_noise = noise_at < n;
  return make_example(speech, noise, farend, delay_ms, has_talk ? 0.0 : kInfDb,
                      has_noise ? 15.0 : kInfDb, 0.3, split_seed(seed, 4), opt);
}

void write_dataset(const std::string& dir, const std::vector<TrainingExample>& examples) {
  fs::create_directories(dir);
  std::ofstream manifest(fs::path(dir) / "manifest.jsonl");
  if (!manifest) throw FormatError(FormatError::Kind::kIo, "cannot write manifest in " + dir);
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& ex = examples[i];
    const std::string st = stem(i);
    json rec = {{"mic", st + "_mic.wav"},
                {"ref", st + "_ref.wav"},
                {"target_stage1", st + "_t1.wav"},
                {"target_stage2", st + "_t2.wav"},
                {"labels", st + "_labels.txt"},
                {"delay_ms", ex.meta.delay_ms},
                {"ser_db", std::isfinite(ex.meta.ser_db) ? json(ex.meta.ser_db) : json(nullptr)},
                {"snr_db", std::isfinite(ex.meta.snr_db) ? json(ex.meta.snr_db) : json(nullptr)},
                {"rt60_s", ex.meta.rt60_s},
                {"seed", ex.meta.seed}};
    const auto put = [&](const char* key, const dsp::AudioBuffer& a) {
      runtime::wav_write((fs::path(dir) / rec[key].get<std::string>()).string(), a,
                         runtime::WavEncoding::kFloat32);
    };
    put("mic", ex.mic);
    put("ref", ex.ref);
    put("target_stage1", ex.target_stage1);
    put("target_stage2", ex.target_stage2);
    write_labels((fs::path(dir) / rec["labels"].get<std::string>()).string(), ex);
    manifest << rec.dump() << '\n';
  }
}

std::vector<TrainingExample> load_dataset(const std::string& dir) {
  const auto path = fs::path(dir) / "manifest.jsonl";
  std::ifstream in(path);
  if (!in) throw FormatError(FormatError::Kind::kIo, "cannot read " + path.string());
  std::vector<TrainingExample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw FormatError(FormatError::Kind::kHeader,
                        path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    try {
      TrainingExample ex;
      auto get = [&](const char* key) {
        return runtime::wav_read((fs::path(dir) / rec.at(key).get<std::string>()).string());
      };
      ex.mic = get("mic");
      ex.ref = get("ref");
      ex.target_stage1 = get("target_stage1");
      ex.target_stage2 = get("target_stage2");
      read_labels((fs::path(dir) / rec.at("labels").get<std::string>()).string(), ex);
      auto db = [&](const char* key) {
        return rec.at(key).is_null() ? kInfDb : rec.at(key).get<double>();
      };
      ex.meta = {rec.at("delay_ms").get<double>(), db("ser_db"), db("snr_db"),
                 rec.at("rt60_s").get<double>(), rec.at("seed").get<std::uint64_t>()};
      out.push_back(std::move(ex));
    } catch (const json::exception& e) {
      throw FormatError(FormatError::Kind::kHeader,
                        path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace e2eaec::datasynth
