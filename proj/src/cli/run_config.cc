#include "e2eaec/cli/run_config.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "e2eaec/dsp/stft.h"
#include "e2eaec/error.h"

namespace e2eaec::cli {

namespace {

// Shortest text that reads back to the same double.
std::string num(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<ConfigKey> build_reference() {
  const model::ModelConfig m;
  const datasynth::DatasetConfig d;
  const train::TrainConfig t;
  const runtime::EngineConfig e;
  const auto z = std::to_string(0);
  return {
      {"sample_rate", std::to_string(d.sample_rate), "audio rate in Hz; sets the STFT geometry"},
      {"model.channels", std::to_string(m.channels), "feature channels C"},
      {"model.gru_hidden", std::to_string(m.gru_hidden), "GRU hidden size N"},
      {"model.max_delay", std::to_string(m.max_delay), "attention lookback H in frames"},
      {"model.align_kernel", std::to_string(m.align_kernel), "causal taps of the attention logits"},
      {"model.enc_blocks", std::to_string(m.enc_blocks), "RNN blocks per encoder branch"},
      {"model.fusion_blocks", std::to_string(m.fusion_blocks), "RNN blocks after fusion"},
      {"model.unfold_kernel", std::to_string(m.unfold_kernel), "unfold width"},
      {"model.unfold_stride", std::to_string(m.unfold_stride), "unfold stride"},
      {"model.ccm_kt", std::to_string(m.ccm_kt), "complex mask taps along time"},
      {"model.ccm_kf", std::to_string(m.ccm_kf), "complex mask taps along frequency"},
      {"model.vad_tap_layer", std::to_string(m.vad_tap_layer), "layer feeding the VAD head"},
      {"model.mid_tap_layer", std::to_string(m.mid_tap_layer), "layer feeding the stage-1 mask"},
      {"model.features", model::to_string(m.features), "reim or reim_logmag"},
      {"synth.count", std::to_string(d.count), "examples"},
      {"synth.duration_s", num(d.duration_s), "clip length"},
      {"synth.delay_ms_min", num(d.delay_ms.lo), ""},
      {"synth.delay_ms_max", num(d.delay_ms.hi), ""},
      {"synth.ser_db_min", num(d.ser_db.lo), ""},
      {"synth.ser_db_max", num(d.ser_db.hi), ""},
      {"synth.snr_db_min", num(d.snr_db.lo), ""},
      {"synth.snr_db_max", num(d.snr_db.hi), ""},
      {"synth.rt60_s_min", num(d.rt60_s.lo), ""},
      {"synth.rt60_s_max", num(d.rt60_s.hi), ""},
      {"synth.single_talk_prob", num(d.single_talk_prob), "probability of a silent near end"},
      {"synth.no_noise_prob", num(d.no_noise_prob), ""},
      {"synth.clip_prob", num(d.clip_prob), "probability of far-end clipping"},
      {"synth.clip_level", num(d.clip_level), "clip level relative to the far-end peak"},
      {"synth.seed", std::to_string(d.seed), ""},
      {"synth.threads", z, "0 = hardware concurrency"},
      {"train.steps", std::to_string(t.steps), ""},
      {"train.lr", num(t.lr), "Adam step size"},
      {"train.clip_norm", num(t.clip_norm), "global gradient norm clip, 0 = off"},
      {"train.delay_loss", train::to_string(t.delay_mode), "mse or ce"},
      {"train.mode", train::to_string(t.mode), "e2e or hybrid"},
      {"train.seed", std::to_string(t.seed), "example order"},
      {"train.init_seed", "1", "parameter initialisation"},
      {"train.weight_spec1", num(t.weights.spec1), ""},
      {"train.weight_spec2", num(t.weights.spec2), ""},
      {"train.weight_delay", "auto", "auto = 100 for mse, 1 for ce"},
      {"train.weight_vad", num(t.weights.vad), ""},
      {"train.weight_modulation", num(t.weights.modulation), ""},
      {"train.weight_snr", num(t.weights.snr), ""},
      {"train.nlms_taps", std::to_string(t.nlms.taps), "hybrid front end"},
      {"train.nlms_mu", num(t.nlms.mu), ""},
      {"engine.vad_smooth_frames", std::to_string(e.vad_smooth_frames), ""},
      {"engine.vad_nospeech_threshold", num(e.vad_nospeech_threshold), ""},
      {"engine.mask_factor", num(e.mask_factor), "magnitude scale of masked frames"},
      {"engine.vad_masking", "true", ""},
      {"eval.skip_frames", "100", "frames ignored by the delay statistics"},
      {"tde.delay_ms", "650", ""},
      {"tde.duration_s", "10", ""},
      {"tde.noise_at_s", "4", ""},
      {"tde.talk_at_s", "7", ""},
      {"tde.seed", "1", ""},
      {"tde.method", "model", "model or gcc"},
  };
}

}  // namespace

const std::vector<ConfigKey>& config_reference() {
  static const std::vector<ConfigKey> ref = build_reference();
  return ref;
}

RunConfig::RunConfig() {
  for (const auto& k : config_reference()) values_.push_back(k.default_value);
}

std::size_t RunConfig::index_of(const std::string& key) const {
  const auto& ref = config_reference();
  for (std::size_t i = 0; i < ref.size(); ++i)
    if (ref[i].key == key) return i;
  throw UsageError("unknown config key '" + key + "'");
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  load_text(ss.str(), path);
}

void RunConfig::load_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(origin + ":" + std::to_string(n) + ": expected key=value");
    }
    try {
      set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const UsageError& e) {
      throw UsageError(origin + ":" + std::to_string(n) + ": " + e.what());
    }
  }
}

void RunConfig::set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw UsageError("expected key=value, got '" + assignment + "'");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void RunConfig::set(const std::string& key, const std::string& value) {
  values_[index_of(key)] = value;
}

const std::string& RunConfig::get(const std::string& key) const {
  return values_[index_of(key)];
}

double RunConfig::number(const std::string& key) const {
  const auto& s = get(key);
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw UsageError(key + ": '" + s + "' is not a number");
}

long long RunConfig::integer(const std::string& key) const {
  const auto& s = get(key);
  long long v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw UsageError(key + ": '" + s + "' is not an integer");
  }
  return v;
}

std::size_t RunConfig::count(const std::string& key) const {
  const long long v = integer(key);
  if (v < 0) throw UsageError(key + " must not be negative");
  return static_cast<std::size_t>(v);
}

bool RunConfig::boolean(const std::string& key) const {
  const auto& s = get(key);
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw UsageError(key + ": '" + s + "' is not true or false");
}

std::string RunConfig::echo() const {
  std::string out;
  const auto& ref = config_reference();
  for (std::size_t i = 0; i < ref.size(); ++i) out += ref[i].key + "=" + values_[i] + "\n";
  return out;
}

int RunConfig::sample_rate() const {
  const long long r = integer("sample_rate");
  if (r < 100 || r % 100 != 0) {
    throw UsageError("sample_rate must be a positive multiple of 100 Hz");
  }
  return static_cast<int>(r);
}

model::ModelConfig RunConfig::model_config() const {
  model::ModelConfig m;
  m.channels = count("model.channels");
  m.gru_hidden = count("model.gru_hidden");
  m.max_delay = count("model.max_delay");
  m.align_kernel = count("model.align_kernel");
  m.enc_blocks = count("model.enc_blocks");
  m.fusion_blocks = count("model.fusion_blocks");
  m.unfold_kernel = count("model.unfold_kernel");
  m.unfold_stride = count("model.unfold_stride");
  m.ccm_kt = count("model.ccm_kt");
  m.ccm_kf = count("model.ccm_kf");
  m.vad_tap_layer = count("model.vad_tap_layer");
  m.mid_tap_layer = count("model.mid_tap_layer");
  m.bins = dsp::StftGeometry::for_rate(sample_rate()).bins();
  try {
    m.features = model::input_features_from_string(get("model.features"));
    m.validate();
  } catch (const ContractError& e) {
    throw UsageError(e.what());
  }
  return m;
}

datasynth::DatasetConfig RunConfig::dataset_config() const {
  datasynth::DatasetConfig d;
  d.count = count("synth.count");
  d.duration_s = number("synth.duration_s");
  d.sample_rate = sample_rate();
  d.delay_ms = {number("synth.delay_ms_min"), number("synth.delay_ms_max")};
  d.ser_db = {number("synth.ser_db_min"), number("synth.ser_db_max")};
  d.snr_db = {number("synth.snr_db_min"), number("synth.snr_db_max")};
  d.rt60_s = {number("synth.rt60_s_min"), number("synth.rt60_s_max")};
  d.single_talk_prob = number("synth.single_talk_prob");
  d.no_noise_prob = number("synth.no_noise_prob");
  d.clip_prob = number("synth.clip_prob");
  d.clip_level = number("synth.clip_level");
  d.max_delay_frames = count("model.max_delay");
  d.seed = count("synth.seed");
  try {
    d.validate();
  } catch (const ContractError& e) {
    throw UsageError(e.what());
  }
  return d;
}

train::TrainConfig RunConfig::train_config() const {
  train::TrainConfig t;
  t.steps = count("train.steps");
  t.lr = number("train.lr");
  t.clip_norm = number("train.clip_norm");
  t.seed = count("train.seed");
  try {
    t.delay_mode = train::delay_mode_from_string(get("train.delay_loss"));
    t.mode = train::train_mode_from_string(get("train.mode"));
  } catch (const ContractError& e) {
    throw UsageError(e.what());
  }
  t.weights = train::LossWeights::for_mode(t.delay_mode);
  t.weights.spec1 = number("train.weight_spec1");
  t.weights.spec2 = number("train.weight_spec2");
  if (get("train.weight_delay") != "auto") t.weights.delay = number("train.weight_delay");
  t.weights.vad = number("train.weight_vad");
  t.weights.modulation = number("train.weight_modulation");
  t.weights.snr = number("train.weight_snr");
  t.nlms.taps = count("train.nlms_taps");
  t.nlms.mu = number("train.nlms_mu");
  try {
    t.weights.validate();
    t.nlms.validate();
  } catch (const ContractError& e) {
    throw UsageError(e.what());
  }
  return t;
}

runtime::EngineConfig RunConfig::engine_config() const {
  runtime::EngineConfig e;
  e.vad_smooth_frames = count("engine.vad_smooth_frames");
  e.vad_nospeech_threshold = number("engine.vad_nospeech_threshold");
  e.mask_factor = number("engine.mask_factor");
  e.vad_masking = boolean("engine.vad_masking");
  e.sample_rate = sample_rate();
  try {
    e.validate();
  } catch (const ContractError& ex) {
    throw UsageError(ex.what());
  }
  return e;
}

}  // namespace e2eaec::cli
