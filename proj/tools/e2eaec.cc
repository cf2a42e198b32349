#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "e2eaec/cli/run_config.h"
#include "e2eaec/datasynth/dataset.h"
#include "e2eaec/datasynth/vad.h"
#include "e2eaec/dsp/gcc_phat.h"
#include "e2eaec/error.h"
#include "e2eaec/laec/nlms.h"
#include "e2eaec/model/params.h"
#include "e2eaec/runtime/checkpoint.h"
#include "e2eaec/runtime/engine.h"
#include "e2eaec/runtime/wav.h"
#include "e2eaec/train/gradcheck_suite.h"
#include "e2eaec/train/trainer.h"

namespace fs = std::filesystem;
using namespace e2eaec;
using cli::RunConfig;
using cli::UsageError;

namespace {

struct Common {
  std::string config_file;
  std::vector<std::string> sets;
  std::string out;
};

void add_common(CLI::App* sub, Common& c, bool needs_out = true) {
  sub->add_option("--config", c.config_file, "key=value config file");
  sub->add_option("--set", c.sets, "override one key (key=value), repeatable");
  auto* o = sub->add_option("--out", c.out, "output directory");
  if (needs_out) o->required();
}

std::string exact(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

void require_file(const std::string& path, const char* flag) {
  if (!fs::is_regular_file(path)) throw UsageError(std::string(flag) + ": no such file " + path);
}

void require_dir(const std::string& path, const char* flag) {
  if (!fs::is_directory(path)) throw UsageError(std::string(flag) + ": no such directory " + path);
}

// Defaults < config file < --set < dedicated flags (applied by the caller).
RunConfig build_config(const Common& c) {
  RunConfig cfg;
  if (!c.config_file.empty()) {
    require_file(c.config_file, "--config");
    cfg.load_file(c.config_file);
  }
  for (const auto& s : c.sets) cfg.set(s);
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

void prepare_out(const Common& c, const RunConfig& cfg) {
  fs::create_directories(c.out);
  write_text(fs::path(c.out) / "config.txt", cfg.echo());
}

double frame_ms(const RunConfig& cfg) {
  const auto geo = dsp::StftGeometry::for_rate(cfg.sample_rate());
  return 1000.0 * static_cast<double>(geo.hop) / cfg.sample_rate();
}

model::ModelParams load_model(const std::string& path, const model::ModelConfig& mc) {
  require_file(path, "--checkpoint");
  auto p = runtime::checkpoint_load(path);
  model::check_params(mc, p);
  return p;
}

struct Inference {
  runtime::EngineResult result;
  double bulk_frames = 0.0;  // hybrid front-end delay
};

// E2E feeds the engine directly; HYBRID runs the linear front end first and
// reports total delays (bulk + residual).
Inference infer_signals(const RunConfig& cfg, const model::ModelConfig& mc,
                        const model::ModelParams& params, const dsp::AudioBuffer& mic,
                        const dsp::AudioBuffer& ref) {
  const auto tc = cfg.train_config();
  const auto ec = cfg.engine_config();
  Inference inf;
  if (tc.mode == train::TrainMode::kE2E) {
    inf.result = runtime::engine_process(mic, ref, mc, params, ec);
    return inf;
  }
  const auto geo = dsp::StftGeometry::for_rate(ec.sample_rate);
  const auto h = laec::hybrid_frontend(mic, ref, mc.max_delay * geo.hop, tc.nlms);
  inf.result = runtime::engine_process(h.error, h.aligned_ref, mc, params, ec);
  inf.bulk_frames = static_cast<double>(h.bulk_delay) / geo.hop;
  for (double& d : inf.result.delay) d += inf.bulk_frames;
  return inf;
}

dsp::AudioBuffer read_wav_checked(const std::string& path, const char* flag, int rate) {
  require_file(path, flag);
  auto a = runtime::wav_read(path);
  if (a.sample_rate != rate) {
    throw UsageError(std::string(flag) + ": " + path + " is " + std::to_string(a.sample_rate) +
                     " Hz, config sample_rate is " + std::to_string(rate));
  }
  return a;
}

int cmd_synth(const Common& c, const RunConfig& cfg) {
  const auto dc = cfg.dataset_config();
  const auto threads = static_cast<unsigned>(cfg.count("synth.threads"));
  prepare_out(c, cfg);
  const auto ds = datasynth::synth_dataset(dc, threads);
  datasynth::write_dataset(c.out, ds);
  std::printf("wrote %zu examples to %s\n", ds.size(), c.out.c_str());
  return 0;
}

int cmd_train(const Common& c, const RunConfig& cfg, const std::string& data,
              const std::string& init) {
  require_dir(data, "--data");
  if (!init.empty()) require_file(init, "--init");
  const auto mc = cfg.model_config();
  auto tc = cfg.train_config();
  prepare_out(c, cfg);
  const auto ds = datasynth::load_dataset(data);
  if (ds.empty()) throw UsageError("--data: no examples in " + data);
  std::vector<train::PreparedExample> prepared;
  for (const auto& ex : ds) {
    if (ex.mic.sample_rate != cfg.sample_rate()) {
      throw UsageError("--data: examples are " + std::to_string(ex.mic.sample_rate) +
                       " Hz, config sample_rate is " + std::to_string(cfg.sample_rate()));
    }
    prepared.push_back(train::prepare_example(ex, mc, tc.mode, tc.nlms));
  }
  auto params = model::init_params(mc, cfg.count("train.init_seed"));
  if (!init.empty()) {
    const auto rep = model::transfer_init(params, runtime::checkpoint_load(init));
    std::printf("init from %s: %zu of %zu tensors copied\n", init.c_str(), rep.copied.size(),
                params.size());
  }
  tc.log_path = (fs::path(c.out) / "loss.csv").string();
  std::printf("training %zu parameters on %zu examples, %zu steps (%s, %s delay loss)\n",
              model::param_count(mc), prepared.size(), tc.steps, train::to_string(tc.mode),
              train::to_string(tc.delay_mode));
  const auto res = train::train(mc, std::move(params), prepared, tc, [&](const train::StepRecord& s) {
    if (s.step % 25 == 0 || s.step + 1 == tc.steps) {
      std::printf("step %5zu  loss %12.4f  grad %10.3f\n", s.step, s.loss.total, s.grad_norm);
      std::fflush(stdout);
    }
  });
  runtime::checkpoint_save(res.params, (fs::path(c.out) / "model.ckpt").string());
  if (res.log.size() >= 21) {
    const auto d = train::loss_decrease(res.log);
    std::printf("loss %.4f -> %.4f (decrease %.1f%%)\n", d.first, d.last, 100.0 * d.decrease);
  }
  return 0;
}

int cmd_infer(const Common& c, const RunConfig& cfg, const std::string& ckpt,
              const std::string& mic_path, const std::string& ref_path) {
  const auto mc = cfg.model_config();
  const int rate = cfg.sample_rate();
  const auto mic = read_wav_checked(mic_path, "--mic", rate);
  const auto ref = read_wav_checked(ref_path, "--ref", rate);
  if (mic.size() != ref.size()) {
    throw UsageError("--mic has " + std::to_string(mic.size()) + " samples, --ref " +
                     std::to_string(ref.size()));
  }
  const auto params = load_model(ckpt, mc);
  prepare_out(c, cfg);
  const auto inf = infer_signals(cfg, mc, params, mic, ref);
  const fs::path out(c.out);
  runtime::wav_write((out / "enhanced.wav").string(), inf.result.enhanced,
                     runtime::WavEncoding::kFloat32);
  std::ofstream f(out / "frames.csv");
  f << "frame,time_s,vad,delay_ms,masked\n";
  const double ms = frame_ms(cfg);
  for (std::size_t t = 0; t < inf.result.vad.size(); ++t) {
    f << t << ',' << t * ms / 1000.0 << ',' << inf.result.vad[t] << ','
      << inf.result.delay[t] * ms << ',' << inf.result.masked[t] << '\n';
  }
  std::printf("wrote %s\n", (out / "enhanced.wav").c_str());
  return 0;
}

int cmd_eval(const Common& c, const RunConfig& cfg, const std::string& ckpt,
             const std::string& data) {
  require_dir(data, "--data");
  const auto mc = cfg.model_config();
  const auto params = load_model(ckpt, mc);
  const std::size_t skip = cfg.count("eval.skip_frames");
  prepare_out(c, cfg);
  const auto ds = datasynth::load_dataset(data);
  const auto geo = dsp::StftGeometry::for_rate(cfg.sample_rate());
  const double ms = frame_ms(cfg);

  std::string report = "file erle_all_db erle_farend_db delay_err_ms delay_frames\n";
  std::vector<double> errs;
  char line[256];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& ex = ds[i];
    if (ex.mic.sample_rate != cfg.sample_rate()) {
      throw UsageError("--data: examples are " + std::to_string(ex.mic.sample_rate) + " Hz");
    }
    const auto inf = infer_signals(cfg, mc, params, ex.mic, ex.ref);
    const double all = runtime::erle(ex.mic, inf.result.enhanced);
    // Far-end single talk: near end silent by label, far end active.
    const auto ref_vad = datasynth::energy_vad(ex.ref, geo.frame_len, geo.hop);
    std::vector<int> active(ex.vad_labels.size(), 0);
    bool any = false;
    for (std::size_t t = 0; t < active.size() && t < ref_vad.size(); ++t) {
      active[t] = ex.vad_labels[t] == 0 && ref_vad[t] == 1;
      any = any || active[t];
    }
    double fe = NAN;
    if (any) {
      try {
        fe = runtime::erle(ex.mic, inf.result.enhanced, active);
      } catch (const ContractError&) {
      }
    }
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t t = skip; t < ex.delay_labels.size() && t < inf.result.delay.size(); ++t) {
      if (ex.delay_labels[t] < 0) continue;
      const double e = (inf.result.delay[t] - ex.delay_labels[t]) * ms;
      errs.push_back(e);
      sum += e;
      ++n;
    }
    std::snprintf(line, sizeof line, "%05zu %.2f %s %s %zu\n", i, all,
                  std::isnan(fe) ? "n/a" : std::to_string(fe).c_str(),
                  n ? std::to_string(sum / n).c_str() : "n/a", n);
    report += line;
  }
  double mean = 0.0, var = 0.0;
  for (double e : errs) mean += e;
  if (!errs.empty()) mean /= errs.size();
  for (double e : errs) var += (e - mean) * (e - mean);
  if (!errs.empty()) var /= errs.size();
  std::snprintf(line, sizeof line, "delay error: mean %.2f ms, variance %.2f ms^2 over %zu frames\n",
                mean, var, errs.size());
  report += line;
  write_text(fs::path(c.out) / "report.txt", report);
  std::fputs(report.c_str(), stdout);
  return 0;
}

int cmd_tde(const Common& c, const RunConfig& cfg, const std::string& ckpt) {
  const auto mc = cfg.model_config();
  const std::string method = cfg.get("tde.method");
  if (method != "model" && method != "gcc") throw UsageError("tde.method must be model or gcc");
  model::ModelParams params;
  if (method == "model") {
    if (ckpt.empty()) throw UsageError("tde with method=model needs --checkpoint");
    params = load_model(ckpt, mc);
  }
  const int rate = cfg.sample_rate();
  const double delay_ms = cfg.number("tde.delay_ms");
  prepare_out(c, cfg);
  const auto ex = datasynth::make_scene_example(rate, cfg.number("tde.duration_s"), delay_ms,
                                                cfg.number("tde.noise_at_s"),
                                                cfg.number("tde.talk_at_s"),
                                                cfg.count("tde.seed"), mc.max_delay);
  const auto geo = dsp::StftGeometry::for_rate(rate);
  const std::size_t frames = geo.frames_for(ex.mic.size());
  std::vector<double> est(frames, 0.0);
  if (method == "model") {
    const auto inf = infer_signals(cfg, mc, params, ex.mic, ex.ref);
    for (std::size_t t = 0; t < frames; ++t) est[t] = inf.result.delay[t] * frame_ms(cfg);
  } else {
    const std::size_t max_delay =
        std::min(mc.max_delay * geo.hop, static_cast<std::size_t>(rate) - 1);
    const auto g = dsp::gcc_phat(ex.mic, ex.ref, dsp::GccPhatConfig::for_rate(rate, max_delay));
    const auto gc = dsp::GccPhatConfig::for_rate(rate, max_delay);
    // Each frame takes the latest window that has ended by the frame's end.
    std::size_t w = 0;
    for (std::size_t t = 0; t < frames; ++t) {
      const std::size_t end = t * geo.hop + geo.frame_len;
      while (w + 1 < g.size() && g[w + 1].window_start + gc.window_len <= end) ++w;
      est[t] = g.empty() ? 0.0 : 1000.0 * static_cast<double>(g[w].delay) / rate;
    }
  }
  std::ofstream f(fs::path(c.out) / "tde.csv");
  f << "time_s,estimate_ms,truth_ms\n";
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  const std::size_t skip = cfg.count("eval.skip_frames");
  for (std::size_t t = 0; t < frames; ++t) {
    f << t * frame_ms(cfg) / 1000.0 << ',' << est[t] << ',' << delay_ms << '\n';
    if (t >= skip) {
      const double e = est[t] - delay_ms;
      sum += e;
      sq += e * e;
      ++n;
    }
  }
  if (n) {
    const double mean = sum / n;
    std::printf("tde (%s): mean error %.2f ms, variance %.2f ms^2 over %zu frames\n",
                method.c_str(), mean, sq / n - mean * mean, n);
  }
  return 0;
}

int cmd_gradcheck(const Common& c) {
  const auto results = train::run_gradcheck_suite();
  std::string table;
  char line[160];
  bool ok = true;
  for (const auto& r : results) {
    std::snprintf(line, sizeof line, "%-28s rel %.3e  abs %.3e  n %4zu  %s\n", r.name.c_str(),
                  r.max_rel_error, r.max_abs_error, r.checked, r.passed ? "PASS" : "FAIL");
    table += line;
    ok = ok && r.passed;
  }
  std::fputs(table.c_str(), stdout);
  if (!c.out.empty()) {
    fs::create_directories(c.out);
    write_text(fs::path(c.out) / "gradcheck.txt", table);
  }
  if (!ok) {
    std::fprintf(stderr, "error: gradient check failed\n");
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Streaming neural acoustic echo canceller"};
  app.require_subcommand(1);

  Common synth_c, train_c, infer_c, eval_c, tde_c, grad_c;
  std::optional<std::size_t> n_examples, steps;
  std::optional<std::uint64_t> seed;
  std::optional<double> lr, delay_ms;
  std::optional<std::string> method;
  std::string data, init, ckpt, mic, ref;

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  add_common(synth, synth_c);
  synth->add_option("--n", n_examples, "examples (synth.count)");
  synth->add_option("--seed", seed, "dataset seed (synth.seed)");

  auto* trn = app.add_subcommand("train", "train a model on a dataset");
  add_common(trn, train_c);
  trn->add_option("--data", data, "dataset directory")->required();
  trn->add_option("--init", init, "checkpoint to initialise from by parameter name");
  trn->add_option("--steps", steps, "train.steps");
  trn->add_option("--lr", lr, "train.lr");

  auto* inf = app.add_subcommand("infer", "cancel echo in one mic/ref pair");
  add_common(inf, infer_c);
  inf->add_option("--checkpoint", ckpt, "model checkpoint")->required();
  inf->add_option("--mic", mic, "microphone WAV")->required();
  inf->add_option("--ref", ref, "far-end reference WAV")->required();

  auto* ev = app.add_subcommand("eval", "ERLE and delay report over a dataset");
  add_common(ev, eval_c);
  ev->add_option("--checkpoint", ckpt, "model checkpoint")->required();
  ev->add_option("--data", data, "dataset directory")->required();

  auto* tde = app.add_subcommand("tde", "per-frame delay estimates on a scene clip");
  add_common(tde, tde_c);
  tde->add_option("--checkpoint", ckpt, "model checkpoint (method=model)");
  tde->add_option("--delay-ms", delay_ms, "tde.delay_ms");
  tde->add_option("--method", method, "tde.method (model or gcc)");

  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of every op");
  add_common(gc, grad_c, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  }

  try {
    if (synth->parsed()) {
      auto cfg = build_config(synth_c);
      if (n_examples) cfg.set("synth.count", std::to_string(*n_examples));
      if (seed) cfg.set("synth.seed", std::to_string(*seed));
      return cmd_synth(synth_c, cfg);
    }
    if (trn->parsed()) {
      auto cfg = build_config(train_c);
      if (steps) cfg.set("train.steps", std::to_string(*steps));
      if (lr) cfg.set("train.lr", exact(*lr));
      return cmd_train(train_c, cfg, data, init);
    }
    if (inf->parsed()) return cmd_infer(infer_c, build_config(infer_c), ckpt, mic, ref);
    if (ev->parsed()) return cmd_eval(eval_c, build_config(eval_c), ckpt, data);
    if (tde->parsed()) {
      auto cfg = build_config(tde_c);
      if (delay_ms) cfg.set("tde.delay_ms", exact(*delay_ms));
      if (method) cfg.set("tde.method", *method);
      return cmd_tde(tde_c, cfg, ckpt);
    }
    if (gc->parsed()) {
      build_config(grad_c);
      return cmd_gradcheck(grad_c);
    }
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
