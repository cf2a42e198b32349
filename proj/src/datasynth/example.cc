#include "e2eaec/datasynth/example.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "e2eaec/datasynth/signals.h"
#include "e2eaec/datasynth/vad.h"
#include "e2eaec/dsp/fft.h"
#include "e2eaec/dsp/gcc_phat.h"
#include "e2eaec/error.h"

namespace e2eaec::datasynth {

namespace {

double energy_of(const std::vector<double>& x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

}  // namespace

Room random_room(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto uni = [&](double a, double b) {
    return std::uniform_real_distribution<double>(a, b)(rng);
  };
  Room r;
  r.dims = {uni(3.0, 8.0), uni(3.0, 6.0), uni(2.5, 3.5)};
  for (int attempt = 0; attempt < 100; ++attempt) {
    for (int i = 0; i < 3; ++i) {
      r.source[i] = uni(0.5, r.dims[i] - 0.5);
      r.mic[i] = uni(0.5, r.dims[i] - 0.5);
    }
    double d = 0.0;
    for (int i = 0; i < 3; ++i) d += (r.source[i] - r.mic[i]) * (r.source[i] - r.mic[i]);
    if (std::sqrt(d) >= 0.5) break;
  }
  return r;
}

std::vector<int> delay_labels(const dsp::AudioBuffer& echo,
                              const dsp::AudioBuffer& ref,
                              const dsp::StftGeometry& geometry,
                              std::size_t max_delay_frames,
                              double min_confidence) {
  const std::size_t frames = geometry.frames_for(echo.size());
  std::vector<int> labels(frames, -1);
  const std::size_t len = std::min(echo.size(), ref.size());
  if (len < 2 || max_delay_frames == 0) return labels;

  auto cfg = dsp::GccPhatConfig::for_rate(ref.sample_rate, 0);
  cfg.window_len = std::min(2 * cfg.window_len, len);
  cfg.max_delay = std::min((max_delay_frames - 1) * geometry.hop + geometry.hop / 2,
                           cfg.window_len - 1);
  const auto est = dsp::gcc_phat(echo, ref, cfg);
  if (est.empty()) return labels;

  auto ref_active = energy_vad(ref, geometry.frame_len, geometry.hop);
  for (std::size_t t = 0; t < frames; ++t) {
    const double centre = static_cast<double>(t * geometry.hop + geometry.frame_len / 2);
    const double k = (centre - cfg.window_len / 2.0) / static_cast<double>(cfg.window_hop);
    const std::size_t w = static_cast<std::size_t>(
        std::clamp(std::round(k), 0.0, static_cast<double>(est.size() - 1)));
    if (est[w].confidence < min_confidence) continue;
    const std::size_t cls = dsp::discretize_delay(static_cast<double>(est[w].delay),
                                                  geometry.hop, max_delay_frames);
    if (cls > t) continue;
    if (t - cls >= ref_active.size() || !ref_active[t - cls]) continue;
    labels[t] = static_cast<int>(cls);
  }
  return labels;
}

TrainingExample make_example(const dsp::AudioBuffer& speech,
                             const dsp::AudioBuffer& noise,
                             const dsp::AudioBuffer& farend, double delay_ms,
                             double ser_db, double snr_db, double rt60_s,
                             std::uint64_t seed, const ExampleOptions& opt) {
  dsp::validate(speech, "make_example speech");
  dsp::validate(noise, "make_example noise");
  dsp::validate(farend, "make_example farend");
  const int rate = speech.sample_rate;
  if (noise.sample_rate != rate || farend.sample_rate != rate) {
    throw ContractError("make_example: speech, noise and farend rates differ");
  }
  const std::size_t len = speech.size();
  if (len == 0) throw ContractError("make_example: empty speech buffer");
  if (!(delay_ms >= 0.0)) throw ContractError("make_example: delay must be >= 0");
  const std::size_t delay = static_cast<std::size_t>(std::lround(delay_ms * rate / 1000.0));
  if (farend.size() < len || noise.size() < len) {
    throw ContractError("make_example: noise and farend must be at least as long as speech (" +
                        std::to_string(len) + " samples)");
  }
  if (delay >= len) {
    throw ContractError("make_example: delay of " + std::to_string(delay) +
                        " samples leaves no echo inside " + std::to_string(len) + " samples");
  }

  const Room room = random_room(split_seed(seed, 0));
  Room echo_room = room;
  {
    // The loudspeaker sits elsewhere in the same room.
    std::mt19937_64 rng(split_seed(seed, 1));
    for (int i = 0; i < 3; ++i)
      echo_room.source[i] = std::uniform_real_distribution<double>(0.5, room.dims[i] - 0.5)(rng);
  }
  RirOptions ro;
  ro.remove_direct_delay = true;
  const auto hx = synth_rir(rt60_s, room, rate, split_seed(seed, 2), ro);
  const auto hr = synth_rir(rt60_s, echo_room, rate, split_seed(seed, 3), ro);

  TrainingExample ex;
  ex.meta = {delay_ms, ser_db, snr_db, rt60_s, seed};
  ex.ref = dsp::AudioBuffer(std::vector<double>(farend.samples.begin(),
                                                farend.samples.begin() + len), rate);

  std::vector<double> near = dsp::fft_convolve(speech.samples, hx, len);
  std::vector<double> driven(len, 0.0);
  for (std::size_t n = delay; n < len; ++n) {
    double v = ex.ref[n - delay];
    if (opt.clip_level > 0.0) v = std::clamp(v, -opt.clip_level, opt.clip_level);
    driven[n] = v;
  }
  std::vector<double> echo = dsp::fft_convolve(driven, hr, len);
  std::vector<double> nz(noise.samples.begin(), noise.samples.begin() + len);

  const double e_near = energy_of(near);
  const double e_echo = energy_of(echo);
  const double e_noise = energy_of(nz);
  const bool want_echo = std::isfinite(ser_db);
  const bool want_noise = std::isfinite(snr_db);
  if (want_echo && e_echo == 0.0) {
    throw ContractError("make_example: farend has no energy inside the echo window");
  }
  if (want_noise && e_noise == 0.0) {
    throw ContractError("make_example: noise has zero energy");
  }
  if (e_near == 0.0 && !want_echo && want_noise) {
    throw ContractError("make_example: speech and echo are both silent; SNR is undefined");
  }

  double g_echo = 0.0, g_noise = 0.0;
  if (want_echo) {
    g_echo = e_near > 0.0 ? std::sqrt(e_near / (e_echo * std::pow(10.0, ser_db / 10.0)))
                          : 1.0;
  }
  if (want_noise) {
    const double e_sig = e_near > 0.0 ? e_near : g_echo * g_echo * e_echo;
    g_noise = std::sqrt(e_sig / (e_noise * std::pow(10.0, snr_db / 10.0)));
  }
  for (double& v : echo) v *= g_echo;
  for (double& v : nz) v *= g_noise;

  std::vector<double> mic(len);
  double peak = 0.0;
  for (std::size_t n = 0; n < len; ++n) {
    mic[n] = near[n] + echo[n] + nz[n];
    peak = std::max(peak, std::abs(mic[n]));
  }
  std::vector<double> target2(speech.samples.begin(), speech.samples.end());
  if (peak > opt.peak_limit) {
    const double g = opt.peak_limit / peak;
    for (auto* v : {&near, &echo, &nz, &target2})
      for (double& x : *v) x *= g;
    for (std::size_t n = 0; n < len; ++n) mic[n] = near[n] + echo[n] + nz[n];
  }

  std::vector<double> target1(len);
  for (std::size_t n = 0; n < len; ++n) target1[n] = near[n] + nz[n];

  ex.mic = dsp::AudioBuffer(std::move(mic), rate);
  ex.near = dsp::AudioBuffer(std::move(near), rate);
  ex.echo = dsp::AudioBuffer(std::move(echo), rate);
  ex.noise = dsp::AudioBuffer(std::move(nz), rate);
  ex.target_stage1 = dsp::AudioBuffer(std::move(target1), rate);
  ex.target_stage2 = dsp::AudioBuffer(std::move(target2), rate);

  const auto geo = dsp::StftGeometry::for_rate(rate);
  ex.vad_labels = energy_vad(ex.target_stage2, geo.frame_len, geo.hop);
  if (want_echo) {
    ex.delay_labels = delay_labels(ex.echo, ex.ref, geo, opt.max_delay_frames,
                                   opt.gcc_min_confidence);
  } else {
    ex.delay_labels.assign(geo.frames_for(len), -1);
  }
  return ex;
}

}  // namespace e2eaec::datasynth
