#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "e2eaec/datasynth/dataset.h"
#include "e2eaec/datasynth/example.h"
#include "e2eaec/datasynth/rir.h"
#include "e2eaec/datasynth/signals.h"
#include "e2eaec/datasynth/vad.h"
#include "e2eaec/error.h"

using namespace e2eaec;
using namespace e2eaec::datasynth;
using dsp::AudioBuffer;

namespace {

double db_ratio(const std::vector<double>& a, const std::vector<double>& b) {
  double ea = 0.0, eb = 0.0;
  for (double v : a) ea += v * v;
  for (double v : b) eb += v * v;
  return 10.0 * std::log10(ea / eb);
}

// Schroeder backward integral, then a least-squares line through the
// -5..-35 dB span extrapolated to -60 dB.
double schroeder_rt60(const std::vector<double>& h, int rate) {
  std::vector<double> edc(h.size());
  double acc = 0.0;
  for (std::size_t i = h.size(); i-- > 0;) {
    acc += h[i] * h[i];
    edc[i] = acc;
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double db = 10.0 * std::log10(edc[i] / edc[0]);
    if (db > -5.0 || db < -35.0) continue;
    const double t = static_cast<double>(i) / rate;
    sx += t, sy += db, sxx += t * t, sxy += t * db;
    ++n;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return -60.0 / slope;
}

AudioBuffer tone(std::size_t n, double amp, double hz = 440.0, int rate = 16000) {
  AudioBuffer a(n, rate);
  for (std::size_t i = 0; i < n; ++i)
    a[i] = amp * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / rate);
  return a;
}

}  // namespace

TEST_CASE("rir with full absorption is a lone direct impulse") {
  Room room;
  RirOptions opt;
  opt.absorption = 1.0;
  const auto h = synth_rir(0.3, room, 16000, 7, opt);
  const std::size_t d = direct_path_delay(room, 16000);
  REQUIRE(h.size() > d);
  for (std::size_t i = 0; i < h.size(); ++i) CHECK(h[i] == (i == d ? 1.0 : 0.0));

  opt.remove_direct_delay = true;
  const auto h0 = synth_rir(0.3, room, 16000, 7, opt);
  CHECK(h0[0] == 1.0);
  for (std::size_t i = 1; i < h0.size(); ++i) CHECK(h0[i] == 0.0);
}

TEST_CASE("rir decay matches the requested rt60") {
  Room room;
  room.dims = {6.0, 5.0, 3.0};
  for (double rt60 : {0.2, 0.4, 0.7, 1.0}) {
    CAPTURE(rt60);
    const auto h = synth_rir(rt60, room, 16000, 11);
    const double est = schroeder_rt60(h, 16000);
    CHECK(est == doctest::Approx(rt60).epsilon(0.2));
  }
}

TEST_CASE("rir is deterministic per seed and unit at the direct path") {
  Room room;
  const auto a = synth_rir(0.4, room, 16000, 5);
  const auto b = synth_rir(0.4, room, 16000, 5);
  const auto c = synth_rir(0.4, room, 16000, 6);
  CHECK(a == b);
  CHECK(a != c);
  const std::size_t d = direct_path_delay(room, 16000);
  for (std::size_t i = 0; i < d; ++i) CHECK(a[i] == 0.0);
  CHECK(a[d] == doctest::Approx(1.0).epsilon(0.3));
}

TEST_CASE("rir rejects bad geometry") {
  Room room;
  CHECK_THROWS_AS(synth_rir(0.01, room, 16000, 1), ContractError);
  CHECK_THROWS_AS(synth_rir(1.5, room, 16000, 1), ContractError);
  room.mic = {6.0, 1.0, 1.0};
  CHECK_THROWS_AS(synth_rir(0.3, room, 16000, 1), ContractError);
  room.mic = room.source;
  CHECK_THROWS_AS(synth_rir(0.3, room, 16000, 1), ContractError);
}

TEST_CASE("energy vad on silence and a tone") {
  const auto z = energy_vad(AudioBuffer(16000, 16000), 320, 160);
  CHECK(z.size() == 101);
  CHECK(std::all_of(z.begin(), z.end(), [](int v) { return v == 0; }));

  const auto t = energy_vad(tone(16000, 1.0), 320, 160);
  // the last frame holds only end padding
  for (std::size_t i = 1; i + 1 < t.size(); ++i) CHECK(t[i] == 1);
  CHECK(t.back() == 0);
  CHECK(energy_vad(AudioBuffer(), 320, 160).empty());
}

TEST_CASE("energy vad boundaries follow the construction") {
  // speech 0.5 s, silence 0.6 s, speech 0.5 s
  AudioBuffer a(25600, 16000);
  const auto noise_sp = coloured_noise(8000, 16000, 4);
  for (std::size_t i = 0; i < 8000; ++i) a[i] = 0.1 * noise_sp[i];
  for (std::size_t i = 0; i < 8000; ++i) a[17600 + i] = 0.1 * noise_sp[i];
  const auto v = energy_vad(a, 320, 160);
  auto first_zero = std::find(v.begin(), v.end(), 0) - v.begin();
  auto next_one = std::find(v.begin() + first_zero, v.end(), 1) - v.begin();
  CHECK(std::abs(first_zero - 8000 / 160) <= 2);
  CHECK(std::abs(next_one - 17600 / 160) <= 2);
  CHECK(v[0] == 1);
  CHECK(v[v.size() - 3] == 1);
}

TEST_CASE("energy vad bridges short gaps only") {
  AudioBuffer a(16000 * 2, 16000);
  const auto n = coloured_noise(a.size(), 16000, 9);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = 0.1 * n[i];
  // 30 ms hole: bridged
  for (std::size_t i = 8000; i < 8480; ++i) a[i] = 0.0;
  const auto v = energy_vad(a, 320, 160);
  for (std::size_t t = 40; t < 60; ++t) CHECK(v[t] == 1);
}

namespace {

struct Sources {
  AudioBuffer speech, noise, farend;
};

Sources sources(std::size_t n, std::uint64_t seed) {
  return {speech_like(n, 16000, split_seed(seed, 0)),
          coloured_noise(n, 16000, split_seed(seed, 1)),
          speech_like(n, 16000, split_seed(seed, 2))};
}

}  // namespace

TEST_CASE("make_example hits the requested ratios and keeps the identity") {
  const auto s = sources(48000, 21);
  for (double ser : {-10.0, 0.0, 7.5}) {
    for (double snr : {0.0, 20.0}) {
      CAPTURE(ser);
      CAPTURE(snr);
      const auto ex = make_example(s.speech, s.noise, s.farend, 120.0, ser, snr, 0.3, 99);
      CHECK(std::abs(db_ratio(ex.near.samples, ex.echo.samples) - ser) < 0.1);
      CHECK(std::abs(db_ratio(ex.near.samples, ex.noise.samples) - snr) < 0.1);
      for (std::size_t i = 0; i < ex.mic.size(); ++i) {
        CHECK(ex.mic[i] - (ex.near[i] + ex.echo[i] + ex.noise[i]) == 0.0);
        CHECK(ex.target_stage1[i] - (ex.near[i] + ex.noise[i]) == 0.0);
      }
      for (const auto* b : {&ex.ref, &ex.target_stage1, &ex.target_stage2, &ex.near,
                            &ex.echo, &ex.noise}) {
        CHECK(b->size() == ex.mic.size());
        CHECK(b->sample_rate == ex.mic.sample_rate);
      }
      CHECK(ex.vad_labels.size() == 301);
      CHECK(ex.delay_labels.size() == 301);
    }
  }
}

TEST_CASE("make_example without echo and noise is the reverberant speech") {
  const auto s = sources(32000, 5);
  const auto ex = make_example(s.speech, s.noise, s.farend, 50.0, kInfDb, kInfDb, 0.3, 1);
  CHECK(ex.mic.samples == ex.near.samples);
  CHECK(ex.target_stage1.samples == ex.mic.samples);
  CHECK(std::all_of(ex.delay_labels.begin(), ex.delay_labels.end(),
                    [](int v) { return v == -1; }));
}

TEST_CASE("far-end single talk has no near-end labels") {
  const auto s = sources(32000, 6);
  const AudioBuffer silent(32000, 16000);
  const auto ex = make_example(silent, s.noise, s.farend, 80.0, 0.0, 20.0, 0.4, 2);
  CHECK(std::all_of(ex.vad_labels.begin(), ex.vad_labels.end(), [](int v) { return v == 0; }));
  CHECK(std::all_of(ex.target_stage2.samples.begin(), ex.target_stage2.samples.end(),
                    [](double v) { return v == 0.0; }));
  double e = 0.0;
  for (double v : ex.echo.samples) e += v * v;
  CHECK(e > 0.0);
  CHECK(std::abs(db_ratio(ex.echo.samples, ex.noise.samples) - 20.0) < 0.1);
}

TEST_CASE("650 ms echo gives delay class 65") {
  const auto s = sources(16000 * 5, 8);
  const auto ex = make_example(s.speech, s.noise, s.farend, 650.0, 0.0, 30.0, 0.3, 4);
  std::vector<int> valid;
  for (int v : ex.delay_labels)
    if (v >= 0) valid.push_back(v);
  REQUIRE(valid.size() > 100);
  std::nth_element(valid.begin(), valid.begin() + valid.size() / 2, valid.end());
  CHECK(valid[valid.size() / 2] == 65);
  // no label can point before the signal start
  for (std::size_t t = 0; t < 65; ++t) CHECK(ex.delay_labels[t] == -1);
}

TEST_CASE("echo onset lags the reference by the requested delay") {
  const auto s = sources(32000, 12);
  for (double delay_ms : {0.0, 37.0, 240.0}) {
    CAPTURE(delay_ms);
    const auto ex = make_example(s.speech, s.noise, s.farend, delay_ms, 0.0, kInfDb, 0.2, 3);
    // brute-force cross-correlation of echo against ref
    const long max_lag = 6000;
    long best = 0;
    double best_v = -1.0;
    for (long lag = 0; lag <= max_lag; ++lag) {
      double acc = 0.0;
      for (std::size_t i = static_cast<std::size_t>(lag); i < ex.echo.size(); ++i)
        acc += ex.echo[i] * ex.ref[i - lag];
      if (std::abs(acc) > best_v) best_v = std::abs(acc), best = lag;
    }
    CHECK(std::abs(best - std::lround(delay_ms * 16.0)) <= 160);
  }
}

TEST_CASE("make_example is deterministic and validates inputs") {
  const auto s = sources(24000, 13);
  const auto a = make_example(s.speech, s.noise, s.farend, 100.0, 3.0, 15.0, 0.5, 77);
  const auto b = make_example(s.speech, s.noise, s.farend, 100.0, 3.0, 15.0, 0.5, 77);
  CHECK(a.mic.samples == b.mic.samples);
  CHECK(a.target_stage1.samples == b.target_stage1.samples);
  CHECK(a.vad_labels == b.vad_labels);
  CHECK(a.delay_labels == b.delay_labels);

  const AudioBuffer zero(24000, 16000);
  CHECK_THROWS_WITH_AS(make_example(s.speech, zero, s.farend, 100.0, 0.0, 10.0, 0.3, 1),
                       doctest::Contains("noise"), ContractError);
  CHECK_THROWS_WITH_AS(make_example(s.speech, s.noise, zero, 100.0, 0.0, 10.0, 0.3, 1),
                       doctest::Contains("farend"), ContractError);
  CHECK_THROWS_AS(make_example(s.speech, s.noise, s.farend, 2000.0, 0.0, 10.0, 0.3, 1),
                  ContractError);
  const AudioBuffer shorter(1000, 16000);
  CHECK_THROWS_AS(make_example(s.speech, shorter, s.farend, 10.0, 0.0, 10.0, 0.3, 1),
                  ContractError);
}

TEST_CASE("dataset synthesis is reproducible and round-trips through disk") {
  DatasetConfig cfg;
  cfg.count = 4;
  cfg.duration_s = 1.5;
  cfg.delay_ms = {0.0, 300.0};
  cfg.seed = 42;
  const auto a = synth_dataset(cfg, 3);
  const auto b = synth_dataset(cfg, 1);
  REQUIRE(a.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(a[i].mic.samples == b[i].mic.samples);
    CHECK(a[i].delay_labels == b[i].delay_labels);
  }
  CHECK(a[0].mic.samples != a[1].mic.samples);

  const auto dir = std::filesystem::temp_directory_path() / "e2eaec_test_dataset";
  std::filesystem::remove_all(dir);
  write_dataset(dir.string(), a);
  const auto c = load_dataset(dir.string());
  REQUIRE(c.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(c[i].vad_labels == a[i].vad_labels);
    CHECK(c[i].delay_labels == a[i].delay_labels);
    CHECK(c[i].meta.seed == a[i].meta.seed);
    CHECK(c[i].meta.delay_ms == a[i].meta.delay_ms);
    REQUIRE(c[i].mic.size() == a[i].mic.size());
    for (std::size_t k = 0; k < a[i].mic.size(); k += 97)
      CHECK(c[i].mic[k] == static_cast<double>(static_cast<float>(a[i].mic[k])));
  }
  std::filesystem::remove_all(dir);

  cfg.delay_ms = {0.0, 1500.0};
  CHECK_THROWS_AS(cfg.validate(), ContractError);
}

TEST_CASE("scene example switches in noise and near-end talk") {
  const auto ex = make_scene_example(16000, 4.0, 100.0, 1.5, 2.5, 3);
  for (std::size_t i = 0; i < 24000; ++i) REQUIRE(ex.noise[i] == 0.0);
  for (std::size_t i = 0; i < 40000; ++i) REQUIRE(ex.target_stage2[i] == 0.0);
  double e_late = 0.0;
  for (std::size_t i = 40000; i < 64000; ++i) e_late += ex.target_stage2[i] * ex.target_stage2[i];
  CHECK(e_late > 0.0);
}
