#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "doctest.h"
#include "e2eaec/dsp/gcc_phat.h"
#include "e2eaec/dsp/stft.h"
#include "e2eaec/error.h"

using namespace e2eaec;
using namespace e2eaec::dsp;

namespace {

AudioBuffer white(std::size_t n, std::uint64_t seed, double amp = 0.5) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, amp);
  AudioBuffer a(n, 16000);
  for (auto& s : a.samples) s = std::clamp(d(rng), -1.0, 1.0);
  return a;
}

AudioBuffer delayed(const AudioBuffer& x, std::size_t d) {
  AudioBuffer y(x.size(), x.sample_rate);
  for (std::size_t n = d; n < x.size(); ++n) y[n] = x[n - d];
  return y;
}

}  // namespace

TEST_CASE("geometry for 16 kHz and frame count rule") {
  auto g = StftGeometry::for_rate(16000);
  CHECK(g.frame_len == 320);
  CHECK(g.hop == 160);
  CHECK(g.fft_size == 512);
  CHECK(g.bins() == 257);
  CHECK(g.frames_for(0) == 0);
  CHECK(g.frames_for(1) == 2);
  CHECK(g.frames_for(16000) == 101);
  CHECK(g.frames_for(16001) == 102);
  auto g24 = StftGeometry::for_rate(24000);
  CHECK(g24.frame_len == 480);
  CHECK(g24.fft_size == 512);
  CHECK_THROWS_AS(StftGeometry::for_rate(16050), ContractError);
  StftGeometry bad{320, 400, 512};
  CHECK_THROWS_AS(stft(white(100, 1), bad), ContractError);
}

TEST_CASE("stft of an impulse is flat at the window value") {
  StftGeometry g;
  AudioBuffer a(1000, 16000);
  a[0] = 1.0;
  auto spec = stft(a, g);
  const double w0 = sqrt_hann(g.frame_len)[0];
  for (std::size_t f = 0; f < g.bins(); ++f)
    CHECK(std::abs(spec.at(0, f)) == doctest::Approx(w0).epsilon(1e-12));

  // Shifted impulse lands on a nonzero window sample.
  AudioBuffer b(1000, 16000);
  b[100] = 1.0;
  auto sb = stft(b, g);
  const double w100 = sqrt_hann(g.frame_len)[100];
  for (std::size_t f = 0; f < g.bins(); ++f)
    CHECK(std::abs(sb.at(0, f)) == doctest::Approx(w100).epsilon(1e-12));
}

TEST_CASE("stft of an exact-bin sinusoid peaks at that bin") {
  StftGeometry g;
  for (std::size_t bin : {5u, 32u, 100u, 200u}) {
    AudioBuffer a(8000, 16000);
    const double freq = static_cast<double>(bin) / g.fft_size;
    for (std::size_t n = 0; n < a.size(); ++n)
      a[n] = 0.5 * std::sin(2.0 * std::numbers::pi * freq * n);
    auto spec = stft(a, g);
    for (std::size_t t = 2; t + 3 < spec.frames(); ++t) {
      std::size_t best = 0;
      for (std::size_t f = 1; f < g.bins(); ++f)
        if (std::abs(spec.at(t, f)) > std::abs(spec.at(t, best))) best = f;
      CHECK(best == bin);
    }
  }
}

TEST_CASE("zero and empty signals") {
  StftGeometry g;
  auto spec = stft(AudioBuffer(3000, 16000), g);
  for (auto v : spec.data()) CHECK(v == std::complex<double>(0, 0));
  auto y = istft(spec, 3000, 16000);
  for (double s : y.samples) CHECK(s == 0.0);
  CHECK(stft(AudioBuffer(), g).frames() == 0);
}

TEST_CASE("window is positive and power complementary") {
  for (std::size_t n : {32u, 320u, 480u}) {
    const auto w = sqrt_hann(n);
    for (std::size_t i = 0; i < n; ++i) CHECK(w[i] > 0.0);
    for (std::size_t i = 0; i < n / 2; ++i)
      CHECK(w[i] * w[i] + w[i + n / 2] * w[i + n / 2] == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("round trip reconstructs every sample") {
  for (int rate : {16000, 24000}) {
    auto g = StftGeometry::for_rate(rate);
    auto x = white(static_cast<std::size_t>(rate), 7);
    x.sample_rate = rate;
    auto y = istft(stft(x, g), x.size(), rate);
    double err = 0.0;
    for (std::size_t n = 0; n < x.size(); ++n) err = std::max(err, std::abs(x[n] - y[n]));
    CHECK(err < 1e-6);
  }
}

TEST_CASE("streaming synthesis equals offline synthesis") {
  StftGeometry g;
  auto x = white(5000, 3);
  auto spec = stft(x, g);
  auto offline = istft(spec, x.size(), 16000);
  StreamingIstft synth(g);
  std::vector<double> streamed;
  for (std::size_t t = 0; t < spec.frames(); ++t) {
    auto chunk = synth.push(spec.frame(t));
    streamed.insert(streamed.end(), chunk.begin(), chunk.end());
  }
  REQUIRE(streamed.size() >= x.size());
  for (std::size_t n = 0; n < x.size(); ++n) CHECK(streamed[n] == offline[n]);
}

TEST_CASE("stft and istft are linear") {
  StftGeometry g;
  auto a = white(4000, 11), b = white(4000, 12);
  AudioBuffer sum(4000, 16000);
  for (std::size_t n = 0; n < sum.size(); ++n) sum[n] = 0.3 * a[n] - 1.7 * b[n];
  auto sa = stft(a, g), sb = stft(b, g), ss = stft(sum, g);
  double err = 0.0;
  for (std::size_t i = 0; i < ss.data().size(); ++i)
    err = std::max(err, std::abs(ss.data()[i] -
                                 (0.3 * sa.data()[i] - 1.7 * sb.data()[i])));
  CHECK(err < 1e-6);

  auto doubled = sa;
  for (auto& v : doubled.data()) v *= 2.0;
  auto y1 = istft(sa, 4000, 16000), y2 = istft(doubled, 4000, 16000);
  for (std::size_t n = 0; n < 4000; ++n) CHECK(std::abs(y2[n] - 2 * y1[n]) < 1e-6);
}

TEST_CASE("frame energy matches windowed time energy") {
  StftGeometry g;
  auto x = white(4000, 5);
  auto spec = stft(x, g);
  auto w = sqrt_hann(g.frame_len);
  for (std::size_t t = 0; t + 2 < spec.frames(); ++t) {
    double time_e = 0.0;
    for (std::size_t i = 0; i < g.frame_len; ++i) {
      const std::size_t n = t * g.hop + i;
      const double v = n < x.size() ? x[n] * w[i] : 0.0;
      time_e += v * v;
    }
    // One-sided spectrum: interior bins count twice.
    double freq_e = 0.0;
    for (std::size_t f = 0; f < g.bins(); ++f) {
      const double m = std::norm(spec.at(t, f));
      freq_e += (f == 0 || f + 1 == g.bins()) ? m : 2.0 * m;
    }
    freq_e /= static_cast<double>(g.fft_size);
    CHECK(std::abs(freq_e - time_e) <= 1e-4 * time_e);
  }
}

TEST_CASE("gcc_phat recovers pure delays") {
  auto ref = white(48000, 21);
  auto cfg = GccPhatConfig::for_rate(16000, 4000);

  SUBCASE("identical signals give zero lag") {
    for (const auto& e : gcc_phat(ref, ref, cfg)) CHECK(e.delay == 0);
  }
  SUBCASE("noiseless delays are exact in steady state") {
    for (std::size_t d : {1u, 160u, 240u, 1234u, 4000u}) {
      auto mic = delayed(ref, d);
      for (const auto& e : gcc_phat(mic, ref, cfg))
        if (e.window_start >= d) CHECK(e.delay == d);
    }
  }
  SUBCASE("240 samples at 20 dB SNR") {
    auto mic = delayed(ref, 240);
    const double ps = energy(mic) / mic.size();
    auto noise = white(mic.size(), 99, std::sqrt(ps / 100.0));
    for (std::size_t n = 0; n < mic.size(); ++n) mic[n] += noise[n];
    auto est = gcc_phat(mic, ref, cfg);
    std::size_t hits = 0;
    for (const auto& e : est)
      if (e.delay + 1 >= 240 && e.delay <= 241) ++hits;
    CHECK(static_cast<double>(hits) >= 0.95 * est.size());
  }
}

TEST_CASE("gcc_phat at a 650 ms delay") {
  auto ref = white(16000 * 3, 33);
  const std::size_t d = 10400;
  auto mic = delayed(ref, d);
  auto cfg = GccPhatConfig::for_rate(16000, 15000);
  auto est = gcc_phat(mic, ref, cfg);
  REQUIRE(!est.empty());
  for (const auto& e : est) {
    if (e.window_start < d) continue;
    CHECK(e.delay + 160 >= d);
    CHECK(e.delay <= d + 160);
    CHECK(discretize_delay(static_cast<double>(e.delay), 160, 100) == 65);
  }
}

TEST_CASE("gcc_phat contract errors") {
  auto a = white(8000, 1);
  GccPhatConfig cfg;  // 1 s window
  cfg.max_delay = 100;
  CHECK_THROWS_AS(gcc_phat(a, a, cfg), ContractError);
  cfg.window_len = 4000;
  cfg.max_delay = 4000;
  CHECK_THROWS_AS(gcc_phat(a, a, cfg), ContractError);
  auto b = a;
  b.sample_rate = 8000;
  cfg.max_delay = 10;
  CHECK_THROWS_AS(gcc_phat(a, b, cfg), ContractError);
}

TEST_CASE("discretize_delay") {
  CHECK(discretize_delay(0, 160, 100) == 0);
  CHECK(discretize_delay(0.65 * 16000, 160, 100) == 65);
  CHECK(discretize_delay(0.65 * 24000, 240, 100) == 65);
  CHECK(discretize_delay(239, 160, 100) == 1);
  CHECK(discretize_delay(240, 160, 100) == 2);
  CHECK(discretize_delay(1e6, 160, 100) == 99);
}
