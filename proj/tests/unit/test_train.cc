#include <chrono>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "doctest.h"
#include "e2eaec/datasynth/dataset.h"
#include "e2eaec/error.h"
#include "e2eaec/numcore/ops.h"
#include "e2eaec/train/gradcheck_suite.h"
#include "e2eaec/train/losses.h"
#include "e2eaec/train/trainer.h"

using namespace e2eaec;
using namespace e2eaec::train;
using numcore::Shape;

namespace {

Tensor<double> rnd(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor<double> t(std::move(shape));
  for (auto& v : t.values()) v = u(rng);
  return t;
}

double value(const Var<double>& v) { return v.value().item(); }

// Direct transcription of the modulation loss definition.
double modulation_oracle(const Tensor<double>& a, const Tensor<double>& b) {
  const std::size_t T = a.dim(0), F = a.dim(1);
  auto env = [&](const Tensor<double>& x, std::size_t t, std::size_t f) {
    if (t >= T) return 0.0;
    return std::abs(std::complex<double>(x.at({t, f, 0}), x.at({t, f, 1})));
  };
  std::vector<std::size_t> starts;
  if (T < 32) {
    starts.push_back(0);
  } else {
    for (std::size_t s = 0; s + 32 <= T; s += 16) starts.push_back(s);
  }
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t s : starts)
    for (std::size_t f = 0; f < F; ++f)
      for (std::size_t k = 0; k <= 16; ++k) {
        std::complex<double> za = 0.0, zb = 0.0;
        for (std::size_t j = 0; j < 32; ++j) {
          const auto w = std::polar(1.0, -2.0 * std::numbers::pi * double(k) * double(j) / 32.0);
          za += env(a, s + j, f) * w;
          zb += env(b, s + j, f) * w;
        }
        sum += std::abs(std::abs(za) - std::abs(zb));
        ++n;
      }
  return sum / double(n);
}

model::ModelConfig tiny_config() {
  model::ModelConfig c;
  c.channels = 4;
  c.gru_hidden = 4;
  c.max_delay = 12;
  c.fusion_blocks = 2;
  c.vad_tap_layer = 3;
  c.mid_tap_layer = 3;
  c.bins = dsp::StftGeometry::for_rate(1600).bins();
  return c;
}

std::vector<datasynth::TrainingExample> tiny_dataset(std::size_t n, std::uint64_t seed) {
  datasynth::DatasetConfig dc;
  dc.count = n;
  dc.duration_s = 1.0;
  dc.sample_rate = 1600;
  dc.delay_ms = {20.0, 80.0};
  dc.max_delay_frames = 12;
  dc.single_talk_prob = 0.0;
  dc.no_noise_prob = 0.0;
  dc.seed = seed;
  return datasynth::synth_dataset(dc, 1);
}

}  // namespace

TEST_CASE("snr loss closed forms") {
  Graph<double> g(false);
  auto t = rnd({50}, 1);
  CHECK(value(snr_loss(g.constant(t), t)) == -50.0);
  CHECK(std::abs(value(snr_loss(g.constant(Tensor<double>({50})), t))) < 1e-6);
  auto e = t;
  for (auto& v : e.values()) v *= 1.1;
  CHECK(std::abs(value(snr_loss(g.constant(e), t)) + 20.0) < 1e-6);
  // bounded either way
  auto far = t;
  for (auto& v : far.values()) v *= 1e6;
  CHECK(value(snr_loss(g.constant(far), t)) == 50.0);
  CHECK_THROWS_AS(snr_loss(g.constant(rnd({3}, 2)), t), DimensionError);

  dsp::AudioBuffer a(t.storage(), 16000);
  CHECK(snr_loss(a, a) == -50.0);
}

TEST_CASE("modulation loss against the loop oracle") {
  Graph<double> g(false);
  for (std::size_t frames : {7u, 32u, 50u, 81u}) {
    CAPTURE(frames);
    auto a = rnd({frames, 3, 2}, 10 + frames), b = rnd({frames, 3, 2}, 20 + frames);
    const double got = value(modulation_loss(g.constant(a), b));
    CHECK(got >= 0.0);
    CHECK(std::abs(got - modulation_oracle(a, b)) < 1e-6);
    CHECK(value(modulation_loss(g.constant(a), a)) == 0.0);
  }
  CHECK_THROWS_AS(modulation_loss(g.constant(rnd({4, 3, 2}, 1)), rnd({5, 3, 2}, 2)),
                  DimensionError);
}

TEST_CASE("delay losses") {
  Graph<double> g(false);
  const std::vector<int> labels{3, 5, -1, 0, 7};
  auto exact = g.constant(Tensor<double>({5}, {3, 5, 100, 0, 7}));
  bool empty = true;
  CHECK(value(delay_loss_mse(exact, labels, &empty)) == 0.0);
  CHECK_FALSE(empty);
  auto shifted = g.constant(Tensor<double>({5}, {5, 7, 0, 2, 9}));
  CHECK(value(delay_loss_mse(shifted, labels)) == doctest::Approx(4.0).epsilon(1e-12));
  auto mixed = g.constant(Tensor<double>({5}, {2.5, 6, -4, 1.25, 7}));
  const double hand = (0.25 + 1.0 + 1.5625 + 0.0) / 4.0;
  CHECK(std::abs(value(delay_loss_mse(mixed, labels)) - hand) < 1e-12);
  const std::vector<int> none(5, -1);
  CHECK(value(delay_loss_mse(mixed, none, &empty)) == 0.0);
  CHECK(empty);

  // CE: one-hot, uniform, random oracle
  const std::size_t H = 100;
  Tensor<double> onehot({5, H});
  for (std::size_t t = 0; t < 5; ++t) onehot.at({t, std::size_t(std::max(labels[t], 0))}) = 1.0;
  CHECK(value(delay_loss_ce(g.constant(onehot), labels)) < 1e-9);
  Tensor<double> uniform({5, H}, 1.0 / H);
  CHECK(value(delay_loss_ce(g.constant(uniform), labels)) ==
        doctest::Approx(std::log(100.0)).epsilon(1e-9));
  auto r = rnd({5, 8}, 3, 0.1, 1.0);
  for (std::size_t t = 0; t < 5; ++t) {
    double s = 0;
    for (std::size_t d = 0; d < 8; ++d) s += r.at({t, d});
    for (std::size_t d = 0; d < 8; ++d) r.at({t, d}) /= s;
  }
  double oracle = 0;
  int n = 0;
  for (std::size_t t = 0; t < 5; ++t)
    if (labels[t] >= 0) oracle -= std::log(r.at({t, std::size_t(labels[t])}) + 1e-12), ++n;
  CHECK(std::abs(value(delay_loss_ce(g.constant(r), labels)) - oracle / n) < 1e-12);
  const std::vector<int> too_big{0, 8, -1, 0, 0};
  CHECK_THROWS_AS(delay_loss_ce(g.constant(r), too_big), ContractError);
  CHECK_THROWS_AS(delay_loss_mse(mixed, std::vector<int>{1, 2}), DimensionError);
}

TEST_CASE("vad bce") {
  Graph<double> g(false);
  const std::vector<int> labels{1, 0, 1, 1, 0, 0};
  Tensor<double> exact({6});
  for (std::size_t t = 0; t < 6; ++t) exact[t] = labels[t];
  CHECK(value(vad_bce(g.constant(exact), labels)) < 1e-9);
  CHECK(value(vad_bce(g.constant(Tensor<double>({6}, 0.5)), labels)) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  auto p = rnd({6}, 4, 0.01, 0.99);
  double oracle = 0;
  for (std::size_t t = 0; t < 6; ++t) oracle -= labels[t] ? std::log(p[t]) : std::log(1 - p[t]);
  CHECK(std::abs(value(vad_bce(g.constant(p), labels)) - oracle / 6) < 1e-12);
}

TEST_CASE("loss weights per delay mode") {
  Graph<double> g(false);
  auto c = [&](double v) { return g.constant(Tensor<double>::scalar(v)); };
  const double a = 0.7, b = -1.3, d = 2.25, e = 0.4;
  CHECK(value(combine_losses(c(a), c(b), c(d), c(e), LossWeights::for_mode(DelayMode::kMse))) ==
        doctest::Approx(a + b + 100 * d + e).epsilon(1e-12));
  CHECK(value(combine_losses(c(a), c(b), c(d), c(e), LossWeights::for_mode(DelayMode::kCe))) ==
        doctest::Approx(a + b + d + e).epsilon(1e-12));
  CHECK(value(combine_losses(c(0), c(0), c(0), c(0), LossWeights{})) == 0.0);
  const auto w = LossWeights::for_mode(DelayMode::kMse);
  CHECK(w.spec1 == 1.0);
  CHECK(w.spec2 == 1.0);
  CHECK(w.vad == 1.0);
  CHECK(w.modulation == 0.1);
  CHECK(w.snr == 0.9);
  LossWeights bad;
  bad.vad = -1;
  CHECK_THROWS_AS(bad.validate(), ContractError);
}

TEST_CASE("istft op matches dsp istft") {
  const dsp::StftGeometry geo{16, 8, 16};
  auto s = rnd({9, 9, 2}, 5);
  Graph<double> g(false);
  auto w = istft_op(g.constant(s), geo, 70);
  const auto ref = dsp::istft(model::tensor_spectrogram(s, geo), 70, 1);
  REQUIRE(w.dim(0) == 70);
  for (std::size_t n = 0; n < 70; ++n) CHECK(w.value()[n] == ref[n]);
}

TEST_CASE("gradient check of every differentiable operation") {
  const auto t0 = std::chrono::steady_clock::now();
  const auto results = run_gradcheck_suite();
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(results.size() >= 29);
  for (const auto& r : results) {
    INFO(r.name << " rel err " << r.max_rel_error);
    CHECK(r.passed);
    CHECK(r.max_rel_error < 1e-4);
  }
  CHECK(secs < 5.0);
}

TEST_CASE("total loss composition and masking") {
  const auto cfg = tiny_config();
  const auto ds = tiny_dataset(1, 3);
  const auto ex = prepare_example(ds[0], cfg, TrainMode::kE2E);
  const auto params = model::init_params(cfg, 5);

  LossValues v[2];
  for (int m = 0; m < 2; ++m) {
    const auto mode = m == 0 ? DelayMode::kMse : DelayMode::kCe;
    const auto w = LossWeights::for_mode(mode);
    v[m] = loss_and_grads(cfg, params, ex, w, mode, nullptr);
    const double sum = w.spec1 * v[m].spec1 + w.spec2 * v[m].spec2 + w.delay * v[m].delay +
                       w.vad * v[m].vad;
    CHECK(std::abs(v[m].total - sum) <= 1e-6 * std::max(1.0, std::abs(sum)));
  }
  CHECK(v[0].spec1 == v[1].spec1);
  CHECK(v[0].spec2 == v[1].spec2);
  CHECK(v[0].vad == v[1].vad);
  CHECK(v[0].delay != v[1].delay);

  // masked frames get exactly zero gradient
  Graph<double> g;
  auto d = g.parameter(rnd({6}, 6, 0, 5));
  auto a = g.parameter(rnd({6, 5}, 7, 0.1, 1));
  const std::vector<int> labels{2, -1, 4, -1, -1, 1};
  g.backward(numcore::add(delay_loss_mse(d, labels), delay_loss_ce(a, labels)));
  for (std::size_t t : {1u, 3u, 4u}) {
    CHECK((*g.grad(d))[t] == 0.0);
    for (std::size_t k = 0; k < 5; ++k) CHECK((*g.grad(a))[t * 5 + k] == 0.0);
  }
  CHECK((*g.grad(d))[0] != 0.0);
}

TEST_CASE("non-finite loss aborts naming the term") {
  const auto cfg = tiny_config();
  auto ex = prepare_example(tiny_dataset(1, 4)[0], cfg, TrainMode::kE2E);
  ex.targets.target2[10] = std::nan("");
  CHECK_THROWS_WITH(loss_and_grads(cfg, model::init_params(cfg, 1), ex,
                                   LossWeights::for_mode(DelayMode::kMse), DelayMode::kMse,
                                   nullptr),
                    doctest::Contains("spec2"));
}

TEST_CASE("training is deterministic and reduces the loss") {
  const auto cfg = tiny_config();
  std::vector<PreparedExample> data;
  for (const auto& e : tiny_dataset(2, 9)) data.push_back(prepare_example(e, cfg, TrainMode::kE2E));
  TrainConfig tc;
  tc.steps = 40;
  tc.lr = 3e-3;
  tc.seed = 2;
  tc.delay_mode = DelayMode::kCe;
  tc.weights = LossWeights::for_mode(tc.delay_mode);
  const auto a = train::train(cfg, model::init_params(cfg, 1), data, tc);
  const auto b = train::train(cfg, model::init_params(cfg, 1), data, tc);
  REQUIRE(a.log.size() == 40);
  for (std::size_t i = 0; i < 40; ++i) {
    CHECK(std::abs(a.log[i].loss.total - b.log[i].loss.total) <= 1e-6);
    CHECK(a.log[i].example == b.log[i].example);
  }
  const auto dec = loss_decrease(a.log, 5, 5);
  CHECK(dec.decrease > 0.3);
  CHECK_THROWS_AS(train::train(cfg, model::init_params(cfg, 1), {}, tc), ContractError);
}

TEST_CASE("hybrid preparation and transfer into e2e") {
  const auto cfg = tiny_config();
  const auto ds = tiny_dataset(2, 11);
  laec::NlmsConfig nc;
  nc.taps = 64;
  std::vector<PreparedExample> hyb;
  for (const auto& e : ds) hyb.push_back(prepare_example(e, cfg, TrainMode::kHybrid, nc));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double bulk = double(hyb[i].bulk_delay) / hyb[i].targets.geometry.hop;
    for (std::size_t t = 0; t < ds[i].delay_labels.size(); ++t) {
      const int total = ds[i].delay_labels[t], resid = hyb[i].targets.delay_labels[t];
      if (resid >= 0) CHECK(std::abs(resid - (total - bulk)) <= 0.5 + 1e-9);
      if (total < 0) CHECK(resid == -1);
    }
  }
  TrainConfig tc;
  tc.steps = 3;
  tc.mode = TrainMode::kHybrid;
  const auto pre = train::train(cfg, model::init_params(cfg, 1), hyb, tc);
  auto e2e = model::init_params(cfg, 2);
  const auto rep = model::transfer_init(e2e, pre.params);
  CHECK(rep.copied.size() == e2e.size());
  CHECK(rep.skipped.empty());
  CHECK(rep.unused.empty());
}

TEST_CASE("loss decrease bookkeeping") {
  std::vector<StepRecord> log(30);
  for (std::size_t i = 0; i < 30; ++i) log[i].loss.total = i < 10 ? 10.0 : 0.5;
  const auto d = loss_decrease(log);
  CHECK(d.first == 10.0);
  CHECK(d.last == 0.5);
  CHECK(d.decrease == doctest::Approx(0.95));
  CHECK(steps_to_decrease(log, 0.9) == 26);
  CHECK(steps_to_decrease(log, 0.99) == 30);
  CHECK(steps_to_level(log, 1.0) == 26);
  CHECK(steps_to_level(log, 10.0) == 16);
  CHECK(steps_to_level(log, 0.1) == 30);
}
