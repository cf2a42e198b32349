#include "e2eaec/train/gradcheck_suite.h"

#include <random>
#include <string>

#include "e2eaec/model/model.h"
#include "e2eaec/numcore/ops.h"
#include "e2eaec/train/losses.h"

namespace e2eaec::train {

using namespace numcore;

namespace {

Tensor<double> rnd(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor<double> t(std::move(shape));
  for (auto& v : t.values()) v = u(rng);
  return t;
}

// Rows on the simplex, bounded away from zero.
Tensor<double> simplex(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  auto t = rnd({rows, cols}, seed, 0.2, 1.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += t[r * cols + c];
    for (std::size_t c = 0; c < cols; ++c) t[r * cols + c] /= s;
  }
  return t;
}

}  // namespace

std::vector<GradcheckResult> run_gradcheck_suite() {
  using V = Var<double>;
  using Span = std::span<const V>;
  std::vector<GradcheckResult> out;
  auto run = [&](const std::string& name, GradFn fn, std::vector<Tensor<double>> in) {
    out.push_back(check_gradients(name, fn, in));
  };

  run("add", [](Graph<double>&, Span v) { return add(v[0], v[1]); },
      {rnd({3, 2}, 1), rnd({3, 2}, 2)});
  run("sub", [](Graph<double>&, Span v) { return sub(v[0], v[1]); }, {rnd({4}, 3), rnd({4}, 4)});
  run("mul", [](Graph<double>&, Span v) { return mul(v[0], v[1]); }, {rnd({5}, 5), rnd({5}, 6)});
  run("scale", [](Graph<double>&, Span v) { return scale(v[0], -2.5); }, {rnd({4}, 7)});
  run("sigmoid", [](Graph<double>&, Span v) { return sigmoid(v[0]); }, {rnd({6}, 8, -3, 3)});
  run("tanh", [](Graph<double>&, Span v) { return numcore::tanh(v[0]); }, {rnd({6}, 9, -2, 2)});
  run("linear", [](Graph<double>&, Span v) { return linear(v[0], v[1], v[2]); },
      {rnd({2, 3}, 10), rnd({3, 2}, 11), rnd({2}, 12)});
  run("softmax", [](Graph<double>&, Span v) { return softmax(v[0]); }, {rnd({2, 4}, 13, -2, 2)});
  run("unfold", [](Graph<double>&, Span v) { return unfold(v[0], 3, 1, 1); }, {rnd({2, 4, 1}, 14)});
  run("transpose01", [](Graph<double>&, Span v) { return transpose01(v[0]); },
      {rnd({2, 3, 1}, 16)});
  run("concat", [](Graph<double>&, Span v) { return concat(v[0], v[1], 1); },
      {rnd({2, 2}, 17), rnd({2, 1}, 18)});
  run("slice", [](Graph<double>&, Span v) { return slice(v[0], 0, 1, 3); }, {rnd({4, 2}, 19)});
  run("reshape", [](Graph<double>&, Span v) { return reshape(v[0], {6}); }, {rnd({2, 3}, 20)});
  run("mean_axis", [](Graph<double>&, Span v) { return mean_axis(v[0], 1); },
      {rnd({2, 3, 2}, 21)});
  run("sum_all", [](Graph<double>&, Span v) { return sum_all(v[0]); }, {rnd({5}, 22)});
  run("mean_all", [](Graph<double>&, Span v) { return mean_all(v[0]); }, {rnd({5}, 23)});
  run("gru_step",
      [](Graph<double>&, Span v) { return gru_step(v[0], v[1], v[2], v[3], v[4], v[5]); },
      {rnd({2, 2}, 24), rnd({2, 2}, 25), rnd({2, 6}, 26), rnd({2, 6}, 27), rnd({6}, 28),
       rnd({6}, 29)});
  run("gru_scan",
      [](Graph<double>&, Span v) { return gru_scan(v[0], v[1], v[2], v[3], v[4], v[5]); },
      {rnd({2, 3, 2}, 30), rnd({2, 2}, 31), rnd({2, 6}, 32), rnd({2, 6}, 33), rnd({6}, 34),
       rnd({6}, 35)});
  run("lagged_correlation",
      [](Graph<double>&, Span v) { return lagged_correlation(v[0], v[1], 3); },
      {rnd({3, 2, 2}, 36), rnd({4, 2, 2}, 37)});
  run("lagged_mix", [](Graph<double>&, Span v) { return lagged_mix(v[0], v[1]); },
      {rnd({3, 3}, 38), rnd({4, 2, 1}, 39)});
  run("expected_index", [](Graph<double>&, Span v) { return expected_index(v[0]); },
      {rnd({2, 4}, 40)});
  run("apply_ccm", [](Graph<double>&, Span v) { return model::apply_ccm(v[0], v[1], 2, 3); },
      {rnd({3, 4, 12}, 41), rnd({4, 4, 2}, 42)});

  const dsp::StftGeometry geo{8, 4, 8};
  run("istft", [geo](Graph<double>&, Span v) { return istft_op(v[0], geo, 18); },
      {rnd({5, 5, 2}, 43)});
  {
    auto target = rnd({12}, 44);
    run("snr_loss", [target](Graph<double>&, Span v) { return snr_loss(v[0], target); },
        {rnd({12}, 45)});
  }
  {
    auto target = rnd({36, 3, 2}, 46);
    run("modulation_loss",
        [target](Graph<double>&, Span v) { return modulation_loss(v[0], target); },
        {rnd({36, 3, 2}, 47)});
    auto short_target = rnd({7, 2, 2}, 48);
    run("modulation_loss_short",
        [short_target](Graph<double>&, Span v) { return modulation_loss(v[0], short_target); },
        {rnd({7, 2, 2}, 49)});
  }
  {
    const std::vector<int> labels{2, -1, 0, 3, -1};
    run("delay_loss_mse",
        [labels](Graph<double>&, Span v) { return delay_loss_mse(v[0], labels); },
        {rnd({5}, 50, 0.0, 4.0)});
    run("delay_loss_ce",
        [labels](Graph<double>&, Span v) { return delay_loss_ce(v[0], labels); },
        {simplex(5, 4, 51)});
    const std::vector<int> vad{1, 0, 0, 1, 1};
    run("vad_bce", [vad](Graph<double>&, Span v) { return vad_bce(v[0], vad); },
        {rnd({5}, 52, 0.1, 0.9)});
  }
  return out;
}

}  // namespace e2eaec::train
