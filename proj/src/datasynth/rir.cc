#include "e2eaec/datasynth/rir.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "e2eaec/error.h"

namespace e2eaec::datasynth {

namespace {

double distance(const Vec3& a, const Vec3& b) {
  double s = 0.0;
  for (int i = 0; i < 3; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

void check_geometry(double rt60, const Room& room, int rate) {
  if (!(rt60 >= 0.05 && rt60 <= 1.0)) {
    throw ContractError("synth_rir: rt60 must lie in [0.05, 1.0] s, got " +
                        std::to_string(rt60));
  }
  if (rate <= 0) throw ContractError("synth_rir: sample rate must be positive");
  for (int i = 0; i < 3; ++i) {
    if (!(room.dims[i] > 0.0)) throw ContractError("synth_rir: room dimensions must be positive");
    for (const Vec3* p : {&room.source, &room.mic}) {
      if (!((*p)[i] > 0.0 && (*p)[i] < room.dims[i])) {
        throw ContractError("synth_rir: source and mic must lie strictly inside the room");
      }
    }
  }
  if (distance(room.source, room.mic) < 1e-3) {
    throw ContractError("synth_rir: source and mic coincide");
  }
}

}  // namespace

std::size_t direct_path_delay(const Room& room, int sample_rate,
                              double sound_speed) {
  return static_cast<std::size_t>(
      std::lround(distance(room.source, room.mic) / sound_speed * sample_rate));
}

std::vector<double> synth_rir(double rt60_s, const Room& room, int sample_rate,
                              std::uint64_t seed, const RirOptions& opt) {
  check_geometry(rt60_s, room, sample_rate);
  const Vec3& L = room.dims;
  const double volume = L[0] * L[1] * L[2];
  const double surface = 2.0 * (L[0] * L[1] + L[0] * L[2] + L[1] * L[2]);
  double alpha = opt.absorption.value_or(0.161 * volume / (surface * rt60_s));
  alpha = std::clamp(alpha, 0.0, 1.0);
  const double beta = std::sqrt(1.0 - alpha);

  const double fs = sample_rate, c = opt.sound_speed;
  const double d0 = distance(room.source, room.mic);
  const std::size_t direct = static_cast<std::size_t>(std::lround(d0 / c * fs));
  const std::size_t shift = opt.remove_direct_delay ? direct : 0;
  const std::size_t len =
      direct - shift + static_cast<std::size_t>(std::ceil(1.5 * rt60_s * fs)) + 1;
  std::vector<double> h(len, 0.0);

  // Allen-Berkley images: coordinate (1 - 2q) s + 2 n L reflects |n - q| + |n|
  // times off the walls of that axis.
  const int N = opt.max_order;
  for (int nx = -N; nx <= N; ++nx)
    for (int ny = -N; ny <= N; ++ny)
      for (int nz = -N; nz <= N; ++nz)
        for (int q = 0; q < 8; ++q) {
          const int n[3] = {nx, ny, nz};
          const int qs[3] = {q & 1, (q >> 1) & 1, (q >> 2) & 1};
          int order = 0;
          Vec3 img;
          for (int i = 0; i < 3; ++i) {
            order += std::abs(n[i] - qs[i]) + std::abs(n[i]);
            img[i] = (1 - 2 * qs[i]) * room.source[i] + 2.0 * n[i] * L[i];
          }
          if (order > N) continue;
          if (order > 0 && beta == 0.0) continue;
          const double d = distance(img, room.mic);
          const std::size_t k = static_cast<std::size_t>(std::lround(d / c * fs));
          if (k - shift >= len) continue;
          h[k - shift] += std::pow(beta, order) * d0 / d;
        }

  if (opt.diffuse_tail && beta > 0.0) {
    // Diffuse-to-direct energy ratio (d / d_c)^2 with the critical distance
    // d_c = 0.057 sqrt(V / rt60).
    const double dc = 0.057 * std::sqrt(volume / rt60_s);
    const double ratio = (d0 / dc) * (d0 / dc);
    const double decay = 3.0 * std::numbers::ln10 / (rt60_s * fs);  // amplitude
    const double sigma = std::sqrt(ratio * 2.0 * decay);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    for (std::size_t k = direct - shift + 1; k < len; ++k) {
      const double t = static_cast<double>(k - (direct - shift));
      h[k] += sigma * std::exp(-decay * t) * g(rng);
    }
  }
  return h;
}

}  // namespace e2eaec::datasynth
