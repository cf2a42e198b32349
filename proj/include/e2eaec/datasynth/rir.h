#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace e2eaec::datasynth {

using Vec3 = std::array<double, 3>;

struct Room {
  Vec3 dims{5.0, 4.0, 3.0};  // metres
  Vec3 source{1.0, 1.0, 1.5};
  Vec3 mic{3.5, 2.5, 1.2};
};

struct RirOptions {
  int max_order = 6;
  double sound_speed = 343.0;
  // Wall energy absorption in [0, 1]; derived from rt60 (Sabine) if unset.
  std::optional<double> absorption;
  // Add a seeded exponentially decaying diffuse tail.
  bool diffuse_tail = true;
  // Move the direct path to sample 0.
  bool remove_direct_delay = false;
};

// Image-source response of a shoebox room up to max_order reflections,
// nearest-sample placement with 1/r spreading, plus a Gaussian-noise diffuse
// tail decaying 60 dB over rt60. The tail energy relative to the direct path
// follows the distance-to-critical-distance ratio. Scaled so the direct
// path has unit amplitude. Length: direct delay + 1.5 * rt60.
// With absorption 1 the response is the lone direct-path impulse.
std::vector<double> synth_rir(double rt60_s, const Room& room, int sample_rate,
                              std::uint64_t seed, const RirOptions& opt = {});

// Sample index of the direct path for the given geometry.
std::size_t direct_path_delay(const Room& room, int sample_rate,
                              double sound_speed = 343.0);

}  // namespace e2eaec::datasynth
