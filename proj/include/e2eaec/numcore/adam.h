#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "e2eaec/numcore/named_tensors.h"

namespace e2eaec::numcore {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Global L2 norm limit applied across all gradients; <= 0 disables.
  double clip_norm = 5.0;
};

template <typename T>
struct AdamState {
  std::vector<T> m;
  std::vector<T> v;
  std::int64_t step = 0;
};

// One bias-corrected Adam update of a single tensor, in place.
template <typename T>
void adam_step(std::span<T> params, std::span<const T> grads,
               AdamState<T>& state, const AdamConfig& cfg);

// Scales every gradient by min(1, max_norm / norm) and returns the norm
// measured before scaling.
template <typename T>
double clip_grad_norm(std::vector<Tensor<T>*>& grads, double max_norm);

// Adam over a named parameter set with global gradient clipping.
template <typename T>
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  // `grads` must hold one tensor per parameter, name for name. Returns the
  // pre-clip gradient norm.
  double step(NamedTensors<T>& params, NamedTensors<T>& grads);

  const AdamConfig& config() const { return cfg_; }
  std::int64_t steps() const { return steps_; }

 private:
  AdamConfig cfg_;
  std::vector<AdamState<T>> states_;
  std::int64_t steps_ = 0;
};

}  // namespace e2eaec::numcore
