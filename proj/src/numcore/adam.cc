#include "e2eaec/numcore/adam.h"

#include <cmath>

namespace e2eaec::numcore {

template <typename T>
void adam_step(std::span<T> params, std::span<const T> grads,
               AdamState<T>& state, const AdamConfig& cfg) {
  if (params.size() != grads.size()) {
    throw DimensionError("adam_step: " + std::to_string(params.size()) +
                         " parameters vs " + std::to_string(grads.size()) +
                         " gradients");
  }
  if (state.m.empty() && state.v.empty()) {
    state.m.assign(params.size(), T(0));
    state.v.assign(params.size(), T(0));
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw DimensionError("adam_step: optimizer state has " +
                         std::to_string(state.m.size()) + " slots for " +
                         std::to_string(params.size()) + " parameters");
  }
  ++state.step;
  const double b1 = cfg.beta1, b2 = cfg.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    const double m = b1 * state.m[i] + (1.0 - b1) * g;
    const double v = b2 * state.v[i] + (1.0 - b2) * g * g;
    state.m[i] = static_cast<T>(m);
    state.v[i] = static_cast<T>(v);
    const double mhat = m / c1;
    const double vhat = v / c2;
    params[i] = static_cast<T>(params[i] -
                               cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
  }
}

template <typename T>
double clip_grad_norm(std::vector<Tensor<T>*>& grads, double max_norm) {
  double sq = 0.0;
  for (const Tensor<T>* g : grads)
    for (T v : g->values()) sq += static_cast<double>(v) * v;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const T s = static_cast<T>(max_norm / norm);
    for (Tensor<T>* g : grads)
      for (T& v : g->values()) v *= s;
  }
  return norm;
}

template <typename T>
double Adam<T>::step(NamedTensors<T>& params, NamedTensors<T>& grads) {
  if (grads.size() != params.size()) {
    throw DimensionError("Adam: " + std::to_string(params.size()) +
                         " parameters vs " + std::to_string(grads.size()) +
                         " gradients");
  }
  std::vector<Tensor<T>*> gptrs;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<T>& g = grads.get(params.names()[i]);
    if (g.shape() != params.at(i).shape()) {
      throw DimensionError("Adam: gradient for '" + params.names()[i] +
                           "' has shape " + shape_str(g.shape()) +
                           ", parameter " + shape_str(params.at(i).shape()));
    }
    gptrs.push_back(&g);
  }
  const double norm = clip_grad_norm(gptrs, cfg_.clip_norm);
  states_.resize(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    adam_step<T>(params.at(i).values(), gptrs[i]->values(), states_[i], cfg_);
  }
  ++steps_;
  return norm;
}

template void adam_step<float>(std::span<float>, std::span<const float>,
                               AdamState<float>&, const AdamConfig&);
template void adam_step<double>(std::span<double>, std::span<const double>,
                                AdamState<double>&, const AdamConfig&);
template double clip_grad_norm<float>(std::vector<Tensor<float>*>&, double);
template double clip_grad_norm<double>(std::vector<Tensor<double>*>&, double);
template class Adam<float>;
template class Adam<double>;

}  // namespace e2eaec::numcore
