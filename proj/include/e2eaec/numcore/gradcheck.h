#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "e2eaec/numcore/graph.h"

namespace e2eaec::numcore {

struct GradcheckResult {
  std::string name;
  double max_rel_error = 0.0;  // max over inputs of |a - n|_inf / |n|_inf
  double max_abs_error = 0.0;
  std::size_t checked = 0;     // number of scalar inputs perturbed
  bool passed = false;
};

// Builds the function under test from parameter leaves. May return a
// non-scalar; it is reduced with fixed pseudo-random weights.
using GradFn = std::function<Var<double>(Graph<double>&,
                                         std::span<const Var<double>>)>;

// Compares reverse-mode gradients against central differences
// (x + eps, x - eps) on every scalar of every input. Relative error uses the
// per-input infinity norm of the numerical gradient, floored at 1e-6.
GradcheckResult check_gradients(const std::string& name, const GradFn& fn,
                                const std::vector<Tensor<double>>& inputs,
                                double eps = 1e-4, double tol = 1e-4);

}  // namespace e2eaec::numcore
