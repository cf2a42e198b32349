#include "e2eaec/numcore/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "e2eaec/numcore/ops.h"

namespace e2eaec::numcore {

namespace {

// Evaluates fn and projects the result to a scalar with fixed weights.
Var<double> scalar_objective(Graph<double>& g, const GradFn& fn,
                             std::span<const Var<double>> leaves) {
  Var<double> out = fn(g, leaves);
  if (out.value().size() == 1) return reshape(out, {});
  std::mt19937_64 rng(0x5eed);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  Tensor<double> w(out.shape());
  for (auto& v : w.values()) v = u(rng);
  return sum_all(mul(out, g.constant(std::move(w))));
}

double evaluate(const GradFn& fn, const std::vector<Tensor<double>>& inputs) {
  Graph<double> g(false);
  std::vector<Var<double>> leaves;
  for (const auto& t : inputs) leaves.push_back(g.constant(t));
  return scalar_objective(g, fn, leaves).value().item();
}

}  // namespace

GradcheckResult check_gradients(const std::string& name, const GradFn& fn,
                                const std::vector<Tensor<double>>& inputs,
                                double eps, double tol) {
  GradcheckResult res;
  res.name = name;

  std::vector<Tensor<double>> analytic;
  {
    Graph<double> g;
    std::vector<Var<double>> leaves;
    for (const auto& t : inputs) leaves.push_back(g.parameter(t));
    Var<double> loss = scalar_objective(g, fn, leaves);
    g.backward(loss);
    for (const auto& leaf : leaves) analytic.push_back(*g.grad(leaf));
  }

  std::vector<Tensor<double>> work = inputs;
  for (std::size_t k = 0; k < work.size(); ++k) {
    double max_num = 0.0, max_diff = 0.0;
    for (std::size_t i = 0; i < work[k].size(); ++i) {
      const double orig = work[k][i];
      work[k][i] = orig + eps;
      const double fp = evaluate(fn, work);
      work[k][i] = orig - eps;
      const double fm = evaluate(fn, work);
      work[k][i] = orig;
      const double num = (fp - fm) / (2.0 * eps);
      max_num = std::max(max_num, std::abs(num));
      max_diff = std::max(max_diff, std::abs(num - analytic[k][i]));
      ++res.checked;
    }
    res.max_abs_error = std::max(res.max_abs_error, max_diff);
    res.max_rel_error =
        std::max(res.max_rel_error, max_diff / std::max(max_num, 1e-6));
  }
  res.passed = res.max_rel_error < tol;
  return res;
}

}  // namespace e2eaec::numcore
