#pragma once

#include <vector>

#include "e2eaec/numcore/gradcheck.h"

namespace e2eaec::train {

// Finite-difference checks (double precision, eps 1e-4, tolerance 1e-4) of
// every differentiable operation: numcore ops, the complex mask and the
// loss functions. Inputs are small seeded random tensors.
std::vector<numcore::GradcheckResult> run_gradcheck_suite();

}  // namespace e2eaec::train
