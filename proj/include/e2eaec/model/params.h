#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "e2eaec/model/config.h"
#include "e2eaec/numcore/named_tensors.h"

namespace e2eaec::model {

using ModelParams = numcore::NamedTensors<float>;

struct ParamSpec {
  std::string name;
  numcore::Shape shape;
  bool is_bias = false;
};

// Every tensor of the architecture in a fixed order.
std::vector<ParamSpec> param_specs(const ModelConfig& cfg);

std::size_t param_count(const ModelConfig& cfg);

// Weights uniform in +-1/sqrt(fan_in) with fan_in the leading dimension,
// biases zero. Values depend only on (cfg, seed).
ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);

// Zero tensors with the right shapes.
ModelParams zero_params(const ModelConfig& cfg);

// Throws DimensionError naming the first missing or misshapen tensor.
void check_params(const ModelConfig& cfg, const ModelParams& params);

struct LoadReport {
  std::vector<std::string> copied;
  std::vector<std::string> skipped;  // target names absent from the source
  std::vector<std::string> unused;   // source names absent from the target
};

// Copies every source tensor whose name exists in `target`. Shapes must
// match; a conflict throws DimensionError naming the tensor and both shapes.
LoadReport transfer_init(ModelParams& target, const ModelParams& source);

template <typename T>
numcore::NamedTensors<T> cast_params(const ModelParams& params) {
  numcore::NamedTensors<T> out;
  for (std::size_t i = 0; i < params.size(); ++i)
    out.add(params.names()[i], params.at(i).template cast<T>());
  return out;
}

}  // namespace e2eaec::model
