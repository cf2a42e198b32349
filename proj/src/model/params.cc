#include "e2eaec/model/params.h"

#include <cmath>
#include <random>

namespace e2eaec::model {

namespace {

void add_linear(std::vector<ParamSpec>& out, const std::string& name,
                std::size_t in, std::size_t n_out) {
  out.push_back({name + ".w", {in, n_out}, false});
  out.push_back({name + ".b", {n_out}, true});
}

void add_block(std::vector<ParamSpec>& out, const std::string& prefix,
               const ModelConfig& cfg) {
  const std::size_t C = cfg.channels, N = cfg.gru_hidden;
  const std::size_t K = cfg.unfold_kernel;
  for (const char* axis : {"time", "freq"}) {
    const std::string p = prefix + "." + axis;
    out.push_back({p + ".gru.w_ih", {K * C, 3 * N}, false});
    out.push_back({p + ".gru.w_hh", {N, 3 * N}, false});
    out.push_back({p + ".gru.b_ih", {3 * N}, true});
    out.push_back({p + ".gru.b_hh", {3 * N}, true});
    add_linear(out, p + ".proj", N, C);
  }
}

}  // namespace

std::vector<ParamSpec> param_specs(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t C = cfg.channels;
  std::vector<ParamSpec> out;
  add_linear(out, "mic_in", cfg.input_channels(), C);
  add_linear(out, "ref_in", cfg.input_channels(), C);
  for (std::size_t i = 0; i < cfg.enc_blocks; ++i)
    add_block(out, "mic_enc." + std::to_string(i), cfg);
  for (std::size_t i = 0; i < cfg.enc_blocks; ++i)
    add_block(out, "ref_enc." + std::to_string(i), cfg);
  add_linear(out, "align", cfg.align_kernel * C, 1);
  add_linear(out, "fuse_in", 2 * C, C);
  for (std::size_t i = 0; i < cfg.fusion_blocks; ++i)
    add_block(out, "fusion." + std::to_string(i), cfg);
  add_linear(out, "ccm1", C, 2 * cfg.ccm_taps());
  add_linear(out, "ccm2", C, 2 * cfg.ccm_taps());
  add_linear(out, "vad", C, 1);
  return out;
}

std::size_t param_count(const ModelConfig& cfg) {
  std::size_t n = 0;
  for (const auto& s : param_specs(cfg)) n += numcore::numel(s.shape);
  return n;
}

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ModelParams out;
  for (const auto& s : param_specs(cfg)) {
    numcore::Tensor<float> t(s.shape);
    if (!s.is_bias) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(s.shape[0]));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (float& v : t.values()) v = static_cast<float>(u(rng));
    }
    out.add(s.name, std::move(t));
  }
  return out;
}

ModelParams zero_params(const ModelConfig& cfg) {
  ModelParams out;
  for (const auto& s : param_specs(cfg))
    out.add(s.name, numcore::Tensor<float>(s.shape));
  return out;
}

void check_params(const ModelConfig& cfg, const ModelParams& params) {
  for (const auto& s : param_specs(cfg)) {
    if (!params.contains(s.name)) {
      throw DimensionError("parameter set lacks '" + s.name + "'");
    }
    const auto& shape = params.get(s.name).shape();
    if (shape != s.shape) {
      throw DimensionError("parameter '" + s.name + "' has shape " +
                           numcore::shape_str(shape) + ", config expects " +
                           numcore::shape_str(s.shape));
    }
  }
}

LoadReport transfer_init(ModelParams& target, const ModelParams& source) {
  LoadReport report;
  for (const auto& name : target.names()) {
    if (!source.contains(name)) continue;
    const auto& ts = target.get(name).shape();
    const auto& ss = source.get(name).shape();
    if (ts != ss) {
      throw DimensionError("transfer_init: '" + name + "' has shape " +
                           numcore::shape_str(ts) + " in the model but " +
                           numcore::shape_str(ss) + " in the source");
    }
  }
  for (const auto& name : target.names()) {
    if (source.contains(name)) {
      target.get(name) = source.get(name);
      report.copied.push_back(name);
    } else {
      report.skipped.push_back(name);
    }
  }
  for (const auto& name : source.names())
    if (!target.contains(name)) report.unused.push_back(name);
  return report;
}

}  // namespace e2eaec::model
