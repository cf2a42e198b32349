#include "e2eaec/dsp/gcc_phat.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>

#include "e2eaec/dsp/fft.h"
#include "e2eaec/error.h"

namespace e2eaec::dsp {

GccPhatConfig GccPhatConfig::for_rate(int sample_rate, std::size_t max_delay) {
  GccPhatConfig cfg;
  cfg.window_len = static_cast<std::size_t>(sample_rate);
  cfg.window_hop = static_cast<std::size_t>(sample_rate) / 10;
  cfg.max_delay = std::min(max_delay, cfg.window_len - 1);
  return cfg;
}

std::vector<DelayEstimate> gcc_phat(const AudioBuffer& mic,
                                    const AudioBuffer& ref,
                                    const GccPhatConfig& cfg) {
  if (mic.sample_rate != ref.sample_rate) {
    throw ContractError("gcc_phat: sample rates differ (" +
                        std::to_string(mic.sample_rate) + " vs " +
                        std::to_string(ref.sample_rate) + ")");
  }
  if (cfg.window_len == 0 || cfg.window_hop == 0 ||
      cfg.max_delay >= cfg.window_len) {
    throw ContractError("gcc_phat: need 0 <= max_delay < window_len and a "
                        "positive hop");
  }
  const std::size_t len = std::min(mic.size(), ref.size());
  if (cfg.window_len > len) {
    throw ContractError("gcc_phat: window of " +
                        std::to_string(cfg.window_len) +
                        " samples exceeds signal length " +
                        std::to_string(len));
  }

  const std::size_t n = next_pow2(2 * cfg.window_len);
  RealFft fft(n);
  std::vector<std::complex<double>> M(fft.bins()), R(fft.bins());
  std::vector<double> cc(n);
  std::vector<DelayEstimate> out;
  for (std::size_t start = 0; start + cfg.window_len <= len;
       start += cfg.window_hop) {
    fft.forward({mic.samples.data() + start, cfg.window_len}, M);
    fft.forward({ref.samples.data() + start, cfg.window_len}, R);
    for (std::size_t k = 0; k < M.size(); ++k) {
      const std::complex<double> cross = M[k] * std::conj(R[k]);
      M[k] = cross / std::max(std::abs(cross), cfg.magnitude_floor);
    }
    fft.inverse(M, cc);

    DelayEstimate est;
    est.window_start = start;
    double peak = cc[0], sum_abs = 0.0;
    for (std::size_t lag = 0; lag <= cfg.max_delay; ++lag) {
      sum_abs += std::abs(cc[lag]);
      if (cc[lag] > peak) {
        peak = cc[lag];
        est.delay = lag;
      }
    }
    const double mean_abs = sum_abs / static_cast<double>(cfg.max_delay + 1);
    est.confidence = mean_abs > 0.0 ? peak / mean_abs : 0.0;
    out.push_back(est);
  }
  return out;
}

std::size_t discretize_delay(double delay_samples, std::size_t hop,
                             std::size_t num_classes) {
  if (hop == 0 || num_classes == 0) {
    throw ContractError("discretize_delay: hop and class count must be > 0");
  }
  const double cls = std::round(std::max(delay_samples, 0.0) /
                                static_cast<double>(hop));
  return std::min(static_cast<std::size_t>(cls), num_classes - 1);
}

}  // namespace e2eaec::dsp
