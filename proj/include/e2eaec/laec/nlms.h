#pragma once

#include <cstddef>
#include <vector>

#include "e2eaec/dsp/audio.h"
#include "e2eaec/dsp/gcc_phat.h"

namespace e2eaec::laec {

struct NlmsConfig {
  std::size_t taps = 1024;
  double mu = 0.5;
  double eps = 1e-6;

  void validate() const;
};

// Sample-by-sample time-domain NLMS. u(n) = [r(n), r(n-1), ..., r(n-L+1)].
class NlmsFilter {
 public:
  explicit NlmsFilter(NlmsConfig cfg = {});

  // Returns e(n) = mic - w^T u(n) and then adapts w.
  double process(double mic, double ref);
  double last_estimate() const { return last_estimate_; }

  const std::vector<double>& weights() const { return w_; }
  const NlmsConfig& config() const { return cfg_; }
  void reset();

 private:
  NlmsConfig cfg_;
  std::vector<double> w_;
  std::vector<double> u_;  // ring buffer, u_[head_] is the newest sample
  std::size_t head_ = 0;
  double energy_ = 0.0;
  double last_estimate_ = 0.0;
};

struct NlmsOutput {
  dsp::AudioBuffer error;
  dsp::AudioBuffer echo_estimate;
};

NlmsOutput nlms_run(const dsp::AudioBuffer& mic, const dsp::AudioBuffer& ref,
                    const NlmsConfig& cfg = {});

struct HybridOutput {
  dsp::AudioBuffer error;          // NLMS output
  dsp::AudioBuffer echo_estimate;
  dsp::AudioBuffer aligned_ref;    // ref shifted by the bulk delay
  std::size_t bulk_delay = 0;      // samples
};

// Bulk delay = median of the GCC-PHAT window estimates minus taps/8 of
// headroom (not below zero); the reference is shifted by it before the
// adaptive filter.
HybridOutput hybrid_frontend(const dsp::AudioBuffer& mic,
                             const dsp::AudioBuffer& ref,
                             std::size_t max_delay,
                             const NlmsConfig& cfg = {});

// 10 log10(sum mic^2 / sum err^2) over [begin, end).
double erle_db(const dsp::AudioBuffer& mic, const dsp::AudioBuffer& err,
               std::size_t begin, std::size_t end);

}  // namespace e2eaec::laec
