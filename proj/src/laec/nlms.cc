#include "e2eaec/laec/nlms.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "e2eaec/error.h"

namespace e2eaec::laec {

void NlmsConfig::validate() const {
  if (taps == 0) throw ContractError("NLMS: taps must be >= 1");
  if (!(mu > 0.0 && mu < 2.0)) {
    throw ContractError("NLMS: mu must lie in (0, 2), got " +
                        std::to_string(mu));
  }
  if (!(eps > 0.0)) throw ContractError("NLMS: eps must be > 0");
}

NlmsFilter::NlmsFilter(NlmsConfig cfg)
    : cfg_(cfg), w_(cfg.taps, 0.0), u_(cfg.taps, 0.0) {
  cfg_.validate();
}

void NlmsFilter::reset() {
  std::fill(w_.begin(), w_.end(), 0.0);
  std::fill(u_.begin(), u_.end(), 0.0);
  head_ = 0;
  energy_ = 0.0;
  last_estimate_ = 0.0;
}

double NlmsFilter::process(double mic, double ref) {
  const std::size_t L = cfg_.taps;
  head_ = head_ == 0 ? L - 1 : head_ - 1;
  energy_ += ref * ref - u_[head_] * u_[head_];
  u_[head_] = ref;
  // Refresh the running sum once per buffer cycle to bound drift.
  if (head_ == 0) {
    energy_ = 0.0;
    for (double v : u_) energy_ += v * v;
  } else if (energy_ < 0.0) {
    energy_ = 0.0;
  }

  // Tap k pairs with u_[(head_ + k) % L].
  const std::size_t first = L - head_;
  double y = 0.0;
  for (std::size_t k = 0; k < first; ++k) y += w_[k] * u_[head_ + k];
  for (std::size_t k = first; k < L; ++k) y += w_[k] * u_[k - first];
  last_estimate_ = y;
  const double e = mic - y;

  const double g = cfg_.mu * e / (energy_ + cfg_.eps);
  if (g != 0.0) {
    for (std::size_t k = 0; k < first; ++k) w_[k] += g * u_[head_ + k];
    for (std::size_t k = first; k < L; ++k) w_[k] += g * u_[k - first];
  }
  return e;
}

NlmsOutput nlms_run(const dsp::AudioBuffer& mic, const dsp::AudioBuffer& ref,
                    const NlmsConfig& cfg) {
  dsp::validate(mic, "nlms mic");
  dsp::validate(ref, "nlms ref");
  if (mic.size() != ref.size() || mic.sample_rate != ref.sample_rate) {
    throw ContractError("nlms_run: mic and ref differ in length or rate");
  }
  if (cfg.taps > mic.size()) {
    throw ContractError("nlms_run: " + std::to_string(cfg.taps) +
                        " taps exceed signal length " +
                        std::to_string(mic.size()));
  }
  NlmsFilter filt(cfg);
  NlmsOutput out{dsp::AudioBuffer(mic.size(), mic.sample_rate),
                 dsp::AudioBuffer(mic.size(), mic.sample_rate)};
  for (std::size_t n = 0; n < mic.size(); ++n) {
    out.error[n] = filt.process(mic[n], ref[n]);
    out.echo_estimate[n] = filt.last_estimate();
  }
  return out;
}

HybridOutput hybrid_frontend(const dsp::AudioBuffer& mic,
                             const dsp::AudioBuffer& ref,
                             std::size_t max_delay, const NlmsConfig& cfg) {
  HybridOutput out;
  auto gcfg = dsp::GccPhatConfig::for_rate(mic.sample_rate, max_delay);
  if (gcfg.window_len > std::min(mic.size(), ref.size())) {
    gcfg.window_len = std::min(mic.size(), ref.size());
    gcfg.max_delay = std::min(gcfg.max_delay, gcfg.window_len - 1);
  }
  auto est = dsp::gcc_phat(mic, ref, gcfg);
  std::vector<std::size_t> d;
  for (const auto& e : est) d.push_back(e.delay);
  std::nth_element(d.begin(), d.begin() + d.size() / 2, d.end());
  // Keep a few taps in front of the peak for the part of the echo path
  // that precedes it.
  const std::size_t peak = d[d.size() / 2];
  out.bulk_delay = peak - std::min(peak, cfg.taps / 8);

  out.aligned_ref = dsp::AudioBuffer(ref.size(), ref.sample_rate);
  for (std::size_t n = out.bulk_delay; n < ref.size(); ++n)
    out.aligned_ref[n] = ref[n - out.bulk_delay];
  auto res = nlms_run(mic, out.aligned_ref, cfg);
  out.error = std::move(res.error);
  out.echo_estimate = std::move(res.echo_estimate);
  return out;
}

double erle_db(const dsp::AudioBuffer& mic, const dsp::AudioBuffer& err,
               std::size_t begin, std::size_t end) {
  end = std::min({end, mic.size(), err.size()});
  double pm = 0.0, pe = 0.0;
  for (std::size_t n = begin; n < end; ++n) {
    pm += mic[n] * mic[n];
    pe += err[n] * err[n];
  }
  return 10.0 * std::log10((pm + 1e-20) / (pe + 1e-20));
}

}  // namespace e2eaec::laec
