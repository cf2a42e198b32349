#include "e2eaec/dsp/audio.h"

#include <cmath>
#include <string>

#include "e2eaec/error.h"

namespace e2eaec::dsp {

void validate(const AudioBuffer& audio, const char* what) {
  if (audio.sample_rate <= 0) {
    throw ContractError(std::string(what) + ": sample rate must be positive");
  }
  for (double v : audio.samples) {
    if (!std::isfinite(v)) {
      throw ContractError(std::string(what) + ": non-finite sample");
    }
  }
}

double energy(const AudioBuffer& audio) {
  double e = 0.0;
  for (double v : audio.samples) e += v * v;
  return e;
}

}  // namespace e2eaec::dsp
