#include "e2eaec/model/config.h"

#include "e2eaec/error.h"

namespace e2eaec::model {

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) {
    throw ContractError("model config: " + what);
  };
  if (channels == 0 || gru_hidden == 0) fail("channels and gru_hidden must be > 0");
  if (max_delay == 0) fail("max_delay must be >= 1");
  if (align_kernel == 0) fail("align_kernel must be >= 1");
  if (enc_blocks == 0) fail("enc_blocks must be >= 1");
  if (unfold_kernel == 0) fail("unfold_kernel must be >= 1");
  if (unfold_stride != 1) fail("only unfold_stride 1 keeps the frame rate");
  if (ccm_kt == 0) fail("ccm_kt must be >= 1");
  if (ccm_kf % 2 == 0) fail("ccm_kf must be odd so the mask is centred");
  if (bins < 2) fail("bins must be >= 2");
  const std::size_t L = layer_count();
  if (vad_tap_layer < 1 || vad_tap_layer > L)
    fail("vad_tap_layer must lie in [1, " + std::to_string(L) + "]");
  if (mid_tap_layer < 1 || mid_tap_layer > L)
    fail("mid_tap_layer must lie in [1, " + std::to_string(L) + "]");
}

std::string to_string(InputFeatures f) {
  return f == InputFeatures::kReIm ? "reim" : "reim_logmag";
}

InputFeatures input_features_from_string(const std::string& s) {
  if (s == "reim") return InputFeatures::kReIm;
  if (s == "reim_logmag") return InputFeatures::kReImLogMag;
  throw ContractError("unknown input feature set '" + s +
                      "' (expected reim or reim_logmag)");
}

}  // namespace e2eaec::model
