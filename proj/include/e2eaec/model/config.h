#pragma once

#include <cstddef>
#include <string>

namespace e2eaec::model {

enum class InputFeatures {
  kReIm,        // real and imaginary parts
  kReImLogMag,  // plus log(1 + |X|)
};

struct ModelConfig {
  std::size_t channels = 64;       // C
  std::size_t gru_hidden = 64;     // N
  std::size_t max_delay = 100;     // H, attention lookback in frames
  std::size_t align_kernel = 1;    // causal taps along time of the D_p collapse
  std::size_t enc_blocks = 1;      // RNN blocks per encoder branch
  std::size_t fusion_blocks = 8;
  std::size_t unfold_kernel = 4;
  std::size_t unfold_stride = 1;
  std::size_t ccm_kt = 2;          // mask taps along time (current + past)
  std::size_t ccm_kf = 3;          // mask taps along frequency, centred
  std::size_t vad_tap_layer = 5;
  std::size_t mid_tap_layer = 5;
  std::size_t bins = 257;          // F
  InputFeatures features = InputFeatures::kReIm;

  // Global layer numbering: 1..E mic encoder blocks, E+1..2E ref encoder
  // blocks, then the fusion blocks. A tap inside the ref encoder range reads
  // the last mic encoder block instead.
  std::size_t layer_count() const { return 2 * enc_blocks + fusion_blocks; }
  std::size_t input_channels() const {
    return features == InputFeatures::kReIm ? 2 : 3;
  }
  std::size_t ccm_taps() const { return ccm_kt * ccm_kf; }

  // Throws ContractError on inconsistent settings.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

std::string to_string(InputFeatures f);
InputFeatures input_features_from_string(const std::string& s);

}  // namespace e2eaec::model
