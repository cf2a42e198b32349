#pragma once

#include <string>

#include "e2eaec/dsp/audio.h"

namespace e2eaec::runtime {

enum class WavEncoding { kPcm16, kFloat32 };

// Mono RIFF/WAVE, PCM16 or IEEE float32. PCM16 maps to [-1, 1) by /32768.
// Throws FormatError (kIo, kMagic, kHeader, kLength, kUnsupported); no
// partially decoded buffer is ever returned.
dsp::AudioBuffer wav_read(const std::string& path);

// PCM16 rounds to nearest and saturates; float32 stores the samples as
// floats, so float-representable input round-trips bit-exactly.
void wav_write(const std::string& path, const dsp::AudioBuffer& audio,
               WavEncoding encoding = WavEncoding::kFloat32);

}  // namespace e2eaec::runtime
