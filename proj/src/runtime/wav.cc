#include "e2eaec/runtime/wav.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "e2eaec/error.h"

namespace e2eaec::runtime {

namespace {

using Kind = FormatError::Kind;

std::uint32_t le32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 |
         std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}
std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}

void put32(std::vector<unsigned char>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<unsigned char>(v >> (8 * i)));
}
void put16(std::vector<unsigned char>& b, std::uint16_t v) {
  b.push_back(static_cast<unsigned char>(v));
  b.push_back(static_cast<unsigned char>(v >> 8));
}
void put_tag(std::vector<unsigned char>& b, const char* tag) {
  b.insert(b.end(), tag, tag + 4);
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

}  // namespace

dsp::AudioBuffer wav_read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(Kind::kIo, "cannot open '" + path + "'");
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  auto fail = [&](Kind k, const std::string& why) {
    throw FormatError(k, "'" + path + "': " + why);
  };
  if (buf.size() < 12) fail(Kind::kHeader, "truncated RIFF header");
  if (std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0) {
    fail(Kind::kMagic, "not a RIFF/WAVE file");
  }

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;
  std::size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const unsigned char* ck = buf.data() + pos;
    const std::uint32_t len = le32(ck + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(ck, "fmt ", 4) == 0) {
      if (len < 16 || body + len > buf.size()) fail(Kind::kHeader, "truncated fmt chunk");
      format = le16(buf.data() + body);
      channels = le16(buf.data() + body + 2);
      rate = le32(buf.data() + body + 4);
      bits = le16(buf.data() + body + 14);
      if (format == kFormatExtensible) {
        if (len < 26) fail(Kind::kHeader, "truncated extensible fmt chunk");
        format = le16(buf.data() + body + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(ck, "data", 4) == 0) {
      if (!have_fmt) fail(Kind::kHeader, "data chunk before fmt chunk");
      if (body + len > buf.size()) {
        fail(Kind::kLength, "data chunk declares " + std::to_string(len) +
                                " bytes, file holds " +
                                std::to_string(buf.size() - body));
      }
      data = buf.data() + body;
      data_len = len;
      break;
    }
    pos = body + len + (len & 1);
  }
  if (!have_fmt) fail(Kind::kHeader, "missing fmt chunk");
  if (!data) fail(Kind::kHeader, "missing data chunk");
  if (channels != 1) {
    fail(Kind::kUnsupported, std::to_string(channels) + " channels (mono only)");
  }
  if (rate == 0) fail(Kind::kHeader, "zero sample rate");
  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool f32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !f32) {
    fail(Kind::kUnsupported, "format tag " + std::to_string(format) + " with " +
                                 std::to_string(bits) +
                                 " bits (PCM16 or float32 only)");
  }
  const std::size_t width = bits / 8;
  if (data_len % width != 0) fail(Kind::kLength, "data length not a whole sample count");

  dsp::AudioBuffer out(data_len / width, static_cast<int>(rate));
  for (std::size_t i = 0; i < out.size(); ++i) {
    const unsigned char* s = data + i * width;
    if (pcm16) {
      out[i] = static_cast<std::int16_t>(le16(s)) / 32768.0;
    } else {
      const std::uint32_t u = le32(s);
      float f;
      std::memcpy(&f, &u, 4);
      out[i] = f;
    }
  }
  return out;
}

void wav_write(const std::string& path, const dsp::AudioBuffer& audio,
               WavEncoding encoding) {
  if (audio.sample_rate <= 0) {
    throw ContractError("wav_write: sample rate must be positive");
  }
  const bool pcm = encoding == WavEncoding::kPcm16;
  const std::uint16_t bits = pcm ? 16 : 32;
  const std::uint32_t data_len =
      static_cast<std::uint32_t>(audio.size() * (bits / 8));
  std::vector<unsigned char> b;
  b.reserve(44 + data_len);
  put_tag(b, "RIFF");
  put32(b, 36 + data_len);
  put_tag(b, "WAVE");
  put_tag(b, "fmt ");
  put32(b, 16);
  put16(b, pcm ? kFormatPcm : kFormatFloat);
  put16(b, 1);
  put32(b, static_cast<std::uint32_t>(audio.sample_rate));
  put32(b, static_cast<std::uint32_t>(audio.sample_rate) * (bits / 8));
  put16(b, bits / 8);
  put16(b, bits);
  put_tag(b, "data");
  put32(b, data_len);
  for (double v : audio.samples) {
    if (pcm) {
      const double s = std::clamp(std::round(v * 32768.0), -32768.0, 32767.0);
      put16(b, static_cast<std::uint16_t>(static_cast<std::int16_t>(s)));
    } else {
      const float f = static_cast<float>(v);
      std::uint32_t u;
      std::memcpy(&u, &f, 4);
      put32(b, u);
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(Kind::kIo, "cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(b.data()),
            static_cast<std::streamsize>(b.size()));
  if (!out) throw FormatError(Kind::kIo, "write failed for '" + path + "'");
}

}  // namespace e2eaec::runtime
