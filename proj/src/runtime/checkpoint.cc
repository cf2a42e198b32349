#include "e2eaec/runtime/checkpoint.h"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <vector>

#include "e2eaec/error.h"

namespace e2eaec::runtime {

namespace {

using Kind = FormatError::Kind;
constexpr const char* kMagic = "E2EAEC1";

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload is written in host order");

std::string shape_field(const numcore::Shape& s) {
  if (s.empty()) return "scalar";
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(s[i]);
  }
  return out;
}

struct Record {
  std::string name;
  numcore::Shape shape;
  std::uint64_t offset = 0, length = 0;
};

}  // namespace

void checkpoint_save(const model::ModelParams& params, const std::string& path) {
  std::ostringstream head;
  head << kMagic << "\n" << "count " << params.size() << "\n";
  std::uint64_t offset = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& name = params.names()[i];
    if (name.empty() || name.find_first_of(" \t\n") != std::string::npos) {
      throw ContractError("checkpoint: tensor name '" + name +
                          "' must be non-empty without whitespace");
    }
    const std::uint64_t len = params.at(i).size() * sizeof(float);
    head << name << " f32 " << shape_field(params.at(i).shape()) << " "
         << offset << " " << len << "\n";
    offset += len;
  }
  head << "end\n";
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(Kind::kIo, "cannot write '" + path + "'");
  const std::string h = head.str();
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    out.write(reinterpret_cast<const char*>(params.at(i).data()),
              static_cast<std::streamsize>(params.at(i).size() * sizeof(float)));
  }
  if (!out) throw FormatError(Kind::kIo, "write failed for '" + path + "'");
}

model::ModelParams checkpoint_load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(Kind::kIo, "cannot open '" + path + "'");
  std::vector<char> buf((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
  auto fail = [&](Kind k, const std::string& why) {
    throw FormatError(k, "'" + path + "': " + why);
  };

  std::size_t pos = 0;
  auto next_line = [&](const char* what) {
    const void* nl = std::memchr(buf.data() + pos, '\n', buf.size() - pos);
    if (!nl) fail(Kind::kHeader, std::string("truncated manifest at ") + what);
    const std::size_t end = static_cast<const char*>(nl) - buf.data();
    std::string line(buf.data() + pos, end - pos);
    pos = end + 1;
    return line;
  };

  const std::size_t magic_len = std::strlen(kMagic);
  if (buf.size() < magic_len + 1 ||
      std::memcmp(buf.data(), kMagic, magic_len) != 0 || buf[magic_len] != '\n') {
    fail(Kind::kMagic, "bad magic (expected E2EAEC1)");
  }
  pos = magic_len + 1;

  std::size_t count = 0;
  {
    std::istringstream ls(next_line("count"));
    std::string key;
    if (!(ls >> key >> count) || key != "count") fail(Kind::kHeader, "missing count line");
  }
  std::vector<Record> records;
  std::uint64_t expected_offset = 0;
  for (std::size_t i = 0; i < count; ++i) {
    std::istringstream ls(next_line("tensor record"));
    Record r;
    std::string dtype, shape;
    if (!(ls >> r.name >> dtype >> shape >> r.offset >> r.length)) {
      fail(Kind::kHeader, "malformed record " + std::to_string(i));
    }
    if (dtype != "f32") fail(Kind::kDtype, "tensor '" + r.name + "' has dtype " + dtype);
    if (shape != "scalar") {
      std::istringstream ss(shape);
      std::string dim;
      while (std::getline(ss, dim, ',')) {
        try {
          std::size_t used = 0;
          r.shape.push_back(std::stoull(dim, &used));
          if (used != dim.size()) throw std::invalid_argument(dim);
        } catch (const std::exception&) {
          fail(Kind::kHeader, "tensor '" + r.name + "' has bad shape " + shape);
        }
      }
    }
    if (r.length != numcore::numel(r.shape) * sizeof(float) ||
        r.offset != expected_offset) {
      fail(Kind::kHeader, "tensor '" + r.name + "' declares offset " +
                              std::to_string(r.offset) + " and " +
                              std::to_string(r.length) + " bytes, inconsistent with its shape");
    }
    expected_offset += r.length;
    records.push_back(std::move(r));
  }
  if (next_line("end") != "end") fail(Kind::kHeader, "missing end marker");

  const std::uint64_t payload = buf.size() - pos;
  if (payload < expected_offset) {
    fail(Kind::kLength, "manifest declares " + std::to_string(expected_offset) +
                            " payload bytes, file holds " + std::to_string(payload));
  }
  if (payload > expected_offset) {
    fail(Kind::kLength, "file holds " + std::to_string(payload - expected_offset) +
                            " bytes beyond the declared payload");
  }

  model::ModelParams out;
  for (const auto& r : records) {
    numcore::Tensor<float> t(r.shape);
    std::memcpy(t.data(), buf.data() + pos + r.offset, r.length);
    try {
      out.add(r.name, std::move(t));
    } catch (const ContractError&) {
      fail(Kind::kHeader, "duplicate tensor '" + r.name + "'");
    }
  }
  return out;
}

}  // namespace e2eaec::runtime
