#pragma once

#include <string>

#include "e2eaec/model/params.h"

// On-disk layout:
//   E2EAEC1
//   count <N>
//   <name> f32 <d0,d1,...|scalar> <byte offset> <byte length>   (N lines)
//   end
//   <payload: little-endian float32, offsets relative to payload start>
namespace e2eaec::runtime {

void checkpoint_save(const model::ModelParams& params, const std::string& path);

// The whole manifest is validated against the file size before any tensor
// is decoded. Errors: kIo, kMagic, kHeader (malformed manifest), kDtype,
// kLength (payload shorter than declared).
model::ModelParams checkpoint_load(const std::string& path);

}  // namespace e2eaec::runtime
