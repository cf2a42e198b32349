#pragma once

#include <stdexcept>
#include <string>

namespace e2eaec {

// Shape or size disagreement between operands.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A precondition of an operation was violated by the caller.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Malformed or unsupported on-disk data (WAV files, checkpoints).
class FormatError : public std::runtime_error {
 public:
  enum class Kind {
    kIo,
    kMagic,
    kHeader,
    kLength,
    kDtype,
    kUnsupported,
  };

  FormatError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

}  // namespace e2eaec
