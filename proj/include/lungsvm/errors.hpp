#pragma once

#include <stdexcept>
#include <string>

namespace lungsvm {

/// Base of every error raised by the library. what() is "<Kind>: <message>",
/// so callers that only see the text (the CLI) can still report the kind.
class Error : public std::runtime_error {
 public:
  Error(const std::string& kind, const std::string& message)
      : std::runtime_error(kind + ": " + message), kind_(kind) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define LUNGSVM_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                        \
   public:                                                           \
    explicit Name(const std::string& message) : Error(#Name, message) {} \
  };

LUNGSVM_DEFINE_ERROR(IoError)
LUNGSVM_DEFINE_ERROR(FormatError)
LUNGSVM_DEFINE_ERROR(VersionError)
LUNGSVM_DEFINE_ERROR(EmptyDatasetError)
LUNGSVM_DEFINE_ERROR(SpecError)
LUNGSVM_DEFINE_ERROR(SplitError)
LUNGSVM_DEFINE_ERROR(WindowError)
LUNGSVM_DEFINE_ERROR(TooSmallError)
LUNGSVM_DEFINE_ERROR(ShapeError)
LUNGSVM_DEFINE_ERROR(DataError)
LUNGSVM_DEFINE_ERROR(DivergenceError)
LUNGSVM_DEFINE_ERROR(DimError)
LUNGSVM_DEFINE_ERROR(LengthError)
LUNGSVM_DEFINE_ERROR(EmptyError)
LUNGSVM_DEFINE_ERROR(ConfigError)

#undef LUNGSVM_DEFINE_ERROR

}  // namespace lungsvm
