#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace eet {

enum class ErrorKind {
  Dimension,
  Layout,
  Shape,
  Argument,
  Validation,
  Configuration,
  Resource,
  State,
  Degeneracy,
  Io,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Dimension: return "dimension error";
    case ErrorKind::Layout: return "layout error";
    case ErrorKind::Shape: return "shape error";
    case ErrorKind::Argument: return "argument error";
    case ErrorKind::Validation: return "validation error";
    case ErrorKind::Configuration: return "configuration error";
    case ErrorKind::Resource: return "resource error";
    case ErrorKind::State: return "state error";
    case ErrorKind::Degeneracy: return "degeneracy error";
    case ErrorKind::Io: return "i/o error";
  }
  return "error";
}

/// Every failure raised by the library carries a kind so callers (and the CLI)
/// can branch on the category without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// Re-raise with extra context prepended, keeping the kind.
  [[noreturn]] void rethrow_with_context(const std::string& context) const {
    throw Error(kind_, context + ": " + detail());
  }

  std::string detail() const {
    std::string msg = what();
    const auto prefix = std::string(to_string(kind_)) + ": ";
    if (msg.rfind(prefix, 0) == 0) msg.erase(0, prefix.size());
    return msg;
  }

 private:
  ErrorKind kind_;
};

}  // namespace eet
