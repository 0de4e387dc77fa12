#pragma once

#include <stdexcept>
#include <string>

namespace usrl {

enum class ErrorKind {
  invalid_argument,
  io,
  parse,
  structure,
  no_evidence,
  version,
  numeric,
  config,
};

// Single exception type for the core; the C layer maps `kind()` onto status codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace usrl
