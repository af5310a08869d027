#pragma once

#include <stdexcept>
#include <string>

namespace kgsw {

enum class ErrorKind {
  io,
  parse,
  config,
  lookup,
  numeric,
  undefined_metric,
  partition_mismatch,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace kgsw
