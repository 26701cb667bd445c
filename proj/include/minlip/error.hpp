#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace minlip {

/// Domain error raised on violated preconditions or unusable data.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The hard-constraint MINLIP program admits no solution.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// Malformed experiment configuration; carries the offending field names.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, std::vector<std::string> fields)
      : Error(what), fields_(std::move(fields)) {}

  const std::vector<std::string>& fields() const noexcept { return fields_; }

 private:
  std::vector<std::string> fields_;
};

}  // namespace minlip
