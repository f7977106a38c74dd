#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace aabo {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or out-of-domain input (bad boxes, bad files, bad parameters).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// A scale larger than sqrt(W*H): no ratio satisfies both size limits.
class InfeasibleScale : public Error {
 public:
  using Error::Error;
};

// The feasible region of a space (or of a sampling request) is empty.
class InfeasibleSpace : public Error {
 public:
  using Error::Error;
};

class ObjectiveFailure : public Error {
 public:
  using Error::Error;
};

// A trial log line that fails to parse or whose checksum does not match.
class CorruptLog : public Error {
 public:
  CorruptLog(std::size_t line, const std::string& what)
      : Error("trial log line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// The log on disk was produced by a different engine configuration.
class ConfigMismatch : public Error {
 public:
  using Error::Error;
};

}  // namespace aabo
