#pragma once

#include <stdexcept>
#include <string>

namespace pgt {

// Configuration problems: bad values, unknown keys, missing required fields.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// A pipeline command was invoked before its upstream artifacts exist.
class PrerequisiteError : public std::runtime_error {
 public:
  explicit PrerequisiteError(const std::string& what) : std::runtime_error(what) {}
};

// Contract violations and runtime failures (bad inputs, IO, overflow).
class PipelineError : public std::runtime_error {
 public:
  explicit PipelineError(const std::string& what) : std::runtime_error(what) {}
};

inline const char* kToolVersion = "pgt 0.1.0";

}  // namespace pgt
