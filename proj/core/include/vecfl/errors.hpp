#pragma once

#include <stdexcept>
#include <string>

namespace vecfl {

// Config file is malformed, has unknown keys, or fails validation. CLI exit 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A required upstream artifact file is absent. CLI exit 3.
class MissingArtifactError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An allocation violates its budget. CLI exit 4.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace vecfl
