#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace logrca {

/// Invalid configuration or command-line input. CLI exit status 1.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed or degenerate input data. CLI exit status 2.
class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Training diverged (non-finite loss or parameters). CLI exit status 3.
class TrainingError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Collects non-fatal warnings raised while processing data.
struct Diagnostics {
  std::vector<std::string> warnings;

  void warn(std::string msg) { warnings.push_back(std::move(msg)); }
  std::size_t count() const { return warnings.size(); }
};

} // namespace logrca
