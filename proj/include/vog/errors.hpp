#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace vog {

// Error taxonomy shared by the library and the CLI. Every failure surfaces
// as an Error whose kind() is a stable machine-parseable token; the CLI
// prints "<kind>: <message>" and exits nonzero.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

struct ShapeError : Error {
  explicit ShapeError(const std::string& m) : Error("shape_error", m) {}
};
struct IndexError : Error {
  explicit IndexError(const std::string& m) : Error("index_error", m) {}
};
struct ValidationError : Error {
  explicit ValidationError(const std::string& m) : Error("validation_error", m) {}
};
struct IoError : Error {
  explicit IoError(const std::string& m) : Error("io_error", m) {}
};
struct CorruptionError : Error {
  explicit CorruptionError(const std::string& m) : Error("corruption_error", m) {}
};
struct FormatError : Error {
  explicit FormatError(const std::string& m) : Error("format_error", m) {}
};
struct TrainingError : Error {
  explicit TrainingError(const std::string& m) : Error("training_error", m) {}
};
struct AnalysisError : Error {
  explicit AnalysisError(const std::string& m) : Error("analysis_error", m) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& m) : Error("config_error", m) {}
};

}  // namespace vog
