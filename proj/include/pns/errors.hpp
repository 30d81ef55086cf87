#pragma once

#include <stdexcept>
#include <string>

namespace pns {

// Value out of representable range (immediate widths, name-map over/underflow).
struct RangeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct AssemblyError : std::runtime_error {
  int line;
  AssemblyError(int line_, const std::string& msg)
      : std::runtime_error("line " + std::to_string(line_) + ": " + msg), line(line_) {}
};

struct AnalysisError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RewriteError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LoadError : std::runtime_error {
  std::string invariant;
  LoadError(std::string invariant_, const std::string& msg)
      : std::runtime_error("image invariant '" + invariant_ + "': " + msg),
        invariant(std::move(invariant_)) {}
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SpecError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct HarnessError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnknownGadgetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace pns
