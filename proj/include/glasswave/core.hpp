// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace glasswave {

using cdouble = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kSpeedOfSound = 343.0;

enum class ErrorKind {
  invalid_input,
  degenerate_geometry,
  numerical_failure,
  infeasible,
  shape_mismatch,
  placement,
  io,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_input: return "invalid input";
    case ErrorKind::degenerate_geometry: return "degenerate geometry";
    case ErrorKind::numerical_failure: return "numerical failure";
    case ErrorKind::infeasible: return "infeasible";
    case ErrorKind::shape_mismatch: return "shape mismatch";
    case ErrorKind::placement: return "placement failure";
    case ErrorKind::io: return "i/o error";
  }
  return "unknown";
}

/// Every failure raised by the library. `module()` names the subsystem that
/// raised it so the CLI can tag messages; `kind()` drives exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string module, const std::string& message)
      : std::runtime_error("[" + module + "] " + std::string(to_string(kind)) + ": " + message),
        kind_(kind),
        module_(std::move(module)),
        detail_(message) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& module() const noexcept { return module_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string module_;
  std::string detail_;
};

// SplitMix64 finalizer; used to derive independent child seeds from a root.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream, std::uint64_t index = 0) {
  return splitmix64(splitmix64(splitmix64(root) ^ stream) ^ index);
}

enum class LogLevel { quiet = 0, info = 1, debug = 2 };

/// Verbosity comes from GLASSWAVE_LOG (quiet | info | debug); default info.
inline LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("GLASSWAVE_LOG");
    if (env == nullptr) return LogLevel::info;
    const std::string_view v(env);
    if (v == "quiet" || v == "0") return LogLevel::quiet;
    if (v == "debug" || v == "2") return LogLevel::debug;
    return LogLevel::info;
  }();
  return level;
}

inline void log(LogLevel level, std::string_view message) {
  if (static_cast<int>(level) <= static_cast<int>(log_level()) && level != LogLevel::quiet) {
    std::cerr << "glasswave: " << message << '\n';
  }
}

}  // namespace glasswave
