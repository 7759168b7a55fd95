#pragma once

#include <stdexcept>
#include <string>

namespace otssl {

// Error taxonomy shared by the library and the CLI: the CLI maps these to
// process exit codes (config -> 1, io -> 2, numeric -> 3).
struct config_error : std::runtime_error {
  explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct io_error : std::runtime_error {
  explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct numeric_error : std::runtime_error {
  explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor/layer dimension mismatches.
struct shape_error : std::runtime_error {
  explicit shape_error(const std::string& msg) : std::runtime_error(msg) {}
};

inline constexpr const char* kGeneratorVersion = "1.0";
inline constexpr const char* kSolverVersion = "1.0";

}  // namespace otssl
