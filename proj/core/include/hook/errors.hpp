#pragma once

#include <stdexcept>
#include <string>

namespace hook {

// Shape or extent disagreement between operands.
struct DimensionError : std::runtime_error {
  explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

// Caller violated an operation's contract (non-scalar backward root,
// empty input, out-of-range label, ...).
struct ContractError : std::runtime_error {
  explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed text input: config files, manifests, netpbm headers.
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem failures (missing file, short write).
struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Scene generation could not satisfy placement constraints.
struct GenerationError : std::runtime_error {
  explicit GenerationError(const std::string& msg) : std::runtime_error(msg) {}
};

// grad_check detected a non-deterministic objective.
struct DeterminismError : std::runtime_error {
  explicit DeterminismError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training aborted (non-finite loss).
struct TrainingError : std::runtime_error {
  explicit TrainingError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace hook
