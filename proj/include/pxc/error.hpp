#pragma once

#include <stdexcept>
#include <string>

namespace pxc {

// Invalid or infeasible configuration. CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Value outside an operation's domain (e.g. background pixel in a pair query).
struct DomainError : std::runtime_error {
  explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

// Tensor / map dimensions disagree.
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

// A reduction was asked to average over an empty collection.
struct DegenerateBatchError : std::runtime_error {
  explicit DegenerateBatchError(const std::string& what) : std::runtime_error(what) {}
};

// Training produced a non-finite value. CLI maps this to exit code 3.
struct DivergenceError : std::runtime_error {
  explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace pxc
