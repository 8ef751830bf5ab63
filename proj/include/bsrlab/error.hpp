#pragma once

#include <stdexcept>
#include <string>

namespace bsrlab {

/// Invalid input or a violated precondition of a model operation.
class DomainError : public std::runtime_error {
 public:
  explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

/// Allocation or size-guard failure (e.g. a quadratic pair loop refused).
class ResourceError : public std::runtime_error {
 public:
  explicit ResourceError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace bsrlab
