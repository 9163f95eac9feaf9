#pragma once

#include <stdexcept>
#include <string>

namespace liefpf {

/// A value failed a structural invariant (non-orthonormal rotation, bad norm,
/// malformed density, schema mismatch, ...).
class InvariantViolation : public std::runtime_error {
 public:
  explicit InvariantViolation(const std::string& what) : std::runtime_error(what) {}
};

/// A numerical procedure could not produce a usable result (singular solve
/// after escalation, CFL substep cap, degenerate weights, ...).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace liefpf
