#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace mjp {

// States of a countable space are nonnegative indices. Sampler-defined
// spaces reuse the same handle type opaquely.
using State = std::int64_t;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Rates produced by parametric families saturate here so that explosive
// growth (e.g. 2^n far past any truncation) stays finite in double.
inline constexpr double kRateCap = 1e300;

class MjpError : public std::runtime_error {
 public:
  explicit MjpError(const std::string& what) : std::runtime_error(what) {}
};

// Violated model contract: negative rate, conservativeness failure,
// missing target mass, invalid drift function.
class ModelError : public MjpError {
 public:
  explicit ModelError(const std::string& what) : MjpError(what) {}
};

// Invalid or insufficient configuration: undeclared tail regime, bad
// grid, unusable options.
class ConfigError : public MjpError {
 public:
  explicit ConfigError(const std::string& what) : MjpError(what) {}
};

// A numerical procedure failed its own self-checks (monotonicity
// violation, non-convergence past hard limits).
class NumericsError : public MjpError {
 public:
  explicit NumericsError(const std::string& what) : MjpError(what) {}
};

// Adaptive stepping collapsed below the resolvable step size.
class StiffnessError : public NumericsError {
 public:
  explicit StiffnessError(const std::string& what) : NumericsError(what) {}
};

}  // namespace mjp
