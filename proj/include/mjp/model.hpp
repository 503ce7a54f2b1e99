#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mjp/common.hpp"
#include "mjp/modulation.hpp"

namespace mjp {

struct StateSpace {
  enum class Kind { Countable, SamplerDefined };
  Kind kind = Kind::Countable;
  // Number of enumerated states retained when a finite view is required.
  State truncation_default = 64;
};

struct RateEntry {
  State target;
  double rate;
};

// A conservative stable transition-rate kernel q(dy|x,s) on an enumerated
// countable space (or a sampler-defined space, simulation only).
// Immutable and safe to share across threads; all queries are pure.
class JumpModel {
 public:
  using TotalRateFn = std::function<double(State, double)>;
  using TargetsFn = std::function<std::vector<RateEntry>(State, double, State)>;
  using TailRateFn = std::function<double(State, double, State)>;
  using RateBoundFn = std::function<double(State)>;
  using WindowBoundFn = std::function<double(State, double, double)>;
  using HazardFn = std::function<double(State, double, double)>;
  using HazardTailFn = std::function<double(State, double)>;

  class Builder;

  double total_rate(State x, double s) const;  // q_x(s)
  // Off-diagonal rates to targets with index < truncation.
  std::vector<RateEntry> jump_targets(State x, double s, State truncation) const;
  // Declared rate mass to targets outside the truncation.
  double tail_rate(State x, double s, State truncation) const;
  double rate_bound(State x) const;  // sup_s q_x(s), may be +inf
  double rate_bound_on(State x, double t0, double t1) const;

  bool has_hazard_integral() const;
  double hazard_integral(State x, double s, double t) const;  // ∫_s^t q_x
  // Total remaining hazard ∫_s^∞ q_x; +inf unless the modulation decays.
  double hazard_to_infinity(State x, double s) const;

  bool homogeneous() const;
  // Rates time-constant from *from onward (piecewise/constant families).
  bool eventually_constant(double* from = nullptr) const;

  // Set when every rate factorizes as (time-constant base) * g(t); lets
  // solvers precompute the target structure once.
  const std::optional<Modulation>& separable_modulation() const;

  const StateSpace& space() const;
  const std::string& name() const;

  // Largest per-state bound over states < truncation on the time window.
  double max_rate_on(State truncation, double t0, double t1) const;

  // All targets of x at time s; grows the enumeration until the declared
  // tail vanishes. Throws ModelError if mass is missing past the cap.
  std::vector<RateEntry> full_targets(State x, double s) const;

 private:
  friend class Builder;
  struct Impl;
  std::shared_ptr<const Impl> impl_;
};

class JumpModel::Builder {
 public:
  Builder();
  Builder& name(std::string v);
  Builder& space(StateSpace v);
  Builder& total_rate(TotalRateFn v);
  Builder& targets(TargetsFn v);
  Builder& tail_rate(TailRateFn v);
  Builder& rate_bound(RateBoundFn v);
  Builder& rate_bound_window(WindowBoundFn v);
  Builder& hazard_integral(HazardFn v);
  Builder& hazard_to_infinity(HazardTailFn v);
  Builder& homogeneous(bool v);
  Builder& eventually_constant_from(std::optional<double> v);
  Builder& separable_modulation(Modulation g);
  JumpModel build() const;

 private:
  std::shared_ptr<Impl> impl_;
};

// Birth-death family: q_n(t) = (birth_n + death_n) g(t), jumps to n+1 and
// n-1 (death omitted at n = 0). Rates must be finite and nonnegative.
JumpModel build_birth_death(std::function<double(State)> birth,
                            std::function<double(State)> death,
                            const Modulation& modulation,
                            std::string name = "birth_death",
                            State truncation_default = 64);

// Strictly positive f with generator action bounded by c f (CDrift), or a
// nonnegative test function V for the drift conditions (ConditionV).
class DriftFunction {
 public:
  enum class Kind { CDrift, ConditionV };

  using ValueFn = std::function<double(double, State)>;

  DriftFunction() = default;
  DriftFunction(Kind kind, ValueFn value, double constant,
                std::string description = "");

  double value(double v, State x) const;
  double operator()(double v, State x) const { return value(v, x); }

  Kind kind() const { return kind_; }
  // c for CDrift, alpha for ConditionV (when fixed).
  double constant() const { return constant_; }

  bool has_time_derivative() const { return static_cast<bool>(deriv_); }
  double time_derivative(double v, State x) const;
  DriftFunction& with_time_derivative(ValueFn d);

  bool time_constant() const { return time_constant_; }
  DriftFunction& declare_time_constant(bool v);

  double sup_hint() const { return sup_hint_; }  // sup over all states; may be +inf
  DriftFunction& with_sup_hint(double v);

  const std::string& description() const { return description_; }

 private:
  Kind kind_ = Kind::ConditionV;
  ValueFn value_;
  ValueFn deriv_;
  double constant_ = 0.0;
  bool time_constant_ = true;
  double sup_hint_ = kInf;
  std::string description_;
};

// Monotone nondecreasing ladder of sets S_n with S_n up to S.
class SetSequence {
 public:
  using MemberFn = std::function<bool(long, State)>;

  SetSequence() = default;
  SetSequence(MemberFn member, std::string description = "prefix");
  static SetSequence prefix();  // S_n = {0,...,n}
  static SetSequence all();     // S_n = S for every n (bounded models)

  bool member(long n, State x) const;
  const std::string& description() const { return description_; }

 private:
  MemberFn member_;
  std::string description_;
};

struct QValidationEntry {
  State x;
  double s;
  double residual;        // |sum of off-diagonal rates - q_x(s)|
  double tail_allowance;  // declared tail bound at this truncation
  bool stable;            // q_x(s) <= rate_bound(x)
};

struct QValidationReport {
  bool pass = true;
  double max_residual = 0.0;
  long checked = 0;
  std::optional<QValidationEntry> first_failure;
};

// Conservativeness and stability spot checks over (state, time) samples.
QValidationReport validate_q_function(const JumpModel& model, State truncation,
                                      const std::vector<double>& time_samples);

struct CDriftWitness {
  State x;
  double s;
  double residual;  // ∫ f dq - c f(x), positive means violation
};

struct CDriftReport {
  bool pass = true;
  double max_residual = -kInf;  // max signed residual over the domain
  std::optional<CDriftWitness> witness;
};

// Checks ∫ f(y) q(dy|x,s) <= c f(x) over the verification domain.
// Throws ModelError if f is nonpositive at a checked state.
CDriftReport validate_c_drift(const JumpModel& model, const DriftFunction& f,
                              State truncation,
                              const std::vector<double>& time_samples);

// Generator action ∫ g dq(.|x,s) for a time-slice of g.
double generator_apply(const JumpModel& model, State x, double s,
                       const std::function<double(State)>& g);

inline void require_countable(const JumpModel& model, const char* op) {
  if (model.space().kind != StateSpace::Kind::Countable)
    throw ConfigError(std::string(op) +
                      ": sampler-defined spaces support simulation only");
}

}  // namespace mjp
