#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mjp/model.hpp"

namespace mjp {

enum class ConditionId { Cond2, Cond5, Cond6, Cond7 };
std::string to_string(ConditionId id);

struct DriftWitness {
  std::string clause;
  double v = 0.0;
  State x = 0;
  double margin = 0.0;
};

struct ClauseResult {
  std::string clause;
  bool pass = true;
  double worst_margin = 0.0;
  std::optional<DriftWitness> witness;
};

// Finite verification domain; the infinite clauses are certified only here.
struct DriftDomain {
  State truncation = 32;
  std::vector<double> time_samples = {0.0};  // v samples for the inequalities
  double extension = 16.0;  // extra states past the truncation for target sums
};

struct LadderSpec {
  enum class Kind { DefaultDoubling, Linear };
  Kind kind = Kind::DefaultDoubling;
  double offset = 0.0;  // Linear: require inf-off-S_n >= offset + slope * n
  double slope = 1.0;
  std::string describe() const;
};

// Fixed alpha, or golden-section search over log alpha maximizing the
// minimum clause-(d) margin.
struct AlphaSpec {
  enum class Kind { Fixed, Search };
  Kind kind = Kind::Fixed;
  double value = 1.0;
  double search_lo = 1e-3;
  double search_hi = 1e3;
  static AlphaSpec fixed(double a) { return {Kind::Fixed, a, 0, 0}; }
  static AlphaSpec search() { return {Kind::Search, 1.0, 1e-3, 1e3}; }
};

struct DriftCertificate {
  ConditionId condition = ConditionId::Cond5;
  std::string model_name;
  std::vector<ClauseResult> clauses;
  bool certified = false;  // certified-on-domain iff every clause passes
  std::optional<DriftWitness> refutation;
  double alpha = 0.0;                      // Cond2/Cond5
  std::map<double, double> alpha_per_horizon;  // Cond6/Cond7
  DriftDomain domain;
  std::string sets_description;
  std::string ladder_description;
  std::string verdict() const { return certified ? "certified-on-domain" : "refuted"; }
};

inline constexpr double kMarginTolerance = 1e-9;

// Generator inequality ∫ V dq <= alpha V pointwise over the domain, plus
// coverage, bounded-rate and growth clauses. V is a state function.
DriftCertificate check_condition5(const JumpModel& model, const DriftFunction& V,
                                  const SetSequence& sets, double alpha,
                                  const DriftDomain& domain,
                                  const LadderSpec& ladder = {});

// Killed-kernel integral inequality over the infinite horizon; sets are
// read as time cylinders [0,inf) x S_n, and sup-over-time clauses fall
// back to the domain window when the global bound is infinite.
DriftCertificate check_condition2(const JumpModel& model, const DriftFunction& V,
                                  const SetSequence& sets, const AlphaSpec& alpha,
                                  const DriftDomain& domain,
                                  const LadderSpec& ladder = {});

// Finite-horizon variant: per horizon T the integral runs over [0, T-v]
// and the growth/rate clauses are windowed by T.
DriftCertificate check_condition7(const JumpModel& model, const DriftFunction& V,
                                  const SetSequence& sets,
                                  const std::map<double, double>& alpha_per_horizon,
                                  const std::vector<double>& horizons,
                                  const DriftDomain& domain,
                                  const LadderSpec& ladder = {},
                                  bool search_alpha = false);

// Differential form: dV/dv + sum_j q(j|i,v) V(v,j) <= alpha_T V(v,i) on
// the grid, with the summability and growth clauses. The time derivative
// is analytic when declared, else central differences cross-checked at two
// step sizes.
DriftCertificate check_condition6(const JumpModel& model, const DriftFunction& V,
                                  const std::map<double, double>& alpha_per_horizon,
                                  const std::vector<double>& horizons,
                                  const DriftDomain& domain,
                                  const LadderSpec& ladder = {},
                                  bool search_alpha = false);

struct ImplicationAudit {
  bool precondition_met = false;  // the differential-form certificate holds
  std::optional<DriftCertificate> cond6;
  std::optional<DriftCertificate> cond7;
  std::optional<DriftCertificate> cond2;
  bool consistent = false;  // both implied conditions certify
};

// Differential-form certificate implies both integral forms; any
// discrepancy on the shared domain is a reportable bug.
ImplicationAudit implication_audit(const JumpModel& model, const DriftFunction& V,
                                   const SetSequence& sets,
                                   const std::map<double, double>& alpha_per_horizon,
                                   const std::vector<double>& horizons,
                                   const DriftDomain& domain,
                                   const LadderSpec& ladder = {});

}  // namespace mjp
