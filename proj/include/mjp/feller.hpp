#pragma once

#include <variant>
#include <vector>

#include "mjp/model.hpp"

namespace mjp {

struct SeriesInfo {
  long n_terms = 0;        // highest jump-count term accumulated
  double tail_bound = 0.0; // Poisson bound on the omitted terms
  double quad_error = 0.0; // node-doubling estimate
};

struct OdeInfo {
  long steps = 0;
  long rejected = 0;
  double min_dt = 0.0;
};

// A computed sub-probability measure P(s,x,t,.) on a truncated state set,
// with explicit bookkeeping of mass that left the truncation and mass not
// accounted for at all (the explosion/tail indicator).
struct TransitionEstimate {
  double s = 0.0;
  State x = 0;
  double t = 0.0;
  State truncation = 0;
  std::vector<double> masses;  // index = state, size = truncation
  double outside_mass = 0.0;
  double deficit = 0.0;
  double error_budget = 0.0;
  std::variant<SeriesInfo, OdeInfo> method;

  double mass(State y) const { return masses.at(static_cast<std::size_t>(y)); }
  double in_truncation_mass() const;
  double total_accounted() const { return in_truncation_mass() + outside_mass; }
  double target_mass(const std::vector<State>& targets) const;
};

struct SeriesOptions {
  unsigned nodes = 32;       // per recursion level; doubled for error estimate
  double outside_ceiling = 1.0;
  double early_stop = 1e-16; // stop once level increments stay below this
};

struct OdeOptions {
  double abs_tol = 1e-9;
  double rel_tol = 1e-9;
  long max_steps = 200000000;
};

// Jump-count series: sum of the n-jump kernels up to n_terms, each level
// produced by Gauss-Legendre quadrature of the recursion integral.
TransitionEstimate feller_series(const JumpModel& model, double s, State x,
                                 double t, State truncation, long n_terms,
                                 const SeriesOptions& options = {});

// Forward-equation route: integrates the truncated linear system with an
// accumulator for flux into the truncation complement.
TransitionEstimate forward_ode(const JumpModel& model, double s, State x,
                               double t, State truncation,
                               const OdeOptions& options = {});

// One integration pass reporting mass vectors at each requested time.
struct OdeCurve {
  std::vector<double> times;
  std::vector<std::vector<double>> masses;  // per time, size = truncation
  std::vector<double> outside;
  OdeInfo info;
};
OdeCurve forward_ode_curve(const JumpModel& model, double s, State x,
                           State truncation, std::vector<double> times,
                           const OdeOptions& options = {});

enum class TransitionMethod { Series, ForwardOde };

// Max residual of the semigroup identity over singleton targets.
double chapman_kolmogorov_check(const JumpModel& model, double s, double u,
                                double t, State x, State truncation,
                                TransitionMethod method = TransitionMethod::ForwardOde,
                                const OdeOptions& ode = {},
                                const SeriesOptions& series = {});

// P under the truncation-frozen kernels, one value per schedule entry.
// The sequence must be nondecreasing; violations beyond 1e-10 are a
// numerics bug and throw.
std::vector<double> truncation_limit(const JumpModel& model, double s, State x,
                                     double t, const std::vector<State>& target_set,
                                     const std::vector<State>& schedule,
                                     TransitionMethod method = TransitionMethod::Series,
                                     const SeriesOptions& series = {},
                                     const OdeOptions& ode = {});

struct ResolventResult {
  double value = 0.0;
  double error_budget = 0.0;
  std::vector<double> per_truncation;
  double stabilization_gap = 0.0;
  bool stabilized = true;
};

struct ResolventOptions {
  double horizon = 0.0;  // 0: choose max(40/alpha, 8)
  double stabilization_tol = 1e-3;
  OdeOptions ode;
};

// alpha * ∫ e^{-alpha t} P(v,x,v+t,S) dt, with P(.,S) approximated by the
// nondecreasing in-truncation mass along the schedule. Equals 1 exactly
// for nonexplosive processes.
ResolventResult resolvent(const JumpModel& model, double alpha, double v, State x,
                          const std::vector<State>& schedule,
                          const ResolventOptions& options = {});

}  // namespace mjp
