#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "mjp/model.hpp"
#include "mjp/rng.hpp"

namespace mjp {

enum class Terminal { Censored, JumpCapped, Absorbed };

// One realization of the marked point process: jump epochs and landed
// states, with t_0 = 0 at the initial state. Sojourns are strictly
// positive; once they collapse below the clock's ulp (near explosion)
// recorded epochs can tie at double resolution.
struct Trajectory {
  std::vector<std::pair<double, State>> jumps;
  Terminal terminal = Terminal::Censored;
  double end_time = 0.0;
  // Cap reached well before the horizon with collapsing sojourns.
  bool explosion_flag = false;

  long jump_count() const { return static_cast<long>(jumps.size()) - 1; }
};

// Sojourn at x from time s with survival exp(-∫_s^{s+θ} q_x). Closed-form
// hazards are inverted (bisection + Newton); otherwise windowed thinning
// against the local rate bound. +inf when the remaining hazard is finite
// and already spent.
double sample_sojourn(const JumpModel& model, State x, double s, RngStream& rng);

// Jump target drawn with probabilities q(y|x,t)/q_x(t) at the jump epoch.
State sample_target(const JumpModel& model, State x, double t, RngStream& rng);

struct PathOptions {
  double horizon = 1.0;
  long jump_cap = 10000;
};

Trajectory sample_path(const JumpModel& model, State x0, const PathOptions& options,
                       RngStream& rng);

struct ExplosionEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  double half_cap_estimate = 0.0;
  double half_cap_std_error = 0.0;
  bool cap_diagnostic_ok = true;
  long paths = 0;
  long jump_cap = 0;
  std::uint64_t base_seed = 0;
};

// P(t_inf <= T) estimated as the capped-path fraction, with the half-cap
// sensitivity diagnostic.
ExplosionEstimate explosion_probability(const JumpModel& model, State x0, double horizon,
                                        long paths, long jump_cap,
                                        std::uint64_t base_seed, int threads = 1);

struct McResolventEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  double bias_budget = 0.0;  // censoring continuation + cap bias allowance
  double horizon = 0.0;
  long paths = 0;
  std::uint64_t base_seed = 0;
};

struct McResolventOptions {
  double horizon = 0.0;  // 0: max(40/alpha, 8)
  long jump_cap = 10000;
};

// Per-path discounted survival 1 - e^{-alpha t_end}; censored and absorbed
// paths continue surviving and contribute 1.
McResolventEstimate mc_resolvent(const JumpModel& model, double alpha, State x0,
                                 long paths, std::uint64_t base_seed,
                                 const McResolventOptions& options = {},
                                 int threads = 1);

}  // namespace mjp
