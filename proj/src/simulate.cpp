#include "mjp/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>

namespace mjp {

namespace {

double invert_hazard(const JumpModel& model, State x, double s, double target) {
  const double q0 = model.total_rate(x, s);
  if (q0 > 0.0) {
    // Sojourns far below the clock's resolution: s + theta rounds back to
    // s, so the modulation cannot vary over the interval and the
    // first-order inversion is exact at this scale.
    const double guess = target / q0;
    if (s + guess == s)
      return guess > 0.0 ? guess : std::numeric_limits<double>::denorm_min();
  }
  // bracket: double hi until H(s, s+hi) >= target
  double hi = 1.0 / (model.total_rate(x, s) + 1.0);
  double h_hi = model.hazard_integral(x, s, s + hi);
  int guard = 0;
  while (h_hi < target) {
    hi *= 2.0;
    h_hi = model.hazard_integral(x, s, s + hi);
    if (++guard > 400 || hi > 1e300) return kInf;
  }
  double lo = 0.0;
  double theta = std::min(hi, target / std::max(model.total_rate(x, s), 1e-300));
  if (!(theta > lo) || !(theta < hi)) theta = 0.5 * hi;
  for (int it = 0; it < 200; ++it) {
    const double err = model.hazard_integral(x, s, s + theta) - target;
    if (err > 0.0)
      hi = theta;
    else
      lo = theta;
    const double q = model.total_rate(x, s + theta);
    double next = q > 0.0 ? theta - err / q : 0.0;
    if (!(next > lo) || !(next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - theta) <= 1e-12 * std::max(next, 1e-300)) return next;
    theta = next;
  }
  return theta;
}

double thinning_sojourn(const JumpModel& model, State x, double s, RngStream& rng) {
  double tcur = s;
  for (long iter = 0; iter < 100000000; ++iter) {
    // window wide enough to see a few events of the local envelope
    const double probe = model.rate_bound_on(x, tcur, tcur + 1.0);
    double window = probe > 0.0 ? std::clamp(8.0 / probe, 1e-6, 1e6) : 1.0;
    const double envelope = model.rate_bound_on(x, tcur, tcur + window);
    if (!std::isfinite(envelope))
      throw ModelError("thinning requires a finite local rate bound at state " +
                       std::to_string(x));
    if (envelope <= 0.0) {
      if (model.hazard_to_infinity(x, tcur) <= 0.0) return kInf;
      tcur += window;
      continue;
    }
    const double cand = tcur + rng.exponential() / envelope;
    if (cand > tcur + window) {
      tcur += window;
      continue;
    }
    tcur = cand;
    if (rng.uniform01() * envelope <= model.total_rate(x, tcur)) return tcur - s;
  }
  throw NumericsError("thinning did not produce a jump (hazard too thin?)");
}

}  // namespace

double sample_sojourn(const JumpModel& model, State x, double s, RngStream& rng) {
  if (model.rate_bound(x) <= 0.0) return kInf;
  const double target = rng.exponential();
  if (model.has_hazard_integral()) {
    if (target >= model.hazard_to_infinity(x, s)) return kInf;
    return invert_hazard(model, x, s, target);
  }
  if (!std::isfinite(model.rate_bound(x)) && !std::isfinite(model.rate_bound_on(x, s, s + 1.0)))
    throw ModelError("sample_sojourn: no hazard integral and unbounded rate at state " +
                     std::to_string(x));
  // thinning consumes its own uniforms; the first draw is discarded by design
  return thinning_sojourn(model, x, s, rng);
}

State sample_target(const JumpModel& model, State x, double t, RngStream& rng) {
  const auto entries = model.full_targets(x, t);
  double total = 0.0;
  for (const auto& e : entries) total += e.rate;
  const double qx = model.total_rate(x, t);
  if (!(total > 0.0))
    throw ModelError("sample_target: no jump mass at state " + std::to_string(x));
  if (std::abs(total - qx) > 1e-9 * std::max(qx, 1.0))
    throw ModelError("sample_target: enumerated target mass misses the total rate");
  const double u = rng.uniform01() * total;
  double cum = 0.0;
  for (const auto& e : entries) {
    cum += e.rate;
    if (u <= cum) return e.target;
  }
  return entries.back().target;
}

Trajectory sample_path(const JumpModel& model, State x0, const PathOptions& options,
                       RngStream& rng) {
  if (!(options.horizon > 0.0)) throw ConfigError("sample_path: horizon must be > 0");
  if (options.jump_cap < 1) throw ConfigError("sample_path: jump_cap must be >= 1");

  Trajectory traj;
  traj.jumps.push_back({0.0, x0});
  double t = 0.0;
  State x = x0;
  for (;;) {
    if (traj.jump_count() >= options.jump_cap) {
      traj.terminal = Terminal::JumpCapped;
      traj.end_time = t;
      break;
    }
    const double theta = sample_sojourn(model, x, t, rng);
    if (!(theta < kInf) || t + theta > options.horizon) {
      traj.terminal = Terminal::Censored;
      traj.end_time = options.horizon;
      break;
    }
    t += theta;
    x = sample_target(model, x, t, rng);
    traj.jumps.push_back({t, x});
    // landed in a state that can never move again
    if (model.rate_bound(x) <= 0.0) {
      traj.terminal = Terminal::Absorbed;
      traj.end_time = options.horizon;
      break;
    }
  }
  if (traj.terminal == Terminal::JumpCapped && traj.end_time < options.horizon) {
    // collapsing sojourns: the last stretch of jumps spans a sliver of time
    const std::size_t n = traj.jumps.size();
    const std::size_t back = std::min<std::size_t>(10, n - 1);
    const double span = traj.jumps[n - 1].first - traj.jumps[n - 1 - back].first;
    traj.explosion_flag = span < 0.01 * std::max(1.0, traj.end_time);
  }
  return traj;
}

namespace {

struct PathSummary {
  bool capped = false;
  bool half_capped = false;
  double end_time = 0.0;
  Terminal terminal = Terminal::Censored;
};

PathSummary run_summary(const JumpModel& model, State x0, double horizon, long cap,
                        RngStream& rng) {
  PathSummary out;
  double t = 0.0;
  State x = x0;
  long jumps = 0;
  const long half = std::max<long>(1, cap / 2);
  for (;;) {
    if (jumps >= cap) {
      out.capped = true;
      out.terminal = Terminal::JumpCapped;
      out.end_time = t;
      return out;
    }
    const double theta = sample_sojourn(model, x, t, rng);
    if (!(theta < kInf) || t + theta > horizon) {
      out.terminal = Terminal::Censored;
      out.end_time = horizon;
      return out;
    }
    t += theta;
    x = sample_target(model, x, t, rng);
    ++jumps;
    if (jumps >= half) out.half_capped = true;
    if (model.rate_bound(x) <= 0.0) {
      out.terminal = Terminal::Absorbed;
      out.end_time = horizon;
      return out;
    }
  }
}

template <class PerPath>
void run_parallel(long paths, int threads, PerPath&& body) {
  const int workers = std::max(1, threads);
  if (workers == 1) {
    for (long i = 0; i < paths; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<long> next{0};
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (;;) {
        const long chunk = 256;
        const long start = next.fetch_add(chunk);
        if (start >= paths) return;
        const long end = std::min(paths, start + chunk);
        for (long i = start; i < end; ++i) body(i);
      }
    });
  }
  for (auto& th : pool) th.join();
}

double binom_se(double p, long n) {
  return std::sqrt(std::max(p * (1.0 - p), 0.0) / static_cast<double>(n));
}

}  // namespace

ExplosionEstimate explosion_probability(const JumpModel& model, State x0, double horizon,
                                        long paths, long jump_cap,
                                        std::uint64_t base_seed, int threads) {
  if (paths < 100) throw ConfigError("explosion_probability: needs at least 100 paths");
  std::vector<unsigned char> capped(static_cast<std::size_t>(paths), 0);
  std::vector<unsigned char> half(static_cast<std::size_t>(paths), 0);
  run_parallel(paths, threads, [&](long i) {
    RngStream rng(base_seed, static_cast<std::uint64_t>(i));
    const PathSummary s = run_summary(model, x0, horizon, jump_cap, rng);
    capped[static_cast<std::size_t>(i)] = s.capped ? 1 : 0;
    half[static_cast<std::size_t>(i)] = s.half_capped ? 1 : 0;
  });
  long n_cap = 0, n_half = 0;
  for (long i = 0; i < paths; ++i) {
    n_cap += capped[static_cast<std::size_t>(i)];
    n_half += half[static_cast<std::size_t>(i)];
  }
  ExplosionEstimate est;
  est.paths = paths;
  est.jump_cap = jump_cap;
  est.base_seed = base_seed;
  est.estimate = static_cast<double>(n_cap) / static_cast<double>(paths);
  est.std_error = binom_se(est.estimate, paths);
  est.half_cap_estimate = static_cast<double>(n_half) / static_cast<double>(paths);
  est.half_cap_std_error = binom_se(est.half_cap_estimate, paths);
  const double se = std::hypot(est.std_error, est.half_cap_std_error);
  est.cap_diagnostic_ok =
      std::abs(est.estimate - est.half_cap_estimate) <= 2.0 * se + 1e-12;
  return est;
}

McResolventEstimate mc_resolvent(const JumpModel& model, double alpha, State x0,
                                 long paths, std::uint64_t base_seed,
                                 const McResolventOptions& options, int threads) {
  if (!(alpha > 0.0)) throw ConfigError("mc_resolvent: alpha must be positive");
  if (paths < 100) throw ConfigError("mc_resolvent: needs at least 100 paths");
  const double horizon =
      options.horizon > 0.0 ? options.horizon : std::max(40.0 / alpha, 8.0);

  std::vector<double> contrib(static_cast<std::size_t>(paths), 0.0);
  run_parallel(paths, threads, [&](long i) {
    RngStream rng(base_seed, static_cast<std::uint64_t>(i));
    const PathSummary s = run_summary(model, x0, horizon, options.jump_cap, rng);
    // capped: treat the cap epoch as the accumulation point; otherwise the
    // path keeps surviving in S and collects the full discounted mass.
    contrib[static_cast<std::size_t>(i)] =
        s.capped ? -std::expm1(-alpha * s.end_time) : 1.0;
  });
  double mean = std::accumulate(contrib.begin(), contrib.end(), 0.0) /
                static_cast<double>(paths);
  double ss = 0.0;
  for (double cval : contrib) ss += (cval - mean) * (cval - mean);

  McResolventEstimate est;
  est.estimate = mean;
  est.std_error = std::sqrt(ss / (static_cast<double>(paths) - 1.0)) /
                  std::sqrt(static_cast<double>(paths));
  est.bias_budget = std::exp(-alpha * horizon);
  est.horizon = horizon;
  est.paths = paths;
  est.base_seed = base_seed;
  return est;
}

}  // namespace mjp
