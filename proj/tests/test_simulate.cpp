#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "doctest.h"
#include "mjp/feller.hpp"
#include "mjp/simulate.hpp"
#include "oracles.hpp"
#include "test_models.hpp"

using namespace mjp;
using namespace mjp::testing;

namespace {

// one-sample Kolmogorov-Smirnov statistic against a cdf
double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max(d, std::abs(f - static_cast<double>(i) / n));
    d = std::max(d, std::abs(static_cast<double>(i + 1) / n - f));
  }
  return d;
}

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] <= b[j])
      ++i;
    else
      ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() -
                             static_cast<double>(j) / b.size()));
  }
  return d;
}

JumpModel constant_rate(double lambda) {
  return build_birth_death([lambda](State) { return lambda; }, [](State) { return 0.0; },
                           Modulation::constant(1.0), "const-rate");
}

// same dynamics, but with the hazard closure stripped so sampling must thin
JumpModel strip_hazard(const JumpModel& m) {
  JumpModel::Builder b;
  b.name(m.name() + "-thinned")
      .space(m.space())
      .homogeneous(m.homogeneous())
      .total_rate([m](State x, double s) { return m.total_rate(x, s); })
      .targets([m](State x, double s, State k) { return m.jump_targets(x, s, k); })
      .tail_rate([m](State x, double s, State k) { return m.tail_rate(x, s, k); })
      .rate_bound([m](State x) { return m.rate_bound(x); })
      .rate_bound_window(
          [m](State x, double a, double bb) { return m.rate_bound_on(x, a, bb); });
  return b.build();
}

}  // namespace

TEST_CASE("constant-hazard sojourns have the right mean") {
  const JumpModel m = constant_rate(2.0);
  RngStream rng(11, 0);
  const long n = 100000;
  double acc = 0.0;
  for (long i = 0; i < n; ++i) acc += sample_sojourn(m, 0, 0.0, rng);
  const double mean = acc / n;
  const double sigma = 0.5 / std::sqrt(static_cast<double>(n));
  CHECK(std::abs(mean - 0.5) < 3.0 * sigma);
}

TEST_CASE("affine-hazard sojourns match the closed-form law (KS at 1%)") {
  // q(t) = lambda (1+t) from s=0: F(x) = 1 - exp(-lambda (x + x^2/2))
  const double lambda = 0.8;
  const JumpModel m = build_birth_death([lambda](State) { return lambda; },
                                        [](State) { return 0.0; },
                                        Modulation::affine(1.0), "affine-hazard");
  RngStream rng(12, 0);
  const long n = 100000;
  std::vector<double> samples;
  samples.reserve(n);
  for (long i = 0; i < n; ++i) samples.push_back(sample_sojourn(m, 0, 0.0, rng));
  const double d = ks_statistic(samples, [lambda](double x) {
    return 1.0 - std::exp(-lambda * (x + 0.5 * x * x));
  });
  CHECK(d < 1.63 / std::sqrt(static_cast<double>(n)));  // 1% critical value
}

TEST_CASE("zero hazard never jumps") {
  const JumpModel m = frozen();
  RngStream rng(13, 0);
  for (int i = 0; i < 32; ++i) CHECK(sample_sojourn(m, 5, 1.0, rng) == kInf);
}

TEST_CASE("decaying hazard returns +inf with the right frequency") {
  // q(t) = e^{-t}: total remaining hazard from 0 is 1, so P(no jump) = e^{-1}
  const JumpModel m = build_birth_death([](State) { return 1.0; }, [](State) { return 0.0; },
                                        Modulation::exponential(-1.0), "decaying");
  RngStream rng(14, 0);
  const long n = 100000;
  long infinite = 0;
  for (long i = 0; i < n; ++i)
    if (sample_sojourn(m, 0, 0.0, rng) == kInf) ++infinite;
  const double p = static_cast<double>(infinite) / n;
  const double sigma = std::sqrt(std::exp(-1.0) * (1 - std::exp(-1.0)) / n);
  CHECK(std::abs(p - std::exp(-1.0)) < 3.0 * sigma);
}

TEST_CASE("inversion and thinning sample the same law (two-sample KS at 1%)") {
  const double lambda = 1.3;
  const JumpModel inv = build_birth_death([lambda](State) { return lambda; },
                                          [](State) { return 0.0; },
                                          Modulation::affine(0.5), "affine-inv");
  const JumpModel thin = strip_hazard(inv);
  const long n = 100000;
  std::vector<double> a, b;
  a.reserve(n);
  b.reserve(n);
  RngStream ra(21, 0), rb(22, 0);
  for (long i = 0; i < n; ++i) a.push_back(sample_sojourn(inv, 0, 0.0, ra));
  for (long i = 0; i < n; ++i) b.push_back(sample_sojourn(thin, 0, 0.0, rb));
  const double d = ks_two_sample(a, b);
  CHECK(d < 1.628 * std::sqrt(2.0 / static_cast<double>(n)));
}

TEST_CASE("paths on the zero-rate model censor immediately") {
  RngStream rng(31, 0);
  const Trajectory traj = sample_path(frozen(), 4, {1.0, 100}, rng);
  CHECK(traj.jumps.size() == 1);
  CHECK(traj.terminal == Terminal::Censored);
  CHECK_FALSE(traj.explosion_flag);
}

TEST_CASE("jump times increase strictly along every path") {
  for (long i = 0; i < 64; ++i) {
    RngStream rng(77, static_cast<std::uint64_t>(i));
    const Trajectory traj = sample_path(mm1(4.0, 2.0), 0, {2.0, 500}, rng);
    for (std::size_t k = 1; k < traj.jumps.size(); ++k)
      CHECK(traj.jumps[k].first > traj.jumps[k - 1].first);
  }
}

TEST_CASE("linear-birth paths: mean jump count is e - 1 at t = 1") {
  const JumpModel m = yule();
  const long n = 20000;
  double acc = 0.0;
  for (long i = 0; i < n; ++i) {
    RngStream rng(32, static_cast<std::uint64_t>(i));
    acc += static_cast<double>(sample_path(m, 0, {1.0, 10000}, rng).jump_count());
  }
  const double mean = acc / n;
  const double expected = std::exp(1.0) - 1.0;
  const double sigma =
      std::sqrt(std::exp(2.0) - std::exp(1.0)) / std::sqrt(static_cast<double>(n));
  CHECK(std::abs(mean - expected) < 3.0 * sigma);
}

TEST_CASE("explosive paths hit the jump cap and raise the flag") {
  const JumpModel m = doubling_birth();
  long capped = 0, flagged = 0;
  const long n = 400;
  for (long i = 0; i < n; ++i) {
    RngStream rng(33, static_cast<std::uint64_t>(i));
    const Trajectory traj = sample_path(m, 0, {2.0, 1000}, rng);
    if (traj.terminal == Terminal::JumpCapped) {
      ++capped;
      if (traj.explosion_flag) ++flagged;
    }
  }
  CHECK(capped > n / 2);     // the majority of paths cap by t=2
  CHECK(flagged == capped);  // collapsed sojourns mark every capped path
}

TEST_CASE("explosion probability: bounded rates give exactly zero") {
  const auto est = explosion_probability(flip_flop(), 0, 2.0, 2000, 2000, 7, 2);
  CHECK(est.estimate == 0.0);
  CHECK(est.cap_diagnostic_ok);
}

TEST_CASE("explosion probability: doubling model vs the sum-of-exponentials oracle") {
  const long paths = 40000;
  const auto est = explosion_probability(doubling_birth(), 0, 2.0, paths, 400, 42, 4);
  const double oracle = explosion_time_cdf_oracle(2.0, 200000);
  const double se =
      std::hypot(est.std_error, std::sqrt(oracle * (1 - oracle) / 200000.0));
  CHECK(est.cap_diagnostic_ok);
  CHECK(std::abs(est.estimate - oracle) < 3.0 * se);
}

TEST_CASE("explosion probability grows toward one with the horizon") {
  const auto early = explosion_probability(doubling_birth(), 0, 2.0, 4000, 400, 5, 2);
  const auto late = explosion_probability(doubling_birth(), 0, 8.0, 4000, 400, 5, 2);
  CHECK(late.estimate > early.estimate);
  CHECK(late.estimate >= 0.99);
}

TEST_CASE("reproducibility: thread count does not change the estimate") {
  const auto a = explosion_probability(doubling_birth(), 0, 2.0, 4000, 400, 99, 1);
  const auto b = explosion_probability(doubling_birth(), 0, 2.0, 4000, 400, 99, 4);
  CHECK(a.estimate == b.estimate);
  CHECK(a.half_cap_estimate == b.half_cap_estimate);
}

TEST_CASE("reproducibility: identical seeds give identical trajectories") {
  RngStream r1(123, 5), r2(123, 5);
  const Trajectory a = sample_path(yule(), 0, {2.0, 1000}, r1);
  const Trajectory b = sample_path(yule(), 0, {2.0, 1000}, r2);
  REQUIRE(a.jumps.size() == b.jumps.size());
  for (std::size_t i = 0; i < a.jumps.size(); ++i) {
    CHECK(a.jumps[i].first == b.jumps[i].first);
    CHECK(a.jumps[i].second == b.jumps[i].second);
  }
}

TEST_CASE("empirical occupation matches the forward equation") {
  const JumpModel m = flip_flop();
  const long n = 40000;
  long at_zero = 0;
  for (long i = 0; i < n; ++i) {
    RngStream rng(55, static_cast<std::uint64_t>(i));
    const Trajectory traj = sample_path(m, 0, {1.0, 10000}, rng);
    if (traj.jumps.back().second == 0) ++at_zero;
  }
  const double p_hat = static_cast<double>(at_zero) / n;
  const double p_ode = forward_ode(m, 0.0, 0, 1.0, 2).mass(0);
  const double se = std::sqrt(p_ode * (1 - p_ode) / n);
  CHECK(std::abs(p_hat - p_ode) < 4.0 * se);
}

TEST_CASE("mc resolvent: nonexplosive models sit at one") {
  const auto est = mc_resolvent(flip_flop(), 1.0, 0, 2000, 3, {}, 2);
  CHECK(est.estimate == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("mc resolvent: doubling model matches the product oracle") {
  McResolventOptions opts;
  opts.jump_cap = 400;
  const auto est = mc_resolvent(doubling_birth(), 1.0, 0, 40000, 17, opts, 4);
  const double oracle = doubling_resolvent_oracle(1.0);
  CHECK(std::abs(est.estimate - oracle) < 3.0 * est.std_error + est.bias_budget);
}

TEST_CASE("mc resolvent: heavy discounting outruns explosion") {
  McResolventOptions opts;
  opts.jump_cap = 400;
  const auto est = mc_resolvent(doubling_birth(), 100.0, 0, 2000, 19, opts, 2);
  CHECK(est.estimate >= 0.99);
}
