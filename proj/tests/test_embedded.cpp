#include <cmath>

#include "doctest.h"
#include "mjp/embedded.hpp"
#include "mjp/feller.hpp"
#include "oracles.hpp"
#include "test_models.hpp"

using namespace mjp;
using namespace mjp::testing;

namespace {

JumpModel piecewise_queue() {
  // bounded birth-death with a rate change at t=1, constant afterwards
  return build_birth_death([](State) { return 1.0; }, [](State) { return 1.0; },
                           Modulation::piecewise({1.0}, {2.0, 1.0}), "piecewise-queue");
}

std::vector<double> uniform_grid(double top, int points) {
  std::vector<double> g;
  for (int i = 0; i < points; ++i) g.push_back(top * i / (points - 1));
  return g;
}

double row_sum(const EmbeddedRow& row) {
  double s = row.absorb + row.leak;
  for (const auto& cell : row.targets) s += cell.p;
  return s;
}

}  // namespace

TEST_CASE("homogeneous kernel rows are closed-form") {
  SUBCASE("constant rate 3, alpha 1: absorption is exactly 1/4") {
    const JumpModel m = build_birth_death([](State) { return 3.0; }, [](State) { return 0.0; },
                                          Modulation::constant(1.0), "rate3");
    const EmbeddedChain chain = build_kernel(m, 1.0, {}, 8);
    CHECK(chain.row(0, 2).absorb == doctest::Approx(0.25).epsilon(1e-14));
  }
  SUBCASE("zero-rate state absorbs immediately") {
    const EmbeddedChain chain = build_kernel(frozen(), 1.0, {}, 4);
    CHECK(chain.row(0, 1).absorb == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("linear-birth rows: absorb 1/(n+2), forward mass (n+1)/(n+2)") {
    const EmbeddedChain chain = build_kernel(yule(), 1.0, {}, 16);
    for (State n : {0, 3, 9}) {
      const auto& row = chain.row(0, n);
      CHECK(row.absorb == doctest::Approx(1.0 / (n + 2.0)).epsilon(1e-14));
      REQUIRE(row.targets.size() == 1);
      CHECK(row.targets[0].y == n + 1);
      CHECK(row.targets[0].p == doctest::Approx((n + 1.0) / (n + 2.0)).epsilon(1e-14));
    }
  }
}

TEST_CASE("kernel rows are stochastic and obey the absorption lower bound") {
  SUBCASE("homogeneous") {
    const EmbeddedChain chain = build_kernel(mm1(4.0, 2.0), 1.5, {}, 12);
    for (State x = 0; x < 12; ++x) {
      const auto& row = chain.row(0, x);
      CHECK(row_sum(row) == doctest::Approx(1.0).epsilon(1e-10));
      CHECK(row.absorb >= 1.5 / (1.5 + chain.model().rate_bound(x)) - 1e-12);
    }
  }
  SUBCASE("nonhomogeneous grid") {
    const JumpModel m = piecewise_queue();
    const EmbeddedChain chain = build_kernel(m, 1.0, uniform_grid(2.5, 26), 10);
    for (std::size_t ti = 0; ti < chain.n_times(); ++ti) {
      for (State x = 0; x < 10; ++x) {
        const auto& row = chain.row(ti, x);
        CHECK(row_sum(row) == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(row.absorb >= 1.0 / (1.0 + m.rate_bound(x)) - 1e-12);
        CHECK(row.cost == row.absorb);
      }
    }
  }
}

TEST_CASE("nonhomogeneous kernels need a declared time-constant tail") {
  CHECK_THROWS_AS(build_kernel(yule_affine(), 1.0, uniform_grid(2.0, 9), 8), ConfigError);
}

TEST_CASE("value iteration: bounded-rate minimal solution is one") {
  SUBCASE("homogeneous") {
    const EmbeddedChain chain = build_kernel(flip_flop(), 1.0, {}, 4);
    const ValueField w = value_iterate_minimal(chain);
    CHECK(w.converged);
    for (State x : {0, 1}) CHECK(w.at(0, x) == doctest::Approx(1.0).epsilon(1e-6));
  }
  SUBCASE("piecewise-modulated queue") {
    const EmbeddedChain chain = build_kernel(piecewise_queue(), 1.0, uniform_grid(2.5, 26), 24);
    const ValueField w = value_iterate_minimal(chain);
    CHECK(w.converged);
    CHECK(w.at(0, 0) == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(w.at(10, 2) == doctest::Approx(1.0).epsilon(1e-4));
  }
}

TEST_CASE("value iteration: doubling model reproduces the product escape mass") {
  const EmbeddedChain chain = build_kernel(doubling_birth(), 1.0, {}, 24);
  const ValueField w = value_iterate_minimal(chain);
  CHECK(w.converged);
  const double oracle = doubling_escape_product();
  CHECK(oracle == doctest::Approx(0.209712).epsilon(2e-5));
  CHECK(std::abs((1.0 - w.at(0, 0)) - oracle) < 1e-3);
}

TEST_CASE("maximal U: verdict statistics") {
  SUBCASE("bounded model: U vanishes on the window") {
    const EmbeddedChain chain = build_kernel(flip_flop(), 1.0, {}, 16);
    const UResult u = maximal_U(chain, 2);
    CHECK(u.sup_window <= 1e-8);
    CHECK(u.fixpoint_residual <= 1e-6);
  }
  SUBCASE("doubling model: U is far from zero and satisfies the fixed point") {
    const EmbeddedChain chain = build_kernel(doubling_birth(), 1.0, {}, 32);
    const UResult u = maximal_U(chain, 4);
    CHECK(u.sup_window > 0.2);
    CHECK(u.fixpoint_residual <= 1e-6);
    CHECK(std::abs(u.U.at(0, 0) - doubling_escape_product()) < 1e-3);
  }
}

TEST_CASE("embedded_solve verdicts with truncation stability") {
  SUBCASE("explosive doubling model") {
    const auto res = embedded_solve(doubling_birth(), 1.0, {}, 64, 4);
    CHECK(res.verdict == ExplosionVerdict::Explosive);
    CHECK(res.stable);
    CHECK(std::abs(res.W_origin - (1.0 - doubling_escape_product())) < 1e-3);
  }
  SUBCASE("nonexplosive linear-birth model (deep work truncation)") {
    const auto res = embedded_solve(yule(), 1.0, {}, 400000, 8);
    CHECK(res.verdict == ExplosionVerdict::Nonexplosive);
    CHECK(res.sup_U <= 1e-4);
    for (double w : res.W_window) CHECK(w == doctest::Approx(1.0).epsilon(1e-4));
  }
  SUBCASE("bounded nonhomogeneous model") {
    const auto res =
        embedded_solve(piecewise_queue(), 1.0, uniform_grid(2.5, 18), 96, 4);
    CHECK(res.verdict == ExplosionVerdict::Nonexplosive);
  }
}

TEST_CASE("value iteration agrees with the quadrature resolvent") {
  struct Case {
    JumpModel model;
    State truncation;
  };
  const Case cases[] = {{flip_flop(), 2}, {yule(), 512}, {doubling_birth(), 16}};
  for (const auto& c : cases) {
    CAPTURE(c.model.name());
    const EmbeddedChain chain = build_kernel(c.model, 1.0, {}, c.truncation);
    const ValueField w = value_iterate_minimal(chain);
    const auto res = resolvent(c.model, 1.0, 0.0, 0, {c.truncation});
    CHECK(std::abs(w.at(0, 0) - res.value) < 1e-3);
  }
}

TEST_CASE("nonhomogeneous resolvent identity on the grid") {
  const JumpModel m = piecewise_queue();
  const EmbeddedChain chain = build_kernel(m, 2.0, uniform_grid(2.5, 26), 24);
  const ValueField w = value_iterate_minimal(chain);
  const auto res = resolvent(m, 2.0, 0.0, 0, {24});
  CHECK(std::abs(w.at(0, 0) - res.value) < 1e-3);
}

TEST_CASE("explosion certificates") {
  SUBCASE("doubling model: the exact product sub-solution passes with zero margin") {
    auto candidate = [](double, State n) {
      double prod = 1.0;
      for (long k = n; k < n + 120; ++k) {
        const double rate = std::pow(2.0, static_cast<double>(k));
        prod *= rate / (rate + 1.0);
      }
      return prod;
    };
    const auto res = verify_explosion_certificate(doubling_birth(), 1.0, candidate, 24, {0.0});
    CHECK(res.pass);
    // algebraic equality; rounding is amplified by the 2^n rate scale
    CHECK(std::abs(res.worst_margin) < 1e-8);
  }
  SUBCASE("linear-birth model: the product collapses to zero and is rejected") {
    // prod_{k>=n} (k+1)/(k+2) = lim (n+1)/(N+2) = 0
    auto candidate = [](double, State) { return 0.0; };
    CHECK_THROWS_AS(verify_explosion_certificate(yule(), 1.0, candidate, 24, {0.0}),
                    ModelError);
  }
  SUBCASE("nonhomogeneous integral form: accelerated doubling model") {
    const JumpModel m =
        build_birth_death([](State n) { return std::min(std::pow(2.0, double(n)), kRateCap); },
                          [](State) { return 0.0; }, Modulation::affine(1.0),
                          "doubling-affine");
    auto candidate = [](double, State n) {
      double prod = 1.0;
      for (long k = n; k < n + 120; ++k) {
        const double rate = std::pow(2.0, static_cast<double>(k));
        prod *= rate / (rate + 1.0);
      }
      return prod;
    };
    const auto res = verify_explosion_certificate(m, 1.0, candidate, 12, {0.0, 0.5});
    CHECK(res.pass);  // faster jumps only help the sub-solution inequality
  }
  SUBCASE("negative candidates are rejected") {
    CHECK_THROWS_AS(verify_explosion_certificate(
                        yule(), 1.0, [](double, State) { return -1.0; }, 8, {0.0}),
                    ModelError);
  }
}
