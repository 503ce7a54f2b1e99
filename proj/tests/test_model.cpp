#include <cmath>

#include "doctest.h"
#include "mjp/model.hpp"
#include "test_models.hpp"

using namespace mjp;
using namespace mjp::testing;

TEST_CASE("birth-death construction: zero-rate model is fully absorbing") {
  const JumpModel m = frozen();
  for (State x : {0, 3, 17}) {
    CHECK(m.total_rate(x, 0.7) == 0.0);
    CHECK(m.rate_bound(x) == 0.0);
    CHECK(m.jump_targets(x, 0.0, 32).empty());
  }
}

TEST_CASE("birth-death construction: linear birth rates") {
  const JumpModel m = yule();
  CHECK(m.total_rate(4, 2.0) == doctest::Approx(5.0));
  const auto targets = m.jump_targets(4, 0.0, 32);
  REQUIRE(targets.size() == 1);
  CHECK(targets[0].target == 5);
  CHECK(targets[0].rate == doctest::Approx(5.0));
  CHECK(m.homogeneous());
  CHECK(m.hazard_integral(4, 1.0, 3.0) == doctest::Approx(10.0));
}

TEST_CASE("birth-death: geometric rates carry their own bound") {
  const JumpModel m = doubling_birth();
  CHECK(m.rate_bound(10) == doctest::Approx(1024.0));
  CHECK(m.total_rate(10, 5.0) == doctest::Approx(1024.0));
}

TEST_CASE("negative rates are rejected at call time") {
  const JumpModel bad = build_birth_death([](State n) { return n == 2 ? -1.0 : 1.0; },
                                          [](State) { return 0.0; },
                                          Modulation::constant(1.0), "bad");
  CHECK_THROWS_AS(bad.total_rate(2, 0.0), ModelError);
  CHECK(bad.total_rate(1, 0.0) == doctest::Approx(1.0));
}

TEST_CASE("validate_q_function passes the shipped families") {
  CHECK(validate_q_function(yule(), 50, {0.0, 1.0, 5.0}).pass);
  CHECK(validate_q_function(yule(), 50, {0.0, 1.0, 5.0}).max_residual == 0.0);
  CHECK(validate_q_function(doubling_birth(), 40, {0.0, 2.0}).pass);
  CHECK(validate_q_function(flip_flop(), 2, {0.0, 3.0}).pass);
  CHECK(validate_q_function(yule_affine(), 24, {0.0, 1.0, 2.0}).pass);
  CHECK(validate_q_function(frozen(), 16, {0.0}).pass);
}

TEST_CASE("validate_q_function flags a missing target") {
  // hand-built model whose target list drops rate mass at state 3
  JumpModel::Builder b;
  b.name("defective")
      .space({StateSpace::Kind::Countable, 16})
      .homogeneous(true)
      .total_rate([](State, double) { return 2.0; })
      .targets([](State x, double, State trunc) {
        std::vector<RateEntry> out;
        if (x + 1 < trunc) out.push_back({x + 1, x == 3 ? 1.5 : 2.0});
        return out;
      })
      .rate_bound([](State) { return 2.0; });
  const auto report = validate_q_function(b.build(), 8, {0.0});
  CHECK_FALSE(report.pass);
  REQUIRE(report.first_failure.has_value());
  CHECK(report.first_failure->x == 3);
  CHECK(report.first_failure->residual == doctest::Approx(0.5));
}

TEST_CASE("c-drift validation: the standing examples") {
  SUBCASE("linear f on the linear-birth model, c=1: exact equality") {
    const auto rep = validate_c_drift(yule(), linear_f(1.0), 40, {0.0, 1.0});
    CHECK(rep.pass);
    CHECK(rep.max_residual == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("constant f, c=0: conservativeness makes the action vanish") {
    DriftFunction one(DriftFunction::Kind::CDrift, [](double, State) { return 1.0; }, 0.0);
    for (const auto& m : {yule(), doubling_birth(), flip_flop(), mm1()}) {
      const auto rep = validate_c_drift(m, one, 24, {0.0, 0.5});
      CHECK(rep.pass);
      CHECK(std::abs(rep.max_residual) < 1e-12);
    }
  }
  SUBCASE("bounded f on the doubling model, c=1/2: action is exactly 1/2") {
    const auto rep = validate_c_drift(doubling_birth(), bounded_f(0.5), 30, {0.0, 1.0});
    CHECK(rep.pass);
    // residual = 1/2 - c f(n) = -1/2 + 2^{-n-1}, largest at n = 0
    CHECK(rep.max_residual == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("violation carries a witness") {
    const auto rep = validate_c_drift(doubling_birth(), linear_f(1.0), 16, {0.0});
    CHECK_FALSE(rep.pass);
    REQUIRE(rep.witness.has_value());
    CHECK(rep.witness->x == 2);  // 2^n(n+2) - 2^n(n+1) = 2^n > c(n+1) first at n=2
  }
  SUBCASE("nonpositive f is an error") {
    DriftFunction zero(DriftFunction::Kind::CDrift, [](double, State) { return 0.0; }, 1.0);
    CHECK_THROWS_AS(validate_c_drift(yule(), zero, 8, {0.0}), ModelError);
  }
}

TEST_CASE("sampler-defined spaces reject quadrature operations") {
  JumpModel::Builder b;
  b.name("opaque")
      .space({StateSpace::Kind::SamplerDefined, 8})
      .homogeneous(true)
      .total_rate([](State, double) { return 1.0; })
      .targets([](State x, double, State) {
        return std::vector<RateEntry>{{x + 1, 1.0}};
      })
      .rate_bound([](State) { return 1.0; });
  CHECK_THROWS_AS(validate_q_function(b.build(), 4, {0.0}), ConfigError);
}

TEST_CASE("full_targets grows the view until the tail vanishes") {
  const JumpModel m = mm1();
  const auto entries = m.full_targets(100, 0.0);
  REQUIRE(entries.size() == 2);
  CHECK(entries[0].target == 99);
  CHECK(entries[1].target == 101);
}

TEST_CASE("immutability: repeated calls agree") {
  const JumpModel m = yule_affine();
  const double a = m.total_rate(7, 1.5);
  const double b = m.total_rate(7, 1.5);
  CHECK(a == b);
  const auto t1 = m.jump_targets(7, 1.5, 32);
  const auto t2 = m.jump_targets(7, 1.5, 32);
  REQUIRE(t1.size() == t2.size());
  CHECK(t1[0].rate == t2[0].rate);
}
