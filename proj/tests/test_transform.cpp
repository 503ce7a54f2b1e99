#include <cmath>

#include "doctest.h"
#include "mjp/transform.hpp"
#include "test_models.hpp"

using namespace mjp;
using namespace mjp::testing;

namespace {

DriftFunction unit_f() {
  return DriftFunction(DriftFunction::Kind::CDrift, [](double, State) { return 1.0; }, 0.0,
                       "1");
}

// f = 1 on state 0 and 2 elsewhere; smallest valid c on the flip-flop is 1
DriftFunction flip_flop_f() {
  DriftFunction f(DriftFunction::Kind::CDrift,
                  [](double, State n) { return n == 0 ? 1.0 : 2.0; }, 1.0, "(1,2)");
  f.with_sup_hint(2.0);
  return f;
}

}  // namespace

TEST_CASE("identity transform: f = 1, c = 0 reproduces the base kernel") {
  const TransformedModel tm = f_transform(yule(), unit_f(), 0.0, 16, {0.0, 1.0});
  const JumpModel& jm = tm.jump_model();
  CHECK(jm.total_rate(TransformedModel::delta_index(), 0.0) == 0.0);
  for (State x : {0, 3, 7}) {
    CHECK(tm.delta_rate(x, 0.5) == 0.0);
    CHECK(jm.total_rate(TransformedModel::to_transformed(x), 0.5) ==
          doctest::Approx(yule().total_rate(x, 0.5)).epsilon(1e-15));
  }
}

TEST_CASE("linear f on the linear-birth model: a shifted birth chain") {
  const TransformedModel tm = f_transform(yule(), linear_f(1.0), 1.0, 32, {0.0, 1.0});
  const JumpModel& jm = tm.jump_model();
  for (State n : {0, 4, 9}) {
    // delta rate vanishes: the drift inequality is tight
    CHECK(tm.delta_rate(n, 0.0) == doctest::Approx(0.0).epsilon(1e-14));
    // total rate c + q_n = n + 2
    CHECK(jm.total_rate(TransformedModel::to_transformed(n), 0.0) ==
          doctest::Approx(n + 2.0));
    // birth rate n -> n+1 becomes (n+2)
    const auto targets = jm.jump_targets(TransformedModel::to_transformed(n), 0.0, 64);
    double up = 0.0;
    for (const auto& e : targets)
      if (e.target == TransformedModel::to_transformed(n + 1)) up = e.rate;
    CHECK(up == doctest::Approx(n + 2.0));
  }
}

TEST_CASE("bounded f on the doubling model: positive escape hatch to delta") {
  const TransformedModel tm =
      f_transform(doubling_birth(), bounded_f(0.5), 0.5, 24, {0.0, 2.0});
  CHECK(tm.delta_rate(0, 0.0) == doctest::Approx(0.0).epsilon(1e-14));
  for (State n : {1, 3, 8}) {
    const double expected = 0.5 - 0.5 / (2.0 - std::pow(2.0, -static_cast<double>(n)));
    CHECK(tm.delta_rate(n, 0.0) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(tm.delta_rate(n, 0.0) > 0.0);
  }
}

TEST_CASE("transformed kernels satisfy the rate-kernel contract") {
  const TransformedModel tm = f_transform(yule(), linear_f(1.0), 1.0, 32, {0.0, 1.0});
  const auto report = validate_q_function(tm.jump_model(), 24, {0.0, 0.7, 2.0});
  CHECK(report.pass);
  const TransformedModel tm2 =
      f_transform(doubling_birth(), bounded_f(0.5), 0.5, 24, {0.0});
  CHECK(validate_q_function(tm2.jump_model(), 16, {0.0, 1.0}).pass);
}

TEST_CASE("invalid drift constants abort with a witness") {
  CHECK_THROWS_AS(f_transform(yule(), linear_f(0.25), 0.25, 16, {0.0}), ModelError);
}

TEST_CASE("transform identity: left and right sides agree on singletons") {
  SUBCASE("identity transform is exact to solver precision") {
    const double r = transform_identity_check(yule(), unit_f(), 0.0, 0.0, 0, 1.0, 12);
    CHECK(r <= 1e-10);
  }
  SUBCASE("linear f on the linear-birth model") {
    const double r = transform_identity_check(yule(), linear_f(1.0), 1.0, 0.0, 0, 1.0, 14);
    CHECK(r <= 1e-6);
  }
  SUBCASE("flip-flop with its smallest valid c") {
    const double r = transform_identity_check(flip_flop(), flip_flop_f(), 1.0, 0.0, 0, 1.0, 2);
    CHECK(r <= 1e-7);
  }
}

TEST_CASE("transform identity: the reweighted origin mass has a closed form") {
  // right side at the origin: e^{-c t} f(0)/f(0) P(0,0,t,{0}) = e^{-2t} for
  // the linear-birth model with f = n+1, c = 1
  const TransformedModel tm = f_transform(yule(), linear_f(1.0), 1.0, 18, {0.0, 1.0});
  const auto est = forward_ode(tm.jump_model(), 0.0, TransformedModel::to_transformed(0),
                               1.0, 17, {1e-12, 1e-12});
  CHECK(est.mass(TransformedModel::to_transformed(0)) ==
        doctest::Approx(std::exp(-2.0)).epsilon(1e-9));
}

TEST_CASE("dynkin check: linear-birth model with f = n+1, c = 1") {
  DynkinOptions opts;
  opts.schedule = {32, 48};
  const DynkinReport rep = dynkin_check(yule(), linear_f(1.0), 1.0, 0, 1.0, opts);
  const double expected = std::exp(1.0) - 1.0;
  CHECK(std::abs(rep.lhs - expected) < 1e-4);
  CHECK(std::abs(rep.rhs - expected) < 1e-4);
  CHECK(std::abs(rep.gap) <= rep.budget);
  CHECK(rep.dynkin_holds);
  CHECK(rep.transformed_verdict == ExplosionVerdict::Nonexplosive);
  CHECK(rep.equivalence_holds);
}

TEST_CASE("dynkin check: constant f on a bounded model is exactly balanced") {
  DynkinOptions opts;
  opts.schedule = {8, 12};
  opts.verdict_work_truncation = 64;
  const DynkinReport rep = dynkin_check(flip_flop(), unit_f(), 0.0, 0, 1.0, opts);
  CHECK(std::abs(rep.lhs) < 1e-9);
  CHECK(std::abs(rep.rhs) < 1e-9);
  CHECK(rep.dynkin_holds);
  CHECK(rep.equivalence_holds);
}

TEST_CASE("dynkin check: doubling model fails in the matching direction") {
  DynkinOptions opts;
  opts.schedule = {16, 20};
  const DynkinReport rep = dynkin_check(doubling_birth(), bounded_f(0.5), 0.5, 0, 2.0, opts);
  CHECK_FALSE(rep.inconclusive);
  CHECK(std::abs(rep.gap) > rep.budget);   // the identity visibly breaks
  CHECK(rep.lhs < rep.rhs);                // exploded mass contributes zero
  CHECK_FALSE(rep.dynkin_holds);
  CHECK(rep.transformed_verdict == ExplosionVerdict::Explosive);
  CHECK(rep.equivalence_holds);  // broken identity <=> explosive transform
}

TEST_CASE("dynkin extended: g = f reproduces the base report") {
  DynkinOptions opts;
  opts.schedule = {32, 48};
  const DynkinReport base = dynkin_check(yule(), linear_f(1.0), 1.0, 0, 1.0, opts);
  const DynkinReport ext = dynkin_extended_check(
      yule(), linear_f(1.0), 1.0, [](State n) { return n + 1.0; }, 0, 1.0, opts);
  CHECK(ext.f_norm == 1.0);
  CHECK(ext.lhs == base.lhs);
  CHECK(ext.rhs == base.rhs);
  CHECK(ext.lhs_budget == base.lhs_budget);
  CHECK(ext.rhs_budget == base.rhs_budget);
  CHECK(ext.dynkin_holds);
}

TEST_CASE("dynkin extended: alternating-sign g stays within budget") {
  DynkinOptions opts;
  opts.schedule = {32, 48};
  const DynkinReport rep = dynkin_extended_check(
      yule(), linear_f(1.0), 1.0,
      [](State n) { return (n % 2 == 0 ? 1.0 : -1.0) * (n + 1.0); }, 0, 1.0, opts);
  CHECK(rep.f_norm == doctest::Approx(1.0));
  CHECK_FALSE(rep.inconclusive);
  CHECK(std::abs(rep.gap) <= rep.budget);
  CHECK(rep.dynkin_holds);
}

TEST_CASE("dynkin extended: zero g balances trivially") {
  DynkinOptions opts;
  opts.schedule = {16, 24};
  const DynkinReport rep = dynkin_extended_check(yule(), linear_f(1.0), 1.0,
                                                 [](State) { return 0.0; }, 0, 1.0, opts);
  CHECK(rep.lhs == 0.0);
  CHECK(std::abs(rep.rhs) < 1e-12);
  CHECK(rep.dynkin_holds);
}
