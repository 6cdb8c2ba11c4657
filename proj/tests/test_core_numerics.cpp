#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "fkpotts/bethe.hpp"
#include "fkpotts/errors.hpp"
#include "fkpotts/params.hpp"
#include "fkpotts/rng.hpp"

using namespace fkp;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an fkp::Error");
  return ErrorCode::DomainError;
}

// Reference BP: plain full-vector iteration with no acceleration.
ColorLaw naive_bp(const ModelParams& p, ColorLaw nu, int iters) {
  for (int i = 0; i < iters; ++i) nu = bp_step(p, nu);
  return nu;
}

}  // namespace

// Frozen from tests/oracle/gen_oracles.py (mpmath, 50 digits).
TEST_CASE("critical line reference values") {
  CHECK(critical_line(3, 3.0, 0.0, true).w_c == doctest::Approx(2.8473221018630726).epsilon(1e-13));
  CHECK(b_plus(3, 3.0) == doctest::Approx(0.006166462861748783).epsilon(1e-10));
  CHECK(b_plus(3, 5.0) == doctest::Approx(0.049252204081845049).epsilon(1e-10));
  CHECK(b_plus(4, 3.0) == doctest::Approx(0.010327599526575850).epsilon(1e-10));
  CHECK(b_plus(15, 45.0) == doctest::Approx(1.7469476471585560).epsilon(1e-10));
  CHECK(b_plus(3, 8.0) == doctest::Approx(0.13554184124995129).epsilon(1e-10));
}

TEST_CASE("BP fixed points and Bethe values at a critical point") {
  const double B = 0.5 * b_plus(3, 3.0);
  const auto c = critical_line(3, 3.0, B);
  CHECK(c.beta_crit == doctest::Approx(1.3374529013437246).epsilon(1e-10));
  const auto p = make_params(3, 3.0, c.beta_crit, B);
  const auto fp = bp_fixed_points(p);
  CHECK(fp.free[0] == doctest::Approx(0.36454353854470728).epsilon(1e-9));
  CHECK(fp.wired[0] == doctest::Approx(0.52389552100484395).epsilon(1e-9));
  CHECK(bethe_functional(p, fp.free) == doctest::Approx(2.0909799933217558).epsilon(1e-11));
  CHECK(bethe_functional(p, fp.wired) == doctest::Approx(2.0909799933217558).epsilon(1e-11));
  const auto pt = classify_regime(p);
  CHECK(pt.regime == Regime::Critical);
  REQUIRE(pt.below);
  REQUIRE(pt.above);
  CHECK(*pt.below == Regime::Disordered);
  CHECK(*pt.above == Regime::Ordered);
}

TEST_CASE("Ising magnetisation reference values") {
  CHECK(ising_magnetization(3, 0.7).m == doctest::Approx(0.90148064157575181).epsilon(1e-11));
  CHECK(ising_magnetization(3, 0.8).m == doctest::Approx(0.96070169786720585).epsilon(1e-11));
  CHECK(ising_magnetization(3, 1.0).m == doctest::Approx(0.99175700320849771).epsilon(1e-11));
  CHECK(ising_magnetization(3, 0.5).m == 0.0);
  CHECK(beta_uniqueness(3) == doctest::Approx(0.549306144334055).epsilon(1e-14));
}

TEST_CASE("parameter validation") {
  CHECK(code_of([] { make_params(2, 3.0, 1.0, 0.0); }) == ErrorCode::DomainError);
  CHECK(code_of([] { make_params(3, 2.0, 1.0, 0.0); }) == ErrorCode::DomainError);
  CHECK(code_of([] { make_params(3, 3.0, -1.0, 0.0); }) == ErrorCode::DomainError);
  CHECK(code_of([] { make_params(3, 2.5, 1.0, 0.0).q_int(); }) == ErrorCode::UnsupportedSpinSpace);
  CHECK(code_of([] { critical_line(3, 3.0, 0.1); }) == ErrorCode::OutsideCriticalWindow);
  CHECK(code_of([] { critical_line(3, 3.0, 0.0); }) == ErrorCode::DomainError);
  const auto p = make_params(3, 3.0, std::log(2.0), std::log(2.0));
  CHECK(p.w == doctest::Approx(1.0));
  CHECK(p.w_ghost == doctest::Approx(1.0));
  CHECK(p.p_edge == doctest::Approx(0.5));
}

TEST_CASE("property: reduced and full BP agree with plain iteration") {
  SeqRng rng(CounterRng(2024).sub(1));
  for (int trial = 0; trial < 40; ++trial) {
    const int d = 3 + static_cast<int>(rng.below(3));
    const int q = 3 + static_cast<int>(rng.below(4));
    const double beta = 0.1 + 1.2 * rng.uniform();
    const double B = 0.2 + 1.5 * rng.uniform();  // strong field: unique and fast to converge
    const auto p = make_params(d, q, beta, B);
    const auto fp = bp_fixed_points(p);
    const auto full = bp_fixed_points_full(p);
    const auto ref = naive_bp(p, ColorLaw::uniform(q), 5000);
    CHECK(sup_distance(fp.free, ref) <= 1e-11);
    CHECK(sup_distance(fp.free, full.free) <= 1e-11);
    CHECK(sup_distance(bp_step(p, fp.wired), fp.wired) <= 1e-12);
    fp.free.validate();
  }
}

TEST_CASE("property: BP fixed points are stationary points of the Bethe functional") {
  SeqRng rng(CounterRng(99).sub(2));
  for (int trial = 0; trial < 20; ++trial) {
    const int q = 3 + static_cast<int>(rng.below(3));
    const auto p = make_params(3, q, 0.2 + rng.uniform(), 0.3 + rng.uniform());
    const auto nu = bp_fixed_points(p).free;
    const double h = 1e-6;
    for (int i = 0; i < q; ++i) {
      auto up = nu.probs, dn = nu.probs;
      up[i] += h;
      dn[i] -= h;
      up[(i + 1) % q] -= h;
      dn[(i + 1) % q] += h;
      const double g = (bethe_functional(p, ColorLaw{up, {}}) - bethe_functional(p, ColorLaw{dn, {}})) / (2 * h);
      CHECK(std::abs(g) <= 1e-7);
    }
  }
}

TEST_CASE("property: Bethe equality along the critical line") {
  SeqRng rng(CounterRng(5).sub(3));
  for (int trial = 0; trial < 30; ++trial) {
    const int d = 3 + static_cast<int>(rng.below(3));
    const int q = 3 + static_cast<int>(rng.below(6));
    const double B = b_plus(d, q) * (0.02 + 0.96 * rng.uniform());
    const auto p = make_params(d, q, critical_line(d, q, B).beta_crit, B);
    const auto fp = bp_fixed_points(p);
    CHECK(std::abs(bethe_functional(p, fp.free) - bethe_functional(p, fp.wired)) <= 1e-8);
    CHECK(on_critical_line(p));
    CHECK(sup_distance(fp.free, fp.wired) > 1e-4);
  }
}

TEST_CASE("random-cluster BP and the rank-2 Ising reduction") {
  const double B = 0.5 * b_plus(3, 8.0);
  const auto p = make_params(3, 8.0, critical_line(3, 8.0, B).beta_crit, B);
  const auto rc = rcm_bp_fixed_points(p);
  CHECK(rc.psi_free == doctest::Approx(0.093649).epsilon(1e-5));
  CHECK(rc.psi_wired == doctest::Approx(0.763494).epsilon(1e-5));
  CHECK(bp_hat(p, p.d - 1, rc.b_free) == doctest::Approx(rc.b_free).epsilon(1e-12));
  const auto red = ising_reduction(p);
  CHECK(red.beta_star > beta_uniqueness(3));
  CHECK(std::abs(2.0 * rc.s_wired - 1.0 - red.m_val) <= 1e-8);
  CHECK(std::abs(2.0 * rc.s_free - 1.0 + red.m_val) <= 1e-8);
  // Connection probability and root marginal describe the same colour-1 excess.
  const auto fp = bp_fixed_points(p);
  CHECK(root_marginal(p, fp.wired)[0] == doctest::Approx(rc.s_wired).epsilon(1e-9));
  CHECK(root_marginal(p, fp.free)[0] == doctest::Approx(rc.s_free).epsilon(1e-9));
}

TEST_CASE("above B_+ there is a single fixed point") {
  for (double B : {0.2, 0.5, 1.0}) {
    for (double beta : {0.5, 1.3, 2.0}) {
      const auto p = make_params(3, 3.0, beta, B);
      CHECK(classify_regime(p).regime == Regime::Uniqueness);
    }
  }
}

TEST_CASE("counter RNG is order independent") {
  const CounterRng r(42);
  const double a = r.sub(3).uniform(17);
  const double b = r.sub(3).uniform(17);
  CHECK(a == b);
  CHECK(r.sub(3).uniform(18) != a);
  double mean = 0.0;
  for (int i = 0; i < 100000; ++i) mean += r.uniform(i) / 100000.0;
  CHECK(mean == doctest::Approx(0.5).epsilon(0.01));
  for (int i = 0; i < 1000; ++i) CHECK(r.below(i, 7) < 7);
}
