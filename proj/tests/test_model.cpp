#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "dsbm/model.hpp"
#include "dsbm/philox.hpp"

using namespace dsbm;

namespace {

// largest-real-part eigenvalue of [[a, a], [2b, b]] straight from Eigen
double branching_eigen_oracle(double a, double b) {
  Eigen::Matrix2d M;
  M << a, a, 2 * b, b;
  const auto ev = M.eigenvalues();
  return std::max(ev[0].real(), ev[1].real());
}

// static threshold |c_in - c_out| = k sqrt(c), solved for epsilon by bisection
double static_threshold_bisection(double c, int k) {
  auto gap = [&](double eps) {
    const Rates r = derive_rates(c, eps, k);
    return (r.c_in - r.c_out) - k * std::sqrt(c);
  };
  double lo = 0.0, hi = 1.0;  // gap(0) > 0 when c > 1, gap(1) = -k sqrt(c) < 0
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (gap(mid) > 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("derive_rates worked example and identities") {
  const Rates r = derive_rates(4.0, 0.3, 2);
  CHECK(r.c_in == doctest::Approx(8.0 / 1.3).epsilon(1e-12));      // 6.153846...
  CHECK(r.c_out == doctest::Approx(2.4 / 1.3).epsilon(1e-12));     // 1.846153...
  CHECK(r.lambda == doctest::Approx(0.7 / 1.3).epsilon(1e-12));    // 0.538461...

  // mean degree identity and lambda consistency on a parameter sweep
  Philox rng(404, 0);
  for (int trial = 0; trial < 500; ++trial) {
    const double c = 0.5 + 31.5 * rng.uniform01();
    const double eps = rng.uniform01();
    const int k = 2 + static_cast<int>(rng.uniform_below(6));
    const Rates rr = derive_rates(c, eps, k);
    CHECK(std::abs((rr.c_in + (k - 1) * rr.c_out) / k - c) < 1e-12);
    CHECK(std::abs(rr.lambda - (rr.c_in - rr.c_out) / (k * c)) < 1e-12);
    CHECK(rr.c_in >= rr.c_out);
  }
}

TEST_CASE("ks_margin worked example") {
  // c=16, eps=0.5, k=2: lambda = 1/3, margin = 16/9 * 1.25 - 0.75
  const Rates r = derive_rates(16.0, 0.5, 2);
  CHECK(ks_margin(16.0, r.lambda, 0.5) == doctest::Approx(16.0 / 9 * 1.25 - 0.75).epsilon(1e-12));
  CHECK(ks_margin(16.0, r.lambda, 0.5) == doctest::Approx(1.4722222222).epsilon(1e-9));
}

TEST_CASE("branching_eigenvalue agrees with a 2x2 eigensolver") {
  Philox rng(405, 0);
  for (int trial = 0; trial < 500; ++trial) {
    const double c = 0.5 + 31.5 * rng.uniform01();
    const double eps = rng.uniform01();
    const double eta = rng.uniform01();
    const int k = 2 + static_cast<int>(rng.uniform_below(4));
    const double lambda = derive_rates(c, eps, k).lambda;
    const double got = branching_eigenvalue(c, lambda, eta);
    const double want = branching_eigen_oracle(c * lambda * lambda, eta * eta);
    CHECK(got == doctest::Approx(want).epsilon(1e-10));
    CHECK(got >= 0);
  }
  // frozen spot values: larger root of x^2 - (a+b) x - ab = 0 with a=c lambda^2, b=eta^2
  CHECK(branching_eigenvalue(16.0, 0.25, 0.5) == doctest::Approx(1.4253905297).epsilon(1e-9));
  CHECK(branching_eigenvalue(16.0, 1.0 / 3, 0.5) == doctest::Approx(2.2273200256).epsilon(1e-9));
  // boundary cases
  CHECK(branching_eigenvalue(16.0, 0.25, 0.0) == doctest::Approx(1.0).epsilon(1e-12));  // c lambda^2 = 1
  CHECK(branching_eigenvalue(16.0, 0.0, 0.7) == doctest::Approx(0.49).epsilon(1e-12));  // eta^2
}

TEST_CASE("threshold equivalence: branching > 1 iff ks_margin > 0") {
  Philox rng(406, 0);
  int checked = 0;
  for (int trial = 0; trial < 4000; ++trial) {
    const double c = 0.2 + 31.8 * rng.uniform01();
    const double eps = rng.uniform01();
    const double eta = rng.uniform01();
    const int k = 2 + static_cast<int>(rng.uniform_below(6));
    const double lambda = derive_rates(c, eps, k).lambda;
    const double margin = ks_margin(c, lambda, eta);
    if (std::abs(margin) <= 1e-9) continue;  // skip the boundary band
    const double branching = branching_eigenvalue(c, lambda, eta);
    CHECK((margin > 0) == (branching > 1.0));
    ++checked;
  }
  CHECK(checked > 3500);
}

TEST_CASE("critical_epsilon matches the static bisection oracle at eta=0") {
  // eta = 0 reduces to the static threshold |c_in - c_out| = k sqrt(c)
  for (double c : {2.0, 4.0, 16.0, 25.0}) {
    for (int k : {2, 3, 4}) {
      const double oracle = static_threshold_bisection(c, k);
      const CriticalEpsilon ce = critical_epsilon(c, 0.0, k);
      REQUIRE_FALSE(ce.always_undetectable);
      CHECK(ce.value == doctest::Approx(oracle).epsilon(1e-10));
    }
  }
}

TEST_CASE("critical_epsilon frozen values") {
  CHECK(critical_epsilon(16.0, 0.0, 2).value == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(critical_epsilon(16.0, 0.5, 2).value == doctest::Approx(0.6755341978).epsilon(1e-9));
  CHECK(critical_epsilon(16.0, 0.9, 2).value == doctest::Approx(0.8501411536).epsilon(1e-9));
  // eta = 1: everything is detectable short of epsilon = 1
  CHECK(critical_epsilon(16.0, 1.0, 2).value == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("critical_epsilon round trip: margin vanishes at the boundary") {
  Philox rng(407, 0);
  for (int trial = 0; trial < 300; ++trial) {
    const double c = 1.1 + 30.9 * rng.uniform01();
    const double eta = 0.95 * rng.uniform01();
    const int k = 2 + static_cast<int>(rng.uniform_below(4));
    const CriticalEpsilon ce = critical_epsilon(c, eta, k);
    if (ce.always_undetectable) continue;
    const double lam = derive_rates(c, ce.value, k).lambda;
    CHECK(std::abs(ks_margin(c, lam, eta)) < 1e-9);
    // detectable strictly inside, undetectable strictly outside
    if (ce.value > 0.02) {
      const double inside = derive_rates(c, ce.value - 0.01, k).lambda;
      CHECK(ks_margin(c, inside, eta) > 0);
    }
    if (ce.value < 0.98) {
      const double outside = derive_rates(c, ce.value + 0.01, k).lambda;
      CHECK(ks_margin(c, outside, eta) < 0);
    }
  }
}

TEST_CASE("critical_epsilon flags the never-detectable regime") {
  // c below (1-eta^2)/(1+eta^2)
  const CriticalEpsilon ce = critical_epsilon(0.5, 0.0, 2);
  CHECK(ce.always_undetectable);
  CHECK(ce.value == 0.0);
  // same c becomes detectable once persistence is strong enough:
  // (1-eta^2)/(1+eta^2) at eta=0.9 is 0.19/1.81 = 0.1049... < 0.5
  CHECK_FALSE(critical_epsilon(0.5, 0.9, 2).always_undetectable);
}

TEST_CASE("monotonicity: epsilon_c grows with eta and with c") {
  double prev = 0;
  for (double eta : {0.0, 0.2, 0.4, 0.6, 0.8, 0.95}) {
    const double val = critical_epsilon(16.0, eta, 2).value;
    CHECK(val > prev);
    prev = val;
  }
  prev = 0;
  for (double c : {2.0, 4.0, 8.0, 16.0, 32.0}) {
    const double val = critical_epsilon(c, 0.3, 2).value;
    CHECK(val > prev);
    prev = val;
  }
}

TEST_CASE("ModelParams validation and channel matrices") {
  const ModelParams p = ModelParams::make(100, 5, 2, 0.5, 8.0, 0.25);
  CHECK(p.c_in() == doctest::Approx(16.0 / 1.25));
  CHECK(p.c_out() == doctest::Approx(0.25 * 16.0 / 1.25));
  CHECK(p.lambda() == doctest::Approx(0.75 / 1.25));
  CHECK(p.uniform_prior());
  CHECK(p.prior_of(0) == 0.5);

  const auto sigma = p.sigma();
  const auto tau = p.tau();
  // rows sum to 1 and diagonal dominance matches lambda/eta
  for (int r = 0; r < 2; ++r) {
    CHECK(sigma[r * 2] + sigma[r * 2 + 1] == doctest::Approx(1.0));
    CHECK(tau[r * 2] + tau[r * 2 + 1] == doctest::Approx(1.0));
  }
  CHECK(sigma[0] - sigma[1] == doctest::Approx(p.lambda()));
  CHECK(tau[0] - tau[1] == doctest::Approx(p.eta));
  // sigma entries: the edge-channel matrix c_rs/(k c) row-normalized
  CHECK(sigma[0] == doctest::Approx(p.c_in() / (2 * p.c)));
  CHECK(sigma[1] == doctest::Approx(p.c_out() / (2 * p.c)));

  CHECK_THROWS_AS(ModelParams::make(0, 5, 2, 0.5, 8, 0.25), std::invalid_argument);
  CHECK_THROWS_AS(ModelParams::make(100, 0, 2, 0.5, 8, 0.25), std::invalid_argument);
  CHECK_THROWS_AS(ModelParams::make(100, 5, 2, 1.5, 8, 0.25), std::invalid_argument);
  CHECK_THROWS_AS(ModelParams::make(100, 5, 2, 0.5, -1, 0.25), std::invalid_argument);
  CHECK_THROWS_AS(ModelParams::make(100, 5, 2, 0.5, 8, 1.25), std::invalid_argument);
  CHECK_THROWS_AS(ModelParams::make(100, 5, 2, 0.5, 8, 0.25, {0.7, 0.2}), std::invalid_argument);
  // c_in = k c / (1 + (k-1) eps) = 16 > n = 10
  CHECK_THROWS_AS(ModelParams::make(10, 5, 2, 0.5, 8.0, 0.0), std::invalid_argument);
}

TEST_CASE("k = 1 degenerates cleanly") {
  const ModelParams p = ModelParams::make(10, 3, 1, 0.5, 4.0, 1.0);
  CHECK(p.c_rs(0, 0) == doctest::Approx(4.0));
  CHECK(p.edge_prob(0, 0) == doctest::Approx(0.4));
  CHECK(p.lambda() == 0.0);
  // threshold theory requires k >= 2
  CHECK_THROWS_AS(threshold_report(p), std::invalid_argument);
  CHECK_THROWS_AS(derive_rates(4.0, 0.5, 1), std::invalid_argument);
  CHECK_THROWS_AS(critical_epsilon(4.0, 0.5, 1), std::invalid_argument);
}

TEST_CASE("threshold_report composes the pieces and rejects non-uniform priors") {
  const ModelParams p = ModelParams::make(512, 40, 2, 0.5, 16.0, 0.3);
  const ThresholdReport rep = threshold_report(p);
  CHECK(rep.ks_margin == doctest::Approx(ks_margin(16.0, p.lambda(), 0.5)));
  CHECK(rep.branching_eigenvalue ==
        doctest::Approx(branching_eigenvalue(16.0, p.lambda(), 0.5)));
  CHECK(rep.epsilon_critical == doctest::Approx(0.6755341978).epsilon(1e-9));
  CHECK(rep.detectable);
  CHECK_FALSE(rep.always_undetectable);

  const ModelParams biased = ModelParams::make(512, 40, 2, 0.5, 16.0, 0.3, {0.6, 0.4});
  CHECK_THROWS_AS(threshold_report(biased), std::invalid_argument);
}
