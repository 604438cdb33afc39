#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "wassrates/rates.hpp"
#include "wassrates/series.hpp"

using namespace wassrates;

TEST_CASE("truncated iterated logarithm") {
  CHECK(log2_fn(1.0) == 1.0);
  CHECK(log2_fn(std::exp(std::exp(1.0))) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(log2_fn(std::exp(std::exp(2.0))) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK_THROWS_AS(log2_fn(0.0), std::invalid_argument);
}

TEST_CASE("normalizing sequence") {
  const RateSchedule par{2.0, RateSchedule::Kind::parametric};
  const RateSchedule nonpar{1.0, RateSchedule::Kind::nonparametric};
  CHECK(rate_b(1, par) == 1.0);
  CHECK(rate_b(1, nonpar) == 1.0);
  CHECK(rate_b(16, par) == doctest::Approx(std::sqrt(16.0 / std::log(std::log(16.0)))).epsilon(1e-12));
  for (const RateSchedule& sched : {par, nonpar}) {
    double prev = rate_b(3, sched);
    for (std::size_t n = 4; n <= 1000000; n = n * 11 / 10 + 1) {
      const double cur = rate_b(n, sched);
      CHECK(cur >= prev - 1e-12);
      prev = cur;
    }
  }
}

TEST_CASE("recursion table entries") {
  const TeicherConstants tc = teicher_constants(4.0);
  const auto& lam = tc.ledger.at("lambda");
  CHECK(lam.at("2,1").get<double>() == 1.0);
  CHECK(lam.at("3,0").get<double>() == 2.0);
  CHECK(lam.at("4,1").get<double>() == 8.0);
}

TEST_CASE("block-series ingredient matches a direct partial sum") {
  // K(4) at r = 4 is the sum of (n Log2 n)^{-2}; compare against a long
  // partial sum plus a crude integral remainder.
  const TeicherConstants tc = teicher_constants(4.0);
  const double k4 = tc.ledger.at("K").at("4.000000").get<double>();
  double partial = 0.0;
  for (std::size_t n = 1; n <= 200000; ++n) {
    const double x = static_cast<double>(n);
    partial += 1.0 / std::pow(x * log2_fn(x), 2.0);
  }
  CHECK(k4 >= partial);
  CHECK(k4 <= partial + 1.0 / 200000.0);
}

TEST_CASE("maximal-inequality constants are positive and auditable") {
  for (double r : {2.5, 3.0, 4.0}) {
    const TeicherConstants tc = teicher_constants(r);
    CHECK(tc.alpha0 > 0.0);
    CHECK(tc.alpha1 > 0.0);
    CHECK(std::isfinite(tc.alpha0));
    CHECK(std::isfinite(tc.alpha1));
    // Replay from the ledger alone.
    const double beta0 = tc.ledger.at("beta0").get<double>();
    const double beta1 = tc.ledger.at("beta1").get<double>();
    const double symfac = tc.ledger.at("symmetrization_factor").get<double>();
    CHECK(tc.alpha0 == std::pow(2.0, r - 1.0) * beta0 * symfac);
    CHECK(tc.alpha1 == std::pow(2.0, r - 1.0) * beta1 * symfac);
  }
  CHECK_THROWS_AS(teicher_constants(2.0), std::invalid_argument);
}

TEST_CASE("sup scan for the block constant terminates near the start") {
  const TeicherConstants tc = teicher_constants(4.0);
  const double g = tc.ledger.at("gamma_r").get<double>();
  CHECK(g > 0.0);
  CHECK(g < 10.0);
  // The first block already gives sqrt(1/2) * 2^{1/4}.
  CHECK(g >= std::sqrt(0.5) * std::pow(2.0, 0.25) - 1e-12);
}

TEST_CASE("one-sided Monte Carlo check of the maximal inequality") {
  const TeicherMcReport rad = verify_teicher_mc("rademacher", 3.0, 10000, 200, 77);
  CHECK(rad.respected);
  CHECK(rad.bound == doctest::Approx(teicher_bound(teicher_constants(3.0), 1.0, 1.0)));

  const TeicherMcReport pm = verify_teicher_mc("point_mass", 3.0, 100, 10, 1);
  CHECK(pm.empirical_mean == 0.0);
  CHECK(pm.bound == 0.0);
  CHECK(pm.respected);

  const TeicherMcReport nrm = verify_teicher_mc("normal", 4.0, 10000, 100, 3);
  CHECK(nrm.respected);
  // E X^4 = 3 for the standard normal, so the bound is a0 + a1 3^4.
  const TeicherConstants tc = teicher_constants(4.0);
  CHECK(nrm.bound == doctest::Approx(tc.alpha0 + tc.alpha1 * std::pow(3.0, 4.0)));
  CHECK_THROWS_AS(verify_teicher_mc("cauchy", 3.0, 10, 2, 0), std::invalid_argument);
}

TEST_CASE("admissible parameter window") {
  const EmpiricalRateWindow a = empirical_rate_window(2.0, 1, 1.0);
  CHECK(a.M == doctest::Approx(1.4));
  CHECK(a.r_hi == doctest::Approx(3.0 / 1.4));
  const EmpiricalRateWindow b = empirical_rate_window(1.0, 1, 2.0);
  CHECK(b.M == doctest::Approx(1.25));
  CHECK(b.r_hi == doctest::Approx(2.4));
  CHECK_THROWS_AS(empirical_rate_window(0.5, 2, 1.0), std::invalid_argument);

  CounterRng rng(31);
  for (int rep = 0; rep < 100; ++rep) {
    const int d = 1 + static_cast<int>(rng.next_u64() % 3);
    const double p = std::max(1.0, d / 2.0) + 0.1 + 3.0 * rng.next_unit();
    const double delta = 0.1 + 3.0 * rng.next_unit();
    const EmpiricalRateWindow t = empirical_rate_window(p, d, delta);
    const double r = t.r_lo + (t.r_hi - t.r_lo) * (0.05 + 0.9 * rng.next_unit());
    const EmpiricalRateWindow tr = empirical_rate_window(p, d, delta, r);
    CHECK(tr.lambda > 0.0);
    CHECK(tr.sigma > 0.0);
  }
}

TEST_CASE("dyadic constant evaluations") {
  CHECK(k_pd(1.0, 1) == doctest::Approx(12.0).epsilon(1e-15));
  CHECK(k_pd(2.0, 1) == doctest::Approx(80.0 / 9.0).epsilon(1e-15));
  CHECK(k_pd(1.0, 4) == doctest::Approx(24.0).epsilon(1e-15));
}

TEST_CASE("uniform nonparametric bound: ledger replay and shape") {
  const EmpiricalRateWindow t = empirical_rate_window(1.0, 1, 1.0);
  const BoundReport rep = cp_nonparametric(1.0, 1, 1.0, t.r, 0.25);
  CHECK(rep.value > 0.0);
  CHECK(audit_pass(rep));
  // Audit fails after perturbing one ledger entry.
  BoundReport broken = rep;
  broken.sub_constants["c_bar"] = broken.sub_constants["c_bar"].get<double>() * 1.001;
  CHECK_FALSE(audit_pass(broken));
  // Monotone in the moment.
  const BoundReport higher = cp_nonparametric(1.0, 1, 1.0, t.r, 0.5);
  CHECK(higher.value > rep.value);
  // Bernoulli plug-in moment: mass at 1 gives a finite constant.
  const BoundReport bern = cp_nonparametric(1.0, 1, 1.0, t.r, 0.3);
  CHECK(std::isfinite(bern.value));
}

TEST_CASE("limsup nonparametric bound") {
  const BoundReport zero_m = yp_nonparametric(2.0, 1, 1.0, 0.0);
  const double kpd = k_pd(2.0, 1);
  CHECK(zero_m.value ==
        doctest::Approx(std::sqrt(std::sqrt(2.0) * kpd / (1.0 - std::pow(2.0, -1.5)))).epsilon(1e-12));
  const BoundReport a = yp_nonparametric(1.0, 1, 2.0, 1.0);
  CHECK(std::isfinite(a.value));
  CHECK(audit_pass(a));
  CHECK(yp_nonparametric(1.0, 1, 2.0, 2.0).value > a.value);
  CHECK_THROWS_AS(yp_nonparametric(1.0, 3, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("eigenvalue-to-Frobenius constant dominates the scalar ratio") {
  const double eps = 0.05;
  const double k = k_eps_d(eps, 1);
  for (double x = eps; x <= 40.0; x += 0.01) {
    const double t = x - 1.0;
    const double lhs = t - std::log(x);
    CHECK(lhs <= k * t * t + 1e-12);
  }
  CHECK_THROWS_AS(k_eps_d(0.5, 1), std::invalid_argument);
}

TEST_CASE("matrix inequality holds on random PD matrices") {
  struct Cell {
    double eps;
    int d;
  };
  for (const Cell cell : {Cell{0.05, 1}, Cell{0.02, 2}, Cell{1e-3, 3}}) {
    const double k = k_eps_d(cell.eps, cell.d);
    CounterRng rng(1234 + cell.d);
    for (int rep = 0; rep < 1000; ++rep) {
      const Eigen::MatrixXd m = oracles::random_pd_matrix(rng, cell.d, cell.eps, 1.2);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
      double lhs = 0.0, frob = 0.0;
      for (int i = 0; i < cell.d; ++i) {
        const double l = es.eigenvalues()(i);
        lhs += l - 1.0 - std::log(l);
        frob += (l - 1.0) * (l - 1.0);
      }
      CHECK(lhs <= k * frob + 1e-10);
    }
  }
}

TEST_CASE("product-normal central moments") {
  CHECK(omega_k(0.0, 2) == 1.0);
  CHECK(omega_k(1.0, 2) == 2.0);
  CHECK(omega_k(0.0, 4) == 9.0);
  for (double rho = -1.0; rho <= 1.0; rho += 0.05) CHECK(omega_k(rho, 4) <= 60.0 + 1e-12);
  CHECK_THROWS_AS(omega_k(0.0, 3), std::invalid_argument);
  CHECK_THROWS_AS(omega_k(1.5, 2), std::invalid_argument);

  // Monte Carlo cross-check of the quartic closed form at two correlations.
  for (double rho : {0.0, 0.6}) {
    CounterRng rng(5150);
    const std::size_t n = 10000000;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = rng.next_normal();
      const double y = rho * x + std::sqrt(1.0 - rho * rho) * rng.next_normal();
      const double c = x * y - rho;
      acc += c * c * c * c;
    }
    acc /= static_cast<double>(n);
    CHECK(acc == doctest::Approx(omega_k(rho, 4)).epsilon(0.02));
  }
}

TEST_CASE("uniform Gaussian plug-in bound composes and audits") {
  const Eigen::MatrixXd v0 = Eigen::MatrixXd::Identity(2, 2);
  const double eps = std::pow(6.0, -2.0);
  const BoundReport rep = c2_gauss(v0, eps);
  CHECK(rep.value > 0.0);
  CHECK(std::isfinite(rep.value));
  CHECK(audit_pass(rep));
  CHECK(rep.sub_constants.at("trace").get<double>() == doctest::Approx(2.0));
  CHECK(rep.sub_constants.at("frobenius").get<double>() == doctest::Approx(std::sqrt(2.0)));
  // Mean-component constant at r = 4 is [a0 + a1 3^4]^{1/2}.
  const TeicherConstants tc = teicher_constants(4.0);
  CHECK(rep.sub_constants.at("c_star").get<double>() ==
        doctest::Approx(std::sqrt(tc.alpha0 + tc.alpha1 * 81.0)).epsilon(1e-12));
  // The small-determinant series pieces are finite and positive.
  CHECK(rep.sub_constants.at("chernoff_det").get<double>() > 0.0);
  CHECK(std::isfinite(rep.sub_constants.at("chernoff_trace").get<double>()));
  CHECK(std::isfinite(rep.sub_constants.at("chernoff_logdet").get<double>()));

  BoundReport broken = rep;
  broken.sub_constants["H_term"] = rep.sub_constants["H_term"].get<double>() + 1.0;
  CHECK_FALSE(audit_pass(broken));
}

TEST_CASE("limsup Gaussian plug-in bound") {
  for (int d : {1, 2, 3}) {
    const Eigen::MatrixXd v0 = Eigen::MatrixXd::Identity(d, d);
    const double eps = std::pow(2.0 * (d + 1.0), -static_cast<double>(d));
    const BoundReport rep = y2_gauss(v0, eps);
    const double k = k_eps_d(eps, d);
    CHECK(rep.value ==
          doctest::Approx(std::sqrt(2.0) * (1.0 + d * std::sqrt(k) * std::sqrt(double(d)))).epsilon(1e-12));
    CHECK(audit_pass(rep));
  }
  // d = 1 at a general scale: sqrt(2) (sigma + sqrt(K) sigma).
  Eigen::MatrixXd v(1, 1);
  v << 2.25;
  const double eps = 0.25;
  const BoundReport rep = y2_gauss(v, eps);
  const double k = k_eps_d(eps, 1);
  CHECK(rep.value == doctest::Approx(std::sqrt(2.0) * (1.5 + std::sqrt(k) * 1.5)).epsilon(1e-12));
  // Homogeneity of the two terms under covariance scaling.
  Eigen::MatrixXd v4 = 4.0 * v;
  const BoundReport rep4 = y2_gauss(v4, eps);
  CHECK(rep4.value == doctest::Approx(std::sqrt(2.0) * (3.0 + std::sqrt(k) * 3.0)).epsilon(1e-12));
}

TEST_CASE("evaluation grid covers the tail window") {
  const auto grid = evaluation_grid(1000);
  CHECK(std::is_sorted(grid.begin(), grid.end()));
  CHECK(grid.front() == 1);
  CHECK(grid.back() == 1000);
  bool has_half = false;
  for (std::size_t n : grid) has_half |= (n == 500);
  CHECK(has_half);
}
