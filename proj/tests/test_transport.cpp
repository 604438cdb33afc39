#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "wassrates/measures.hpp"
#include "wassrates/transport.hpp"

using namespace wassrates;

TEST_CASE("identical measures have zero distance and a diagonal plan") {
  CounterRng rng(1);
  const DiscreteMeasure mu = oracles::random_measure_rd(rng, 2, 5);
  const ExactTransport res = wasserstein_exact(mu, mu, 2.0);
  CHECK(res.distance < 1e-12);
  res.plan.validate();
  for (const auto& [i, j, f] : res.plan.entries)
    if (f > 0.0) CHECK(i == j);
}

TEST_CASE("point masses transport at the ground distance for every order") {
  const DiscreteMeasure a = DiscreteMeasure::dirac({1.0});
  const DiscreteMeasure b = DiscreteMeasure::dirac({-2.5});
  for (double p : {1.0, 1.5, 2.0, 3.0})
    CHECK(wasserstein_exact(a, b, p).distance == doctest::Approx(3.5).epsilon(1e-12));
}

TEST_CASE("two-by-two instance solved by enumerating the transport polytope") {
  const DiscreteMeasure mu = DiscreteMeasure::on_rd({{0.0}, {2.0}}, {0.5, 0.5});
  const DiscreteMeasure nu = DiscreteMeasure::on_rd({{1.0}, {3.0}}, {0.5, 0.5});
  const double lp = wasserstein_exact(mu, nu, 1.0).distance;
  CHECK(lp == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(oracles::wasserstein_by_enumeration(mu, nu, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("solver equals the vertex-enumeration oracle on random instances") {
  CounterRng rng(2024);
  for (int rep = 0; rep < 40; ++rep) {
    const int d = 1 + static_cast<int>(rng.next_u64() % 2);
    const DiscreteMeasure mu = oracles::random_measure_rd(rng, d, 3);
    const DiscreteMeasure nu = oracles::random_measure_rd(rng, d, 3);
    const double p = (rep % 2 == 0) ? 1.0 : 2.0;
    const ExactTransport res = wasserstein_exact(mu, nu, p);
    const double ref = oracles::wasserstein_by_enumeration(mu, nu, p);
    CHECK(res.distance == doctest::Approx(ref).epsilon(1e-9));
    res.plan.validate();
  }
}

TEST_CASE("solver equals the oracle on denser four-by-four instances") {
  CounterRng rng(4242);
  for (int rep = 0; rep < 25; ++rep) {
    std::vector<Point> pa(4), pb(4);
    std::vector<double> wa(4), wb(4);
    double ta = 0.0, tb = 0.0;
    for (int i = 0; i < 4; ++i) {
      pa[i] = {4.0 * (rng.next_unit() - 0.5), 4.0 * (rng.next_unit() - 0.5)};
      pb[i] = {4.0 * (rng.next_unit() - 0.5), 4.0 * (rng.next_unit() - 0.5)};
      wa[i] = 0.05 + rng.next_unit();
      wb[i] = 0.05 + rng.next_unit();
      ta += wa[i];
      tb += wb[i];
    }
    for (double& w : wa) w /= ta;
    for (double& w : wb) w /= tb;
    const DiscreteMeasure mu = DiscreteMeasure::on_rd(pa, wa);
    const DiscreteMeasure nu = DiscreteMeasure::on_rd(pb, wb);
    const double p = (rep % 2 == 0) ? 1.0 : 2.0;
    const double lp = wasserstein_exact(mu, nu, p).distance;
    const double ref = oracles::wasserstein_by_enumeration(mu, nu, p);
    CHECK(lp == doctest::Approx(ref).epsilon(1e-9));
  }
}

TEST_CASE("degenerate equal weights do not stall the solver") {
  // Uniform weights make the polytope maximally degenerate.
  CounterRng rng(777);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<Point> pa(6), pb(6);
    for (int i = 0; i < 6; ++i) {
      pa[i] = {rng.next_normal()};
      pb[i] = {rng.next_normal()};
    }
    std::vector<double> w(6, 1.0 / 6.0);
    const DiscreteMeasure mu = DiscreteMeasure::on_rd(pa, w);
    const DiscreteMeasure nu = DiscreteMeasure::on_rd(pb, w);
    const double lp = wasserstein_exact(mu, nu, 2.0).distance;
    const double fast = wasserstein_1d(mu, nu, 2.0);
    CHECK(lp == doctest::Approx(fast).epsilon(1e-9));
  }
}

TEST_CASE("finer dyadic levels tighten the bracket around the exact value") {
  const MeasureDescriptor u = MeasureDescriptor::density1d({"uniform", -1.0, 1.0});
  const DiscreteMeasure mu = empirical_measure(sample_iid(u, 30, 1), 30);
  const DiscreteMeasure nu = empirical_measure(sample_iid(u, 30, 2), 30);
  const double exact_pow = wasserstein_exact(mu, nu, 1.0).distance;
  DyadicGrid coarse{8, 6};
  DyadicGrid fine{8, 20};
  const DyadicBound bc = dyadic_upper_bound(mu, nu, 1.0, coarse);
  const DyadicBound bf = dyadic_upper_bound(mu, nu, 1.0, fine);
  CHECK(bc.total() >= bf.total() - 1e-12);  // the bracket shrinks with depth
  CHECK(bf.total() >= exact_pow);
  CHECK(bc.value <= bf.value + 1e-12);  // retained levels only grow the sum
}

TEST_CASE("finite-space transport equals the enumeration oracle") {
  CounterRng rng(909);
  for (int rep = 0; rep < 30; ++rep) {
    // Random 3-point metric satisfying the triangle inequality: side lengths
    // of a random triangle.
    const double a = 0.5 + rng.next_unit(), b = 0.5 + rng.next_unit();
    const double c = std::fabs(a - b) + (a + b - std::fabs(a - b)) * (0.1 + 0.8 * rng.next_unit());
    const auto space = std::make_shared<const FiniteSpace>(
        std::vector<std::string>{"x", "y", "z"},
        std::vector<std::vector<double>>{{0, a, b}, {a, 0, c}, {b, c, 0}});
    std::vector<double> pm(3), qm(3);
    double pt = 0.0, qt = 0.0;
    for (int j = 0; j < 3; ++j) {
      pm[j] = 0.05 + rng.next_unit();
      qm[j] = 0.05 + rng.next_unit();
      pt += pm[j];
      qt += qm[j];
    }
    for (int j = 0; j < 3; ++j) {
      pm[j] /= pt;
      qm[j] /= qt;
    }
    const DiscreteMeasure mu = DiscreteMeasure::on_finite(space, {0, 1, 2}, pm);
    const DiscreteMeasure nu = DiscreteMeasure::on_finite(space, {0, 1, 2}, qm);
    const double p = (rep % 2 == 0) ? 1.0 : 2.0;
    const double lp = wasserstein_exact(mu, nu, p).distance;
    const double ref = oracles::wasserstein_by_enumeration(mu, nu, p);
    CHECK(lp == doctest::Approx(ref).epsilon(1e-10));
  }
}

TEST_CASE("uniform-metric transport collapses to total variation") {
  CounterRng rng(910);
  const auto space = FiniteSpace::uniform(4, 1.7);
  REQUIRE(space->is_uniform());
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> pm(4), qm(4);
    double pt = 0.0, qt = 0.0;
    for (int j = 0; j < 4; ++j) {
      pm[j] = 0.05 + rng.next_unit();
      qm[j] = 0.05 + rng.next_unit();
      pt += pm[j];
      qt += qm[j];
    }
    double tv = 0.0;
    for (int j = 0; j < 4; ++j) {
      pm[j] /= pt;
      qm[j] /= qt;
      tv += std::fabs(pm[j] - qm[j]);
    }
    const DiscreteMeasure mu = DiscreteMeasure::on_finite(space, {0, 1, 2, 3}, pm);
    const DiscreteMeasure nu = DiscreteMeasure::on_finite(space, {0, 1, 2, 3}, qm);
    const double p = (rep % 2 == 0) ? 1.0 : 2.0;
    const double lp = wasserstein_exact(mu, nu, p).distance;
    const double closed = std::pow(0.5 * tv * std::pow(1.7, p), 1.0 / p);
    CHECK(lp == doctest::Approx(closed).epsilon(1e-10));
  }
}

TEST_CASE("mismatched spaces are rejected") {
  const DiscreteMeasure a = DiscreteMeasure::dirac({0.0});
  const DiscreteMeasure b = DiscreteMeasure::dirac({0.0, 0.0});
  CHECK_THROWS_AS(wasserstein_exact(a, b, 1.0), std::invalid_argument);
}

TEST_CASE("quantile coupling fast path") {
  CHECK(wasserstein_1d({0.0, 1.0}, {0.5, 0.5}, {0.0, 1.0}, {0.5, 0.5}, 2.0) == 0.0);
  CHECK(wasserstein_1d({0.0, 2.0}, {0.5, 0.5}, {1.0, 3.0}, {0.5, 0.5}, 2.0) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(wasserstein_1d({0.0}, {1.0}, {0.0, 4.0}, {0.5, 0.5}, 1.0) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("quantile coupling agrees with the exact solver") {
  CounterRng rng(7);
  for (int rep = 0; rep < 100; ++rep) {
    const DiscreteMeasure mu = oracles::random_measure_1d(rng, 6);
    const DiscreteMeasure nu = oracles::random_measure_1d(rng, 6);
    const double p = (rep % 3 == 0) ? 1.0 : (rep % 3 == 1) ? 2.0 : 3.0;
    const double fast = wasserstein_1d(mu, nu, p);
    const double lp = wasserstein_exact(mu, nu, p).distance;
    CHECK(fast == doctest::Approx(lp).epsilon(1e-9));
  }
}

TEST_CASE("closed-form order-2 distance between Gaussians") {
  Eigen::VectorXd m1(2), m2(2);
  m1 << 0.0, 0.0;
  m2 << 3.0, 4.0;
  Eigen::MatrixXd v(2, 2);
  v << 1.0, 0.3, 0.3, 2.0;
  const GaussianMeasure a(m1, v), b(m2, v);
  CHECK(gaussian_w2(a, a) < 1e-7);  // cancellation noise of the cross term
  CHECK(gaussian_w2(a, b) == doctest::Approx(5.0).epsilon(1e-12));

  Eigen::VectorXd z(1);
  z << 0.0;
  Eigen::MatrixXd s1(1, 1), s2(1, 1);
  s1 << 2.25;  // sigma = 1.5
  s2 << 0.25;  // sigma = 0.5
  CHECK(gaussian_w2(GaussianMeasure(z, s1), GaussianMeasure(z, s2)) ==
        doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("empirical order-2 distance approaches the closed form") {
  Eigen::VectorXd m0(2);
  m0 << 0.5, -0.5;
  Eigen::MatrixXd v0(2, 2);
  v0 << 1.0, 0.4, 0.4, 0.7;
  Eigen::VectorXd m1(2);
  m1 << -0.2, 0.3;
  Eigen::MatrixXd v1(2, 2);
  v1 << 0.8, -0.1, -0.1, 1.2;
  const GaussianMeasure ga(m0, v0), gb(m1, v1);
  const double closed = gaussian_w2(ga, gb);
  const MeasureDescriptor da = MeasureDescriptor::gaussian(ga);
  const MeasureDescriptor db = MeasureDescriptor::gaussian(gb);

  std::vector<double> med_err;
  for (std::size_t n : {32, 128, 512}) {
    std::vector<double> errs;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const DiscreteMeasure ea = empirical_measure(sample_iid(da, n, derive_seed(seed, 1)), n);
      const DiscreteMeasure eb = empirical_measure(sample_iid(db, n, derive_seed(seed, 2)), n);
      errs.push_back(std::fabs(wasserstein_exact(ea, eb, 2.0).distance - closed));
    }
    std::sort(errs.begin(), errs.end());
    med_err.push_back(errs[errs.size() / 2]);
  }
  CHECK(med_err[2] < med_err[0]);
  CHECK(med_err[2] < 0.2);
}

TEST_CASE("metric axioms on random discrete triples") {
  CounterRng rng(99);
  for (int rep = 0; rep < 200; ++rep) {
    const int d = 1 + static_cast<int>(rng.next_u64() % 2);
    const DiscreteMeasure a = oracles::random_measure_rd(rng, d, 3);
    const DiscreteMeasure b = oracles::random_measure_rd(rng, d, 3);
    const DiscreteMeasure c = oracles::random_measure_rd(rng, d, 3);
    const double p = (rep % 2 == 0) ? 1.0 : 2.0;
    const double ab = wasserstein_exact(a, b, p).distance;
    const double ba = wasserstein_exact(b, a, p).distance;
    const double ac = wasserstein_exact(a, c, p).distance;
    const double cb = wasserstein_exact(c, b, p).distance;
    CHECK(std::fabs(ab - ba) < 1e-9);
    CHECK(ab <= ac + cb + 1e-8);
    CHECK(wasserstein_exact(a, a, p).distance < 1e-9);
  }
}

TEST_CASE("distance is monotone in the order") {
  CounterRng rng(123);
  for (int rep = 0; rep < 100; ++rep) {
    const DiscreteMeasure a = oracles::random_measure_1d(rng, 5);
    const DiscreteMeasure b = oracles::random_measure_1d(rng, 5);
    const double s = 1.0 + 2.0 * rng.next_unit();
    const double p = s + 2.0 * rng.next_unit();
    const double ds = wasserstein_exact(a, b, s).distance;
    const double dp = wasserstein_exact(a, b, p).distance;
    CHECK(ds <= dp + 1e-9);
  }
}

TEST_CASE("dyadic bound vanishes on equal measures") {
  CounterRng rng(8);
  const DiscreteMeasure mu = oracles::random_measure_rd(rng, 1, 6);
  const DyadicBound b = dyadic_upper_bound(mu, mu, 1.0, DyadicGrid{});
  CHECK(b.value == 0.0);
  CHECK(b.remainder == 0.0);
}

TEST_CASE("dyadic bound dominates a split pair of point masses") {
  const DiscreteMeasure mu = DiscreteMeasure::dirac({0.0});
  const DiscreteMeasure nu = DiscreteMeasure::dirac({0.5});
  const DyadicBound b = dyadic_upper_bound(mu, nu, 1.0, DyadicGrid{});
  CHECK(b.total() >= 0.5);
  CHECK(std::isfinite(b.total()));
}

TEST_CASE("dyadic bound dominates the exact distance on sampled pairs") {
  const MeasureDescriptor u = MeasureDescriptor::density1d({"uniform", -1.0, 1.0});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const DiscreteMeasure mu = empirical_measure(sample_iid(u, 50, derive_seed(seed, 10)), 50);
    const DiscreteMeasure nu = empirical_measure(sample_iid(u, 50, derive_seed(seed, 20)), 50);
    const double exact = wasserstein_exact(mu, nu, 1.0).distance;
    const DyadicBound b = dyadic_upper_bound(mu, nu, 1.0, DyadicGrid{});
    CHECK(b.total() >= exact);
  }
}

TEST_CASE("dyadic grid sizing needs a usable moment") {
  CHECK_THROWS_AS(DyadicGrid::for_tolerance(1.0, 1, 0.5, 1.0, 1.0, 1e-3), std::invalid_argument);
  const DyadicGrid g = DyadicGrid::for_tolerance(1.0, 1, 3.0, 1.0, 1.0, 1e-6);
  CHECK(g.s_max > 0);
  CHECK(g.l_max > 0);
}

TEST_CASE("nested distance degenerate cases") {
  CounterRng rng(21);
  const DiscreteMeasure mu = oracles::random_measure_1d(rng, 4);
  const DiscreteMeasure nu = oracles::random_measure_1d(rng, 4);
  const DiscreteMeasure rho = oracles::random_measure_1d(rng, 4);

  const MetaMeasure a = MetaMeasure::dirac(mu);
  CHECK(nested_distance(a, a, 2.0) < 1e-12);
  CHECK(nested_distance(a, MetaMeasure::dirac(nu), 2.0) ==
        doctest::Approx(wasserstein_exact(mu, nu, 2.0).distance).epsilon(1e-10));

  // A point mass against a general mixture forces the product coupling.
  const MetaMeasure b({nu, rho}, {0.3, 0.7});
  const double direct = nested_distance(a, b, 2.0);
  const double byhand = std::sqrt(0.3 * std::pow(wasserstein_exact(mu, nu, 2.0).distance, 2.0) +
                                  0.7 * std::pow(wasserstein_exact(mu, rho, 2.0).distance, 2.0));
  CHECK(direct == doctest::Approx(byhand).epsilon(1e-10));
}

TEST_CASE("1-D density distance agrees with a fine discrete proxy") {
  const Density1d u{"uniform", 0.0, 1.0};
  // Sample of three points; the quantile-gap integral is exact piecewise.
  const std::vector<double> sample = {0.25, 0.5, 0.75};
  const double val = wasserstein_1d_vs_density(u, sample, 1.0);
  // Exact: each third of [0,1] maps to its sample point.
  double exact = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double lo = i / 3.0, hi = (i + 1) / 3.0, x = sample[i];
    exact += 0.5 * ((x - lo) * (x - lo) + (hi - x) * (hi - x));
  }
  CHECK(val == doctest::Approx(exact).epsilon(1e-10));
}
