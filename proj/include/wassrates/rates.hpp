#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "json.hpp"
#include "wassrates/rng.hpp"
#include "wassrates/series.hpp"

namespace wassrates {

// Normalizing sequence b_n = (n / Log2 n)^e with the nonparametric exponent
// 1/(2p) or the parametric exponent 1/2.
struct RateSchedule {
  enum class Kind { nonparametric, parametric };
  double p = 2.0;
  Kind kind = Kind::parametric;

  double exponent() const { return kind == Kind::nonparametric ? 1.0 / (2.0 * p) : 0.5; }
};

double rate_b(std::size_t n, const RateSchedule& sched);

// Geometric thinning grid for trajectory statistics: n = ceil(1.1^j) up to
// n_max, with the tail-window endpoints included. Suprema over the grid lower
// bound the full suprema, so one-sided checks stay valid.
std::vector<std::size_t> evaluation_grid(std::size_t n_max);

// A computed bound with the full tree of sub-constants that produced it.
// audit_replay re-derives the headline value from the ledger alone.
struct BoundReport {
  std::string kind;
  double value = 0.0;
  nlohmann::json inputs;
  nlohmann::json sub_constants;

  nlohmann::json to_json() const;
  static BoundReport from_json(const nlohmann::json& j);
};

double audit_replay(const BoundReport& report);
bool audit_pass(const BoundReport& report, double rel_tol = 1e-12);

// Constants of the dominated-ergodic (maximal) inequality
//   E sup_n |S_n|^r / (n Log2 n)^{r/2} <= sigma^r [a0 + a1 (E|X|^r/sigma^r)^ceil(r)].
// The ledger records every ingredient of the derivation.
struct TeicherConstants {
  double r = 0.0;
  double alpha0 = 0.0;
  double alpha1 = 0.0;
  nlohmann::json ledger;
};

TeicherConstants teicher_constants(double r);

// Bound value of the maximal inequality for a law with the given moments.
double teicher_bound(const TeicherConstants& tc, double sigma2, double abs_moment_r);

// Centered 1-D laws registered for Monte Carlo verification.
struct CenteredLaw {
  std::string name;  // rademacher | normal | uniform | point_mass
  double sample(CounterRng& rng) const;
  double sigma2() const;
  double abs_moment(double r) const;
};
CenteredLaw centered_law(const std::string& name);

struct TeicherMcReport {
  double empirical_mean = 0.0;
  double mc_stderr = 0.0;
  double bound = 0.0;
  std::size_t replicas = 0;
  bool respected = false;  // empirical_mean <= bound (truncation makes the
                           // empirical value a lower estimate, so this is a
                           // valid one-sided check)
};
TeicherMcReport verify_teicher_mc(const std::string& law, double r, std::size_t n_max,
                                  std::size_t replicas, std::uint64_t seed);

// Admissible parameters of the nonparametric empirical bound.
struct EmpiricalRateWindow {
  double M = 0.0;
  double r_lo = 2.0, r_hi = 0.0;  // admissible open interval (r_lo, r_hi)
  double r = 0.0;                 // chosen order
  double lambda = 0.0, sigma = 0.0, beta = 0.0;
};
EmpiricalRateWindow empirical_rate_window(double p, int d, double delta, std::optional<double> r = std::nullopt);

// Dyadic-partition constant 2^{2p} d^{p/2} (2^p+1)(2^p-1)^{-2}.
double k_pd(double p, int d);

// Uniform L^p bound for the empirical measure (nonparametric).
BoundReport cp_nonparametric(double p, int d, double delta, double r, double moment);
// Almost-sure limsup bound for the empirical measure (nonparametric).
BoundReport yp_nonparametric(double p, int d, double delta, double moment);

// Constant K(eps,d) with sum (l_j - 1 - log l_j) <= K ||M - I||_F^2 for every
// symmetric PD matrix M with det(M) >= eps.
double k_eps_d(double eps, int d);

// Central moments of a product of correlated standard normals, k in {2,4}.
double omega_k(double rho, int k);

// Uniform L^2 bound for the Gaussian plug-in estimator.
BoundReport c2_gauss(const Eigen::MatrixXd& v0, double eps, double r_mean = 4.0,
                     RateSchedule sched = {2.0, RateSchedule::Kind::parametric});
// Almost-sure limsup bound for the Gaussian plug-in estimator.
BoundReport y2_gauss(const Eigen::MatrixXd& v0, double eps);

}  // namespace wassrates
