#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "wassrates/measures.hpp"
#include "wassrates/rates.hpp"

namespace wassrates {

using ParamVec = Eigen::VectorXd;
using ParamMat = Eigen::MatrixXd;

// Exponential family in the mean-value parametrization: densities
// exp{y . t(x) - M(y)} against a base measure, with V = grad M mapping the
// natural domain onto the mean domain.
class ExpFamily {
 public:
  virtual ~ExpFamily() = default;
  virtual std::string name() const = 0;
  virtual int param_dim() const = 0;

  virtual double log_partition(const ParamVec& y) const = 0;  // +inf outside the natural domain
  virtual bool in_natural_domain(const ParamVec& y) const = 0;
  virtual bool in_mean_domain(const ParamVec& theta) const = 0;

  virtual ParamVec mean_map(const ParamVec& y) const = 0;
  virtual ParamMat hess_log_partition(const ParamVec& y) const = 0;
  // Newton by default; closed form where the family has one.
  virtual ParamVec mean_map_inverse(const ParamVec& theta) const;
  // Legendre-dual Hessian: inverse of hess_log_partition at the pre-image.
  virtual ParamMat hess_legendre(const ParamVec& theta) const;

  virtual ParamVec suff_stat(double x) const;  // t(x), default (x)
  virtual double sample_one(CounterRng& rng, const ParamVec& theta) const = 0;
  // E |t_j(X) - theta0_j|^r under the family element at theta0.
  virtual double abs_central_moment(const ParamVec& theta0, int j, double r) const;

 protected:
  virtual ParamVec mean_map_inverse_seed(const ParamVec& theta) const;
};

std::shared_ptr<const ExpFamily> make_gaussian_location();
std::shared_ptr<const ExpFamily> make_bernoulli();
std::shared_ptr<const ExpFamily> make_poisson();
std::shared_ptr<const ExpFamily> make_exponential_base();  // natural domain bounded above
// Generic 1-D family from a base density on [lo, hi], all integrals by quadrature.
std::shared_ptr<const ExpFamily> make_quadrature_family(std::function<double(double)> base_density,
                                                        double lo, double hi);

double log_partition(const ExpFamily& fam, const ParamVec& y);
ParamVec mean_map(const ExpFamily& fam, const ParamVec& y);
ParamVec mean_map_inverse(const ExpFamily& fam, const ParamVec& theta);

// Legendre transform of the log-partition at a mean parameter.
double legendre_imu(const ExpFamily& fam, const ParamVec& theta);
// Large-deviation rate of the sufficient-statistic mean around theta0;
// vanishes at theta0 and is nonnegative (the sup form fixes the sign).
double rate_function(const ExpFamily& fam, const ParamVec& theta0, const ParamVec& theta);

// Curvature functional sqrt(int_0^1 (1-s) ||Hess Legendre|| ds) along the
// segment from theta0 to eta.
double phi_curvature(const ExpFamily& fam, const ParamVec& theta0, const ParamVec& eta,
                     int quad_order = 64);

struct MleResult {
  ParamVec theta;
  bool in_mean_domain = true;
};
MleResult mle(const ExpFamily& fam, const SampleTrajectory& traj, std::size_t n);

// Limsup bound sqrt(2 C_T) Phi(theta0) sigma_max(theta0).
BoundReport y2_expfam(const ExpFamily& fam, const ParamVec& theta0, double c_talagrand);

// Tail ingredients for the uniform bound; every user-supplied entry is taken
// as a declared assumption.
struct TailParams {
  double delta_radius = 1.0;  // interior/exterior split radius
  double tau = 1.0;           // time threshold of the tail integrals
  std::function<double(double)> rho;    // radius schedule
  std::function<double(double)> sigma;  // curvature schedule
  std::function<double(double, double)> covering_n;  // N(rho, sigma)
  double yurinskii_b = 0.0;  // normed-sum moment scale
  double yurinskii_h = 0.0;  // normed-sum moment growth
  std::function<double(double)> phi1;            // increasing, diverging majorant
  std::function<double(const ParamVec&)> phi2;   // boundary-blowup part
  double phi2_sup = std::numeric_limits<double>::infinity();
  std::optional<std::pair<double, double>> m_envelope;  // m(t) >= c0 + c1 t on [tau, inf)
  double t_horizon = 400.0;
  bool declared_assumptions = true;
};

// Yurinskii-style (B, H) from a Cauchy bound E|t_j - theta_j|^m <= m! C / r^m.
std::pair<double, double> yurinskii_from_cauchy(int k, double cauchy_r, double cauchy_c);

double m_schedule(const TailParams& tails, double t);
double h_schedule(const ExpFamily& fam, const ParamVec& theta0, const TailParams& tails, double t);

struct CostConditionReport {
  double integral1 = 0.0, remainder1 = 0.0;
  double integral2 = 0.0, remainder2 = 0.0;
  std::string verdict;  // finite | infinite | undetermined
  nlohmann::json details;
};
CostConditionReport cost_condition(const ExpFamily& fam, const ParamVec& theta0, const TailParams& tails);

// Uniform L^2 bound: C_T times the squared sum of the interior maximal-
// inequality bound and the exterior tail bound in L^2.
BoundReport c2_expfam(const ExpFamily& fam, const ParamVec& theta0, const TailParams& tails, double r,
                      double c_talagrand);

}  // namespace wassrates
