#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>

#include "wassrates/measures.hpp"
#include "wassrates/rates.hpp"
#include "wassrates/transport.hpp"

namespace wassrates {

// Dirichlet prior over a finite space.
struct DirichletFiniteModel {
  std::shared_ptr<const FiniteSpace> space;
  std::vector<double> alpha;

  void validate() const;
};

// Either a Dirichlet posterior (counts) or the degenerate point-mass prior,
// which conditioning leaves untouched.
struct PosteriorState {
  DirichletFiniteModel model;
  std::vector<long> counts;
  long n = 0;
  std::optional<DiscreteMeasure> point_mass;

  std::vector<double> posterior_alpha() const;
  DiscreteMeasure mean_measure() const;
};

// Law of the next-block empirical measure: probabilities over compositions of
// m observations into the k cells.
struct PredictiveLaw {
  std::shared_ptr<const FiniteSpace> space;
  int m = 0;
  std::vector<std::vector<int>> compositions;
  std::vector<double> probs;

  MetaMeasure as_meta() const;
  DiscreteMeasure composition_measure(std::size_t idx) const;
};

// Exchangeable sampling: draw the latent measure from the prior, then i.i.d.
// observations from it. Deterministic given the seed.
struct DirichletDraw {
  DiscreteMeasure latent;               // on the finite space
  std::vector<std::size_t> observations;  // site indices
};
DirichletDraw definetti_sample(const DirichletFiniteModel& prior, std::size_t n, std::uint64_t seed);

// Normal-inverse-Wishart prior for the Gaussian model; requires enough
// degrees of freedom for the covariance to have a finite mean.
struct NiwParams {
  Eigen::VectorXd m0;
  double kappa = 1.0;
  Eigen::MatrixXd psi;
  double nu = 0.0;

  void validate() const;  // throws naming the failed moment hypothesis
};
struct GaussianLatentDraw {
  GaussianMeasure latent;
  SampleTrajectory traj;
};
GaussianLatentDraw definetti_sample_niw(const NiwParams& prior, std::size_t n, std::uint64_t seed);

PosteriorState posterior_update(const DirichletFiniteModel& model,
                                const std::vector<std::size_t>& observations);
PosteriorState point_mass_posterior(DiscreteMeasure p0);

struct DistanceMethod {
  enum class Kind { quadrature, mc } kind = Kind::quadrature;
  std::size_t mc_samples = 20000;
  std::uint64_t seed = 0;
  double mc_tol = std::numeric_limits<double>::infinity();
};
struct PosteriorDistance {
  double value = 0.0;
  double mc_sigma = 0.0;  // zero for quadrature
};
// Nested distance between the posterior and the point mass at the plug-in:
// the posterior p-th moment of the inner distance, to the 1/p.
PosteriorDistance posterior_plugin_distance(const PosteriorState& post, const DiscreteMeasure& plugin,
                                            double p, const DistanceMethod& method = {});

PredictiveLaw predictive_exact(const PosteriorState& post, int m);
PredictiveLaw bootstrap_predictive(const DiscreteMeasure& plugin, int m);
// Mixture of bootstrap laws: the block law under an i.i.d. mixture directed
// by a finitely supported zeta.
PredictiveLaw mixture_predictive(const std::vector<DiscreteMeasure>& components,
                                 const std::vector<double>& weights, int m);

struct InequalityCheck {
  double lhs = 0.0, rhs = 0.0;
  double slack_allowance = 0.0;
  bool holds = false;
};
// Predictive merging inequality: block-law distance dominated by the
// posterior-to-plug-in distance.
InequalityCheck check_savare1(const PosteriorState& post, const DiscreteMeasure& plugin, int m, double p,
                              const DistanceMethod& method = {});

// Lipschitz-functional comparison through the dual representation of the
// order-1 distance.
InequalityCheck kr_functional_bound(const PosteriorState& post, const DiscreteMeasure& plugin,
                                    const std::function<double(const DiscreteMeasure&)>& g, double lip_g,
                                    const DistanceMethod& method = {});

// Trajectory experiments at a latent measure drawn from the prior: fraction
// of replicas whose tail maximum of b_n * distance respects the limsup bound
// evaluated at the realized latent parameter.
struct BayesTrajRow {
  std::size_t replica = 0;
  std::size_t n = 0;
  double b_n = 0.0, distance = 0.0, bound = 0.0;
};
struct BayesRateReport {
  std::size_t replicas = 0;
  std::size_t respected = 0;
  double fraction = 0.0;
  std::vector<BayesTrajRow> rows;
};

// Nonparametric model: Dirichlet weights on fixed 1-D support points, the
// empirical measure as plug-in.
BayesRateReport bayes_rate_nonparametric(const std::vector<double>& support_points,
                                         const std::vector<double>& alpha, double p, double delta,
                                         std::size_t n_max, std::size_t replicas, std::uint64_t seed);
// Gaussian model with a normal-inverse-Wishart prior and the plug-in fit.
BayesRateReport bayes_rate_gaussian(const NiwParams& prior, double eps, std::size_t n_max,
                                    std::size_t replicas, std::uint64_t seed);
// Location family with a normal prior on the location parameter.
BayesRateReport bayes_rate_expfam_location(double prior_mean, double prior_sd, std::size_t n_max,
                                           std::size_t replicas, std::uint64_t seed);

}  // namespace wassrates
