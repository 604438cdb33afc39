#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "wassrates/rng.hpp"

namespace wassrates {

using Point = std::vector<double>;

// Tolerance under which two atom locations merge into one (sup-norm).
inline constexpr double kAtomMergeTol = 1e-12;
inline constexpr double kWeightSumTol = 1e-12;

// A finite metric space: labeled points with an explicit distance matrix.
// Construction validates symmetry, zero diagonal and the triangle inequality.
class FiniteSpace {
 public:
  FiniteSpace(std::vector<std::string> labels, std::vector<std::vector<double>> metric);

  std::size_t size() const { return labels_.size(); }
  double distance(std::size_t i, std::size_t j) const { return metric_[i][j]; }
  const std::vector<std::string>& labels() const { return labels_; }
  // All off-diagonal distances equal; transport then reduces to total
  // variation times that distance.
  bool is_uniform() const { return uniform_distance_ > 0.0; }
  double uniform_distance() const { return uniform_distance_; }

  // k points with all pairwise distances equal to `dist`.
  static std::shared_ptr<const FiniteSpace> uniform(std::size_t k, double dist = 1.0);

 private:
  std::vector<std::string> labels_;
  std::vector<std::vector<double>> metric_;
  double uniform_distance_ = 0.0;
};

// Weighted point set, on R^d or on a FiniteSpace. Atoms are canonically sorted
// and merged on construction; weights are nonnegative and sum to one.
class DiscreteMeasure {
 public:
  static DiscreteMeasure on_rd(std::vector<Point> points, std::vector<double> weights);
  static DiscreteMeasure dirac(Point x) { return on_rd({std::move(x)}, {1.0}); }
  static DiscreteMeasure on_finite(std::shared_ptr<const FiniteSpace> space, std::vector<std::size_t> sites,
                                   std::vector<double> weights);

  bool is_finite_space() const { return space_ != nullptr; }
  const std::shared_ptr<const FiniteSpace>& space() const { return space_; }
  int dim() const { return dim_; }
  std::size_t size() const { return weights_.size(); }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<Point>& points() const { return points_; }
  const std::vector<std::size_t>& sites() const { return sites_; }

  bool same_space(const DiscreteMeasure& other) const;
  // Euclidean (R^d) or tabulated (finite space) distance between atom i of
  // *this and atom j of `other`; both must live on the same space.
  double ground_distance(std::size_t i, const DiscreteMeasure& other, std::size_t j) const;

  double mean_1d() const;  // R^1 only
  double abs_moment(double order) const;

 private:
  std::shared_ptr<const FiniteSpace> space_;  // null for R^d
  int dim_ = 0;
  std::vector<Point> points_;
  std::vector<std::size_t> sites_;
  std::vector<double> weights_;
};

// Nondegenerate (or flagged-degenerate PSD) Gaussian on R^d.
class GaussianMeasure {
 public:
  GaussianMeasure(Eigen::VectorXd mean, Eigen::MatrixXd covariance, bool allow_psd = false);

  int dim() const { return static_cast<int>(mean_.size()); }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& covariance() const { return cov_; }
  bool degenerate() const { return degenerate_; }

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd cov_;
  bool degenerate_ = false;
};

// Ordered draws together with the (seed, source) pair that regenerates them.
struct SampleTrajectory {
  std::vector<Point> draws;
  std::uint64_t seed = 0;
  std::string source;  // descriptor string, JSON

  std::size_t size() const { return draws.size(); }
};

// One-dimensional densities registered for sampling and closed-form moments.
struct Density1d {
  std::string name;  // "uniform", "normal", "exponential"
  double a = 0.0, b = 1.0;

  double quantile(double u) const;
  double cdf(double x) const;
  double abs_moment(double order) const;  // E|X|^order
  double mean() const;
};

// Sampling source: a Gaussian, a discrete measure, or a registered density.
class MeasureDescriptor {
 public:
  static MeasureDescriptor parse(const nlohmann::json& j);
  static MeasureDescriptor gaussian(GaussianMeasure g);
  static MeasureDescriptor discrete(DiscreteMeasure m);
  static MeasureDescriptor density1d(Density1d d);

  const std::optional<GaussianMeasure>& as_gaussian() const { return gauss_; }
  const std::optional<DiscreteMeasure>& as_discrete() const { return disc_; }
  const std::optional<Density1d>& as_density() const { return dens_; }
  int dim() const;
  std::string to_string() const;
  // E|X|^order (norm moment; exact for registered sources).
  double abs_moment(double order) const;

 private:
  std::optional<GaussianMeasure> gauss_;
  std::optional<DiscreteMeasure> disc_;
  std::optional<Density1d> dens_;
};

// i.i.d. sampling, deterministic given (seed, n).
SampleTrajectory sample_iid(const MeasureDescriptor& source, std::size_t n, std::uint64_t seed);

// Uniform weight 1/n on the first n draws, coincident atoms merged.
DiscreteMeasure empirical_measure(const SampleTrajectory& traj, std::size_t n);

// Plug-in fit: n = 1 gives the point mass at the first draw, otherwise the
// sample mean and the 1/n covariance (flagged degenerate when not PD).
using PluginFit = std::variant<DiscreteMeasure, GaussianMeasure>;
PluginFit gaussian_mle(const SampleTrajectory& traj, std::size_t n);

// View a plug-in fit as a (possibly zero-covariance) Gaussian.
GaussianMeasure plugin_as_gaussian(const PluginFit& fit);

// KL(q || p) for nondegenerate Gaussians.
double gaussian_kl(const GaussianMeasure& q, const GaussianMeasure& p);

}  // namespace wassrates
