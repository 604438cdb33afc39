#pragma once

#include <functional>
#include <tuple>
#include <vector>

#include "wassrates/measures.hpp"

namespace wassrates {

// Sparse transport plan between two discrete measures. Row sums match the row
// measure's weights and column sums the column measure's, each within 1e-9.
struct CouplingPlan {
  DiscreteMeasure row;
  DiscreteMeasure col;
  std::vector<std::tuple<std::size_t, std::size_t, double>> entries;

  std::vector<std::vector<double>> dense() const;
  void validate(double tol = 1e-9) const;
};

struct ExactTransport {
  double distance = 0.0;
  CouplingPlan plan;
};

// Minimum-cost transportation by network simplex on the dense bipartite
// polytope; cost(i, j) is arbitrary nonnegative.
struct TransportSolution {
  double cost = 0.0;
  std::vector<std::tuple<std::size_t, std::size_t, double>> flows;
};
TransportSolution solve_transport(const std::vector<double>& supply, const std::vector<double>& demand,
                                  const std::function<double(std::size_t, std::size_t)>& cost);

// Exact p-Wasserstein between discrete measures on a shared space.
ExactTransport wasserstein_exact(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p);

// One-dimensional fast path via the quantile (monotone) coupling.
double wasserstein_1d(const std::vector<double>& xs, const std::vector<double>& xw,
                      const std::vector<double>& ys, const std::vector<double>& yw, double p);
double wasserstein_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p);

// 1-D distance between a registered density and a sorted n-sample empirical
// measure, by integrating the quantile gap.
double wasserstein_1d_vs_density(const Density1d& density, const std::vector<double>& sorted_sample,
                                 double p);

// Closed-form W2 between Gaussians; covariances may be PSD.
double gaussian_w2(const GaussianMeasure& a, const GaussianMeasure& b);

// Dyadic-partition upper bound machinery. The returned `value` plus
// `remainder` dominates the exact distance to the p-th power; `remainder`
// accounts for the levels and annuli beyond the grid.
struct DyadicGrid {
  int s_max = 8;   // outermost annulus index retained exactly
  int l_max = 24;  // finest partition level retained exactly
  // Grid sizing from a Markov tail on a (2p+delta)-moment and a geometric
  // decay rate for the level sum.
  static DyadicGrid for_tolerance(double p, int d, double beta, double moment, double lambda,
                                  double tol);
};

struct DyadicBound {
  double value = 0.0;
  double remainder = 0.0;
  int s_used = 0;

  double total() const { return value + remainder; }
};

DyadicBound dyadic_upper_bound(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p,
                               const DyadicGrid& grid);

// Finitely supported distribution over discrete measures sharing one space.
class MetaMeasure {
 public:
  MetaMeasure(std::vector<DiscreteMeasure> atoms, std::vector<double> weights);

  std::size_t size() const { return weights_.size(); }
  const DiscreteMeasure& atom(std::size_t i) const { return atoms_[i]; }
  const std::vector<double>& weights() const { return weights_; }

  static MetaMeasure dirac(DiscreteMeasure m) { return MetaMeasure({std::move(m)}, {1.0}); }

 private:
  std::vector<DiscreteMeasure> atoms_;
  std::vector<double> weights_;
};

// Wasserstein distance between measures-on-measures: the outer order-p
// transport whose ground metric is the inner exact order-p distance.
double nested_distance(const MetaMeasure& A, const MetaMeasure& B, double p);

}  // namespace wassrates
