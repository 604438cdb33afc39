#include "wassrates/bayes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "wassrates/expfam.hpp"
#include "wassrates/quadrature.hpp"

namespace wassrates {

void DirichletFiniteModel::validate() const {
  if (!space || alpha.size() != space->size())
    throw std::invalid_argument("DirichletFiniteModel: alpha size mismatch");
  for (double a : alpha)
    if (!(a > 0.0)) throw std::invalid_argument("DirichletFiniteModel: concentrations must be positive");
}

std::vector<double> PosteriorState::posterior_alpha() const {
  std::vector<double> a(model.alpha);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += static_cast<double>(counts[i]);
  return a;
}

DiscreteMeasure PosteriorState::mean_measure() const {
  if (point_mass) return *point_mass;
  std::vector<double> a = posterior_alpha();
  const double total = std::accumulate(a.begin(), a.end(), 0.0);
  std::vector<std::size_t> sites(a.size());
  std::iota(sites.begin(), sites.end(), 0);
  for (double& x : a) x /= total;
  return DiscreteMeasure::on_finite(model.space, sites, a);
}

DirichletDraw definetti_sample(const DirichletFiniteModel& prior, std::size_t n, std::uint64_t seed) {
  prior.validate();
  CounterRng rng(seed);
  const std::vector<double> weights = rng.next_dirichlet(prior.alpha);
  std::vector<double> cdf(weights.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    cdf[i] = acc;
  }
  DirichletDraw out;
  std::vector<std::size_t> sites(weights.size());
  std::iota(sites.begin(), sites.end(), 0);
  out.latent = DiscreteMeasure::on_finite(prior.space, sites, weights);
  out.observations.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.observations.push_back(rng.next_index(cdf));
  return out;
}

void NiwParams::validate() const {
  const int d = static_cast<int>(m0.size());
  if (psi.rows() != d || psi.cols() != d) throw std::invalid_argument("NiwParams: shape mismatch");
  if (!(kappa > 0.0)) throw std::invalid_argument("NiwParams: kappa must be positive");
  if (!(nu > d + 1))
    throw std::invalid_argument(
        "NiwParams: prior violates the moment hypothesis rho[||V||_F] < infinity (need nu > d+1)");
  Eigen::LLT<Eigen::MatrixXd> llt(psi);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("NiwParams: scale matrix not PD");
}

GaussianLatentDraw definetti_sample_niw(const NiwParams& prior, std::size_t n, std::uint64_t seed) {
  prior.validate();
  const int d = static_cast<int>(prior.m0.size());
  CounterRng rng(seed);
  // Bartlett factor of a Wishart(psi^{-1}, nu) draw; the latent covariance is
  // its inverse.
  const Eigen::MatrixXd psi_inv = prior.psi.llt().solve(Eigen::MatrixXd::Identity(d, d));
  const Eigen::MatrixXd l = Eigen::LLT<Eigen::MatrixXd>(psi_inv).matrixL();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    a(i, i) = std::sqrt(2.0 * rng.next_gamma((prior.nu - i) / 2.0));
    for (int j = 0; j < i; ++j) a(i, j) = rng.next_normal();
  }
  const Eigen::MatrixXd la = l * a;
  const Eigen::MatrixXd wishart = la * la.transpose();
  const Eigen::MatrixXd v = wishart.llt().solve(Eigen::MatrixXd::Identity(d, d));
  const Eigen::MatrixXd v_sym = 0.5 * (v + v.transpose());
  const Eigen::MatrixXd lv = Eigen::LLT<Eigen::MatrixXd>((v_sym / prior.kappa).eval()).matrixL();
  Eigen::VectorXd z(d);
  for (int i = 0; i < d; ++i) z(i) = rng.next_normal();
  const Eigen::VectorXd mean = prior.m0 + lv * z;

  GaussianLatentDraw out{GaussianMeasure(mean, v_sym), SampleTrajectory{}};
  out.traj = sample_iid(MeasureDescriptor::gaussian(out.latent), n, derive_seed(seed, 0x0b5e5ULL));
  return out;
}

PosteriorState posterior_update(const DirichletFiniteModel& model,
                                const std::vector<std::size_t>& observations) {
  model.validate();
  PosteriorState post;
  post.model = model;
  post.counts.assign(model.alpha.size(), 0);
  for (std::size_t s : observations) {
    if (s >= model.alpha.size()) throw std::invalid_argument("posterior_update: observation out of space");
    post.counts[s]++;
  }
  post.n = static_cast<long>(observations.size());
  return post;
}

PosteriorState point_mass_posterior(DiscreteMeasure p0) {
  if (!p0.is_finite_space()) throw std::invalid_argument("point_mass_posterior: needs a finite-space measure");
  PosteriorState post;
  post.model.space = p0.space();
  post.model.alpha.assign(p0.space()->size(), 1.0);
  post.counts.assign(p0.space()->size(), 0);
  post.point_mass = std::move(p0);
  return post;
}

namespace {

// Exact W_p^p between mass vectors on a finite space.
double finite_wp_pow(const FiniteSpace& space, const std::vector<double>& pm,
                     const std::vector<double>& qm, double p) {
  const std::size_t k = space.size();
  if (k == 2) {
    const double d = space.distance(0, 1);
    return std::fabs(pm[0] - qm[0]) * std::pow(d, p);
  }
  if (space.is_uniform()) {
    // Uniform metric: every moved unit costs the same, so the optimum moves
    // exactly the total-variation mass.
    double tv = 0.0;
    for (std::size_t j = 0; j < k; ++j) tv += std::fabs(pm[j] - qm[j]);
    return 0.5 * tv * std::pow(space.uniform_distance(), p);
  }
  auto cost = [&](std::size_t i, std::size_t j) { return std::pow(space.distance(i, j), p); };
  return solve_transport(pm, qm, cost).cost;
}

std::vector<double> full_mass_vector(const DiscreteMeasure& m) {
  std::vector<double> mass(m.space()->size(), 0.0);
  for (std::size_t i = 0; i < m.size(); ++i) mass[m.sites()[i]] = m.weights()[i];
  return mass;
}

// Integral of g against a Beta(a0, a1) density; the endpoint pieces use the
// power substitution x = s t^{1/a}, which removes the integrable singularity.
double beta_expectation(double a0, double a1, const std::function<double(double)>& g,
                        std::vector<double> splits, double tol) {
  const double log_b = std::lgamma(a0) + std::lgamma(a1) - std::lgamma(a0 + a1);
  const double norm = std::exp(-log_b);
  splits.push_back(0.25);
  splits.push_back(0.75);
  std::sort(splits.begin(), splits.end());
  splits.erase(std::remove_if(splits.begin(), splits.end(),
                              [](double s) { return !(s > 0.0 && s < 1.0); }),
               splits.end());
  const double s_lo = splits.front(), s_hi = splits.back();

  double total = 0.0;
  // [0, s_lo]
  total += std::pow(s_lo, a0) / a0 *
           adaptive_simpson(
               [&](double t) {
                 const double x = s_lo * std::pow(t, 1.0 / a0);
                 return g(x) * std::pow(1.0 - x, a1 - 1.0);
               },
               0.0, 1.0, tol);
  // [s_hi, 1]
  total += std::pow(1.0 - s_hi, a1) / a1 *
           adaptive_simpson(
               [&](double t) {
                 const double x = 1.0 - (1.0 - s_hi) * std::pow(t, 1.0 / a1);
                 return g(x) * std::pow(x, a0 - 1.0);
               },
               0.0, 1.0, tol);
  // interior pieces
  for (std::size_t i = 0; i + 1 < splits.size(); ++i)
    total += adaptive_simpson(
        [&](double x) { return g(x) * std::pow(x, a0 - 1.0) * std::pow(1.0 - x, a1 - 1.0); },
        splits[i], splits[i + 1], tol);
  return total * norm;
}

struct Expectation {
  double value = 0.0;
  double mc_sigma = 0.0;
};

// Posterior expectation of a functional of the latent measure. Callers that
// know where the integrand kinks pass split hints per layer.
Expectation posterior_expectation(const PosteriorState& post,
                                  const std::function<double(const std::vector<double>&)>& f,
                                  const DistanceMethod& method, std::vector<double> splits_u = {},
                                  std::function<std::vector<double>(double)> splits_v = nullptr) {
  Expectation out;
  if (post.point_mass) {
    out.value = f(full_mass_vector(*post.point_mass));
    return out;
  }
  const std::vector<double> a = post.posterior_alpha();
  const std::size_t k = a.size();

  if (method.kind == DistanceMethod::Kind::quadrature && k == 2) {
    out.value = beta_expectation(
        a[0], a[1], [&](double x) { return f({x, 1.0 - x}); }, std::move(splits_u), 1e-11);
    return out;
  }
  if (method.kind == DistanceMethod::Kind::quadrature && k == 3) {
    // Stick-breaking factorization: P = (U, (1-U)V, (1-U)(1-V)) with
    // independent U ~ Beta(a1, a2+a3) and V ~ Beta(a2, a3); both layers use
    // the endpoint-substituted Beta quadrature.
    out.value = beta_expectation(
        a[0], a[1] + a[2],
        [&](double u) {
          return beta_expectation(
              a[1], a[2],
              [&](double v) { return f({u, (1.0 - u) * v, (1.0 - u) * (1.0 - v)}); },
              splits_v ? splits_v(u) : std::vector<double>{}, 1e-10);
        },
        std::move(splits_u), 1e-9);
    return out;
  }
  // Monte Carlo fallback for k > 3.
  CounterRng rng(derive_seed(method.seed, 0xba1e5ULL));
  const std::size_t n = method.mc_samples;
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = f(rng.next_dirichlet(a));
    sum += v;
    sum_sq += v * v;
  }
  out.value = sum / static_cast<double>(n);
  const double var = std::max(0.0, sum_sq / n - out.value * out.value);
  out.mc_sigma = std::sqrt(var / static_cast<double>(n));
  if (out.mc_sigma > method.mc_tol)
    throw std::runtime_error("posterior_expectation: MC sigma above requested tolerance");
  return out;
}

}  // namespace

PosteriorDistance posterior_plugin_distance(const PosteriorState& post, const DiscreteMeasure& plugin,
                                            double p, const DistanceMethod& method) {
  if (!plugin.is_finite_space() || plugin.space() != post.model.space)
    throw std::invalid_argument("posterior_plugin_distance: plugin on a different space");
  const std::vector<double> qm = full_mass_vector(plugin);
  const FiniteSpace& space = *post.model.space;
  // The transport cost is piecewise linear in the latent masses; its kink
  // locations in the stick-breaking coordinates are known.
  std::vector<double> splits_u;
  std::function<std::vector<double>(double)> splits_v;
  if (space.size() == 2) splits_u.push_back(qm[0]);
  if (space.size() == 3) {
    splits_u.push_back(qm[0]);
    splits_v = [qm](double u) {
      std::vector<double> s;
      if (1.0 - u > 1e-12) {
        s.push_back(qm[1] / (1.0 - u));
        s.push_back(1.0 - qm[2] / (1.0 - u));
      }
      return s;
    };
  }
  const Expectation e = posterior_expectation(
      post, [&](const std::vector<double>& pm) { return finite_wp_pow(space, pm, qm, p); }, method,
      splits_u, splits_v);
  PosteriorDistance out;
  out.value = std::pow(std::max(0.0, e.value), 1.0 / p);
  if (e.mc_sigma > 0.0 && e.value > 0.0)
    out.mc_sigma = e.mc_sigma * std::pow(e.value, 1.0 / p - 1.0) / p;
  else
    out.mc_sigma = e.mc_sigma;
  return out;
}

namespace {

void enumerate_compositions(int k, int m, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
  if (static_cast<int>(cur.size()) == k - 1) {
    int used = 0;
    for (int c : cur) used += c;
    cur.push_back(m - used);
    out.push_back(cur);
    cur.pop_back();
    return;
  }
  int used = 0;
  for (int c : cur) used += c;
  for (int c = 0; c <= m - used; ++c) {
    cur.push_back(c);
    enumerate_compositions(k, m, cur, out);
    cur.pop_back();
  }
}

std::vector<std::vector<int>> compositions(int k, int m) {
  // C(m+k-1, k-1) compositions; guard the support size.
  double count = 1.0;
  for (int i = 1; i <= k - 1; ++i) count *= static_cast<double>(m + i) / i;
  if (count > 10000.0) throw std::invalid_argument("predictive law: support too large");
  std::vector<std::vector<int>> out;
  std::vector<int> cur;
  enumerate_compositions(k, m, cur, out);
  return out;
}

}  // namespace

MetaMeasure PredictiveLaw::as_meta() const {
  std::vector<DiscreteMeasure> atoms;
  std::vector<double> w;
  for (std::size_t i = 0; i < compositions.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    atoms.push_back(composition_measure(i));
    w.push_back(probs[i]);
  }
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& x : w) x /= total;
  return MetaMeasure(std::move(atoms), std::move(w));
}

DiscreteMeasure PredictiveLaw::composition_measure(std::size_t idx) const {
  std::vector<std::size_t> sites;
  std::vector<double> w;
  for (std::size_t j = 0; j < compositions[idx].size(); ++j) {
    if (compositions[idx][j] > 0) {
      sites.push_back(j);
      w.push_back(static_cast<double>(compositions[idx][j]) / m);
    }
  }
  return DiscreteMeasure::on_finite(space, sites, w);
}

PredictiveLaw predictive_exact(const PosteriorState& post, int m) {
  if (m < 1) throw std::invalid_argument("predictive_exact: m must be >= 1");
  if (post.point_mass) return bootstrap_predictive(*post.point_mass, m);
  const std::vector<double> a = post.posterior_alpha();
  const int k = static_cast<int>(a.size());
  const double a_sum = std::accumulate(a.begin(), a.end(), 0.0);

  PredictiveLaw law;
  law.space = post.model.space;
  law.m = m;
  law.compositions = compositions(k, m);
  law.probs.reserve(law.compositions.size());
  const double log_m_fact = std::lgamma(m + 1.0);
  for (const auto& c : law.compositions) {
    double logp = log_m_fact + std::lgamma(a_sum) - std::lgamma(a_sum + m);
    for (int j = 0; j < k; ++j)
      logp += std::lgamma(a[j] + c[j]) - std::lgamma(a[j]) - std::lgamma(c[j] + 1.0);
    law.probs.push_back(std::exp(logp));
  }
  return law;
}

PredictiveLaw bootstrap_predictive(const DiscreteMeasure& plugin, int m) {
  if (m < 1) throw std::invalid_argument("bootstrap_predictive: m must be >= 1");
  if (!plugin.is_finite_space())
    throw std::invalid_argument("bootstrap_predictive: needs a finite-space measure");
  const std::vector<double> q = full_mass_vector(plugin);
  const int k = static_cast<int>(q.size());

  PredictiveLaw law;
  law.space = plugin.space();
  law.m = m;
  law.compositions = compositions(k, m);
  law.probs.reserve(law.compositions.size());
  const double log_m_fact = std::lgamma(m + 1.0);
  for (const auto& c : law.compositions) {
    double logp = log_m_fact;
    bool zero = false;
    for (int j = 0; j < k; ++j) {
      if (c[j] == 0) continue;
      if (q[j] <= 0.0) {
        zero = true;
        break;
      }
      logp += c[j] * std::log(q[j]) - std::lgamma(c[j] + 1.0);
    }
    law.probs.push_back(zero ? 0.0 : std::exp(logp));
  }
  return law;
}

PredictiveLaw mixture_predictive(const std::vector<DiscreteMeasure>& components,
                                 const std::vector<double>& weights, int m) {
  if (components.empty() || components.size() != weights.size())
    throw std::invalid_argument("mixture_predictive: mismatched mixture");
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw std::invalid_argument("mixture_predictive: negative weight");
    total += w;
  }
  if (std::fabs(total - 1.0) > kWeightSumTol)
    throw std::invalid_argument("mixture_predictive: weights must sum to 1");
  for (std::size_t j = 1; j < components.size(); ++j)
    if (!components[0].same_space(components[j]))
      throw std::invalid_argument("mixture_predictive: components on different spaces");
  PredictiveLaw law = bootstrap_predictive(components[0], m);
  for (double& p : law.probs) p *= weights[0];
  for (std::size_t j = 1; j < components.size(); ++j) {
    const PredictiveLaw lj = bootstrap_predictive(components[j], m);
    for (std::size_t i = 0; i < law.probs.size(); ++i) law.probs[i] += weights[j] * lj.probs[i];
  }
  return law;
}

InequalityCheck check_savare1(const PosteriorState& post, const DiscreteMeasure& plugin, int m, double p,
                              const DistanceMethod& method) {
  InequalityCheck out;
  const PredictiveLaw qm = predictive_exact(post, m);
  const PredictiveLaw boot = bootstrap_predictive(plugin, m);
  out.lhs = nested_distance(qm.as_meta(), boot.as_meta(), p);
  const PosteriorDistance rhs = posterior_plugin_distance(post, plugin, p, method);
  out.rhs = rhs.value;
  out.slack_allowance = 1e-7 + 3.0 * rhs.mc_sigma;
  out.holds = out.lhs <= out.rhs + out.slack_allowance;
  return out;
}

InequalityCheck kr_functional_bound(const PosteriorState& post, const DiscreteMeasure& plugin,
                                    const std::function<double(const DiscreteMeasure&)>& g, double lip_g,
                                    const DistanceMethod& method) {
  InequalityCheck out;
  const FiniteSpace& space = *post.model.space;
  auto g_mass = [&](const std::vector<double>& pm) {
    std::vector<std::size_t> sites;
    std::vector<double> w;
    for (std::size_t s = 0; s < pm.size(); ++s)
      if (pm[s] > 0.0) {
        sites.push_back(s);
        w.push_back(pm[s]);
      }
    double total = std::accumulate(w.begin(), w.end(), 0.0);
    for (double& x : w) x /= total;
    return g(DiscreteMeasure::on_finite(post.model.space, sites, w));
  };
  const Expectation e = posterior_expectation(post, g_mass, method);
  (void)space;
  out.lhs = std::fabs(e.value - g(plugin));
  const PosteriorDistance dist = posterior_plugin_distance(post, plugin, 1.0, method);
  out.rhs = lip_g * dist.value;
  out.slack_allowance = 1e-7 + 3.0 * (e.mc_sigma + lip_g * dist.mc_sigma);
  out.holds = out.lhs <= out.rhs + out.slack_allowance;
  return out;
}

// ---------------------------------------------------------------------------
// Trajectory experiments under a random latent measure
// ---------------------------------------------------------------------------

namespace {

struct TailChecker {
  std::size_t n_max;
  std::vector<std::size_t> grid;

  explicit TailChecker(std::size_t n) : n_max(n), grid(evaluation_grid(n)) {}
  bool in_tail(std::size_t n) const { return n >= n_max / 2; }
};

}  // namespace

BayesRateReport bayes_rate_nonparametric(const std::vector<double>& support_points,
                                         const std::vector<double>& alpha, double p, double delta,
                                         std::size_t n_max, std::size_t replicas, std::uint64_t seed) {
  if (support_points.empty() || support_points.size() != alpha.size())
    throw std::invalid_argument("bayes_rate_nonparametric: mismatched prior");
  BayesRateReport rep;
  rep.replicas = replicas;
  const TailChecker tc(n_max);
  const RateSchedule sched{p, RateSchedule::Kind::nonparametric};

  for (std::size_t r = 0; r < replicas; ++r) {
    CounterRng rng(derive_seed(seed, r));
    const std::vector<double> w = rng.next_dirichlet(alpha);
    double moment = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i)
      moment += w[i] * std::pow(std::fabs(support_points[i]), 2.0 * p + delta);
    const double bound = yp_nonparametric(p, 1, delta, moment).value;

    std::vector<double> cdf(w.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      acc += w[i];
      cdf[i] = acc;
    }
    std::vector<double> draws(n_max);
    for (std::size_t i = 0; i < n_max; ++i) draws[i] = support_points[rng.next_index(cdf)];

    const std::vector<double> lat_w = w;
    double tail_max = 0.0;
    for (std::size_t n : tc.grid) {
      std::vector<double> emp(draws.begin(), draws.begin() + n);
      std::vector<double> emp_w(n, 1.0 / static_cast<double>(n));
      const double dist = wasserstein_1d(support_points, lat_w, emp, emp_w, p);
      const double bn = rate_b(n, sched);
      if (tc.in_tail(n)) tail_max = std::max(tail_max, bn * dist);
      rep.rows.push_back({r, n, bn, dist, bound});
    }
    if (tail_max <= bound) rep.respected++;
  }
  rep.fraction = static_cast<double>(rep.respected) / static_cast<double>(replicas);
  return rep;
}

BayesRateReport bayes_rate_gaussian(const NiwParams& prior, double eps, std::size_t n_max,
                                    std::size_t replicas, std::uint64_t seed) {
  prior.validate();
  BayesRateReport rep;
  rep.replicas = replicas;
  const TailChecker tc(n_max);
  const RateSchedule sched{2.0, RateSchedule::Kind::parametric};

  for (std::size_t r = 0; r < replicas; ++r) {
    const GaussianLatentDraw draw = definetti_sample_niw(prior, n_max, derive_seed(seed, r));
    const double bound = y2_gauss(draw.latent.covariance(), eps).value;
    double tail_max = 0.0;
    for (std::size_t n : tc.grid) {
      const GaussianMeasure fit = plugin_as_gaussian(gaussian_mle(draw.traj, n));
      const double dist = gaussian_w2(draw.latent, fit);
      const double bn = rate_b(n, sched);
      if (tc.in_tail(n)) tail_max = std::max(tail_max, bn * dist);
      rep.rows.push_back({r, n, bn, dist, bound});
    }
    if (tail_max <= bound) rep.respected++;
  }
  rep.fraction = static_cast<double>(rep.respected) / static_cast<double>(replicas);
  return rep;
}

BayesRateReport bayes_rate_expfam_location(double prior_mean, double prior_sd, std::size_t n_max,
                                           std::size_t replicas, std::uint64_t seed) {
  BayesRateReport rep;
  rep.replicas = replicas;
  const TailChecker tc(n_max);
  const RateSchedule sched{2.0, RateSchedule::Kind::parametric};
  const auto fam = make_gaussian_location();
  ParamVec theta0(1);
  theta0(0) = prior_mean;
  const double bound = y2_expfam(*fam, theta0, 2.0).value;  // location-invariant

  for (std::size_t r = 0; r < replicas; ++r) {
    CounterRng rng(derive_seed(seed, r));
    const double theta = prior_mean + prior_sd * rng.next_normal();
    double s = 0.0;
    double tail_max = 0.0;
    std::size_t gi = 0;
    for (std::size_t n = 1; n <= n_max; ++n) {
      s += theta + rng.next_normal();
      if (gi < tc.grid.size() && tc.grid[gi] == n) {
        const double dist = std::fabs(s / static_cast<double>(n) - theta);
        const double bn = rate_b(n, sched);
        if (tc.in_tail(n)) tail_max = std::max(tail_max, bn * dist);
        rep.rows.push_back({r, n, bn, dist, bound});
        ++gi;
      }
    }
    if (tail_max <= bound) rep.respected++;
  }
  rep.fraction = static_cast<double>(rep.respected) / static_cast<double>(replicas);
  return rep;
}

}  // namespace wassrates
