#include "wassrates/measures.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace wassrates {

namespace {

double sup_norm_gap(const Point& a, const Point& b) {
  double g = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) g = std::max(g, std::fabs(a[i] - b[i]));
  return g;
}

void check_weights(const std::vector<double>& w) {
  double total = 0.0;
  for (double x : w) {
    if (x < 0.0) throw std::invalid_argument("DiscreteMeasure: negative weight");
    total += x;
  }
  if (std::fabs(total - 1.0) > kWeightSumTol)
    throw std::invalid_argument("DiscreteMeasure: weights must sum to 1 within 1e-12");
}

}  // namespace

FiniteSpace::FiniteSpace(std::vector<std::string> labels, std::vector<std::vector<double>> metric)
    : labels_(std::move(labels)), metric_(std::move(metric)) {
  const std::size_t k = labels_.size();
  if (k == 0 || metric_.size() != k) throw std::invalid_argument("FiniteSpace: bad metric size");
  for (std::size_t i = 0; i < k; ++i) {
    if (metric_[i].size() != k) throw std::invalid_argument("FiniteSpace: metric not square");
    if (metric_[i][i] != 0.0) throw std::invalid_argument("FiniteSpace: nonzero diagonal");
    for (std::size_t j = 0; j < k; ++j) {
      if (metric_[i][j] < 0.0) throw std::invalid_argument("FiniteSpace: negative distance");
      if (std::fabs(metric_[i][j] - metric_[j][i]) > 1e-12)
        throw std::invalid_argument("FiniteSpace: metric not symmetric");
    }
  }
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j)
      for (std::size_t l = 0; l < k; ++l)
        if (metric_[i][j] > metric_[i][l] + metric_[l][j] + 1e-12)
          throw std::invalid_argument("FiniteSpace: triangle inequality violated");
  if (k > 1) {
    const double c = metric_[0][1];
    bool uniform = c > 0.0;
    for (std::size_t i = 0; i < k && uniform; ++i)
      for (std::size_t j = 0; j < k; ++j)
        if (i != j && metric_[i][j] != c) {
          uniform = false;
          break;
        }
    if (uniform) uniform_distance_ = c;
  }
}

std::shared_ptr<const FiniteSpace> FiniteSpace::uniform(std::size_t k, double dist) {
  std::vector<std::string> labels(k);
  std::vector<std::vector<double>> metric(k, std::vector<double>(k, dist));
  for (std::size_t i = 0; i < k; ++i) {
    labels[i] = "s" + std::to_string(i);
    metric[i][i] = 0.0;
  }
  return std::make_shared<const FiniteSpace>(std::move(labels), std::move(metric));
}

DiscreteMeasure DiscreteMeasure::on_rd(std::vector<Point> points, std::vector<double> weights) {
  if (points.empty() || points.size() != weights.size())
    throw std::invalid_argument("DiscreteMeasure: empty or mismatched atoms");
  const std::size_t d = points[0].size();
  for (const auto& p : points)
    if (p.size() != d) throw std::invalid_argument("DiscreteMeasure: mixed dimensions");
  check_weights(weights);

  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return points[a] < points[b]; });

  DiscreteMeasure m;
  m.dim_ = static_cast<int>(d);
  for (std::size_t idx : order) {
    if (!m.points_.empty() && sup_norm_gap(m.points_.back(), points[idx]) <= kAtomMergeTol) {
      m.weights_.back() += weights[idx];
    } else {
      m.points_.push_back(points[idx]);
      m.weights_.push_back(weights[idx]);
    }
  }
  return m;
}

DiscreteMeasure DiscreteMeasure::on_finite(std::shared_ptr<const FiniteSpace> space,
                                           std::vector<std::size_t> sites, std::vector<double> weights) {
  if (!space) throw std::invalid_argument("DiscreteMeasure: null space");
  if (sites.empty() || sites.size() != weights.size())
    throw std::invalid_argument("DiscreteMeasure: empty or mismatched atoms");
  for (std::size_t s : sites)
    if (s >= space->size()) throw std::invalid_argument("DiscreteMeasure: site out of range");
  check_weights(weights);

  std::vector<double> mass(space->size(), 0.0);
  for (std::size_t i = 0; i < sites.size(); ++i) mass[sites[i]] += weights[i];

  DiscreteMeasure m;
  m.space_ = std::move(space);
  for (std::size_t s = 0; s < mass.size(); ++s) {
    if (mass[s] > 0.0) {
      m.sites_.push_back(s);
      m.weights_.push_back(mass[s]);
    }
  }
  return m;
}

bool DiscreteMeasure::same_space(const DiscreteMeasure& other) const {
  if (is_finite_space() != other.is_finite_space()) return false;
  if (is_finite_space()) return space_ == other.space_;
  return dim_ == other.dim_;
}

double DiscreteMeasure::ground_distance(std::size_t i, const DiscreteMeasure& other, std::size_t j) const {
  if (is_finite_space()) return space_->distance(sites_[i], other.sites_[j]);
  double s = 0.0;
  for (int c = 0; c < dim_; ++c) {
    const double diff = points_[i][c] - other.points_[j][c];
    s += diff * diff;
  }
  return std::sqrt(s);
}

double DiscreteMeasure::mean_1d() const {
  if (is_finite_space() || dim_ != 1) throw std::logic_error("mean_1d: needs an R^1 measure");
  double s = 0.0;
  for (std::size_t i = 0; i < size(); ++i) s += weights_[i] * points_[i][0];
  return s;
}

double DiscreteMeasure::abs_moment(double order) const {
  if (is_finite_space()) throw std::logic_error("abs_moment: needs an R^d measure");
  double s = 0.0;
  for (std::size_t i = 0; i < size(); ++i) {
    double norm2 = 0.0;
    for (double c : points_[i]) norm2 += c * c;
    s += weights_[i] * std::pow(norm2, order / 2.0);
  }
  return s;
}

GaussianMeasure::GaussianMeasure(Eigen::VectorXd mean, Eigen::MatrixXd covariance, bool allow_psd)
    : mean_(std::move(mean)), cov_(std::move(covariance)) {
  if (cov_.rows() != cov_.cols() || cov_.rows() != mean_.size())
    throw std::invalid_argument("GaussianMeasure: shape mismatch");
  if ((cov_ - cov_.transpose()).cwiseAbs().maxCoeff() > 1e-10)
    throw std::invalid_argument("GaussianMeasure: covariance not symmetric within 1e-10");
  cov_ = 0.5 * (cov_ + cov_.transpose().eval());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov_, Eigen::EigenvaluesOnly);
  const double min_eig = es.eigenvalues().minCoeff();
  if (min_eig <= 0.0) {
    if (!allow_psd || min_eig < -1e-10)
      throw std::invalid_argument("GaussianMeasure: covariance not positive definite");
    degenerate_ = true;
  }
}

double Density1d::quantile(double u) const {
  if (name == "uniform") return a + (b - a) * u;
  if (name == "normal") return a + b * normal_quantile(u);  // a = mean, b = sd
  if (name == "exponential") return -std::log1p(-u) / a;    // a = rate
  throw std::invalid_argument("Density1d: unknown name " + name);
}

double Density1d::cdf(double x) const {
  if (name == "uniform") return std::clamp((x - a) / (b - a), 0.0, 1.0);
  if (name == "normal") return normal_cdf((x - a) / b);
  if (name == "exponential") return x <= 0.0 ? 0.0 : -std::expm1(-a * x);
  throw std::invalid_argument("Density1d: unknown name " + name);
}

double Density1d::mean() const {
  if (name == "uniform") return 0.5 * (a + b);
  if (name == "normal") return a;
  if (name == "exponential") return 1.0 / a;
  throw std::invalid_argument("Density1d: unknown name " + name);
}

double Density1d::abs_moment(double order) const {
  if (name == "uniform") {
    // (|b|^{r+1} sgn b - |a|^{r+1} sgn a) / ((r+1)(b-a))
    auto pw = [order](double x) { return std::pow(std::fabs(x), order + 1.0) * (x >= 0 ? 1.0 : -1.0); };
    return (pw(b) - pw(a)) / ((order + 1.0) * (b - a));
  }
  if (name == "normal") {
    if (a != 0.0) throw std::invalid_argument("Density1d::abs_moment: closed form needs zero mean");
    return std::pow(b, order) * std::pow(2.0, order / 2.0) * std::tgamma((order + 1.0) / 2.0) /
           std::sqrt(M_PI);
  }
  if (name == "exponential") return std::tgamma(order + 1.0) / std::pow(a, order);
  throw std::invalid_argument("Density1d: unknown name " + name);
}

MeasureDescriptor MeasureDescriptor::gaussian(GaussianMeasure g) {
  MeasureDescriptor d;
  d.gauss_ = std::move(g);
  return d;
}
MeasureDescriptor MeasureDescriptor::discrete(DiscreteMeasure m) {
  MeasureDescriptor d;
  d.disc_ = std::move(m);
  return d;
}
MeasureDescriptor MeasureDescriptor::density1d(Density1d dd) {
  MeasureDescriptor d;
  d.dens_ = std::move(dd);
  return d;
}

MeasureDescriptor MeasureDescriptor::parse(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "gaussian") {
    const auto mean = j.at("mean").get<std::vector<double>>();
    const auto cov = j.at("cov").get<std::vector<std::vector<double>>>();
    const int d = static_cast<int>(mean.size());
    Eigen::VectorXd m(d);
    Eigen::MatrixXd v(d, d);
    for (int i = 0; i < d; ++i) {
      m(i) = mean[i];
      for (int k = 0; k < d; ++k) v(i, k) = cov.at(i).at(k);
    }
    return gaussian(GaussianMeasure(m, v));
  }
  if (kind == "discrete") {
    std::vector<Point> pts;
    std::vector<double> ws;
    for (const auto& atom : j.at("atoms")) {
      pts.push_back(atom.at("point").get<std::vector<double>>());
      ws.push_back(atom.at("weight").get<double>());
    }
    return discrete(DiscreteMeasure::on_rd(std::move(pts), std::move(ws)));
  }
  if (kind == "density1d") {
    Density1d dd;
    dd.name = j.at("name").get<std::string>();
    if (dd.name == "uniform") {
      dd.a = j.value("a", 0.0);
      dd.b = j.value("b", 1.0);
    } else if (dd.name == "normal") {
      dd.a = j.value("mean", 0.0);
      dd.b = j.value("sd", 1.0);
    } else if (dd.name == "exponential") {
      dd.a = j.value("rate", 1.0);
    } else {
      throw std::invalid_argument("MeasureDescriptor: unknown density " + dd.name);
    }
    return density1d(dd);
  }
  throw std::invalid_argument("MeasureDescriptor: unknown kind " + kind);
}

int MeasureDescriptor::dim() const {
  if (gauss_) return gauss_->dim();
  if (disc_) return disc_->is_finite_space() ? 0 : disc_->dim();
  return 1;
}

std::string MeasureDescriptor::to_string() const {
  nlohmann::json j;
  if (gauss_) {
    j["kind"] = "gaussian";
    j["mean"] = std::vector<double>(gauss_->mean().data(), gauss_->mean().data() + gauss_->dim());
    std::vector<std::vector<double>> cov(gauss_->dim(), std::vector<double>(gauss_->dim()));
    for (int i = 0; i < gauss_->dim(); ++i)
      for (int k = 0; k < gauss_->dim(); ++k) cov[i][k] = gauss_->covariance()(i, k);
    j["cov"] = cov;
  } else if (disc_) {
    j["kind"] = "discrete";
    nlohmann::json atoms = nlohmann::json::array();
    for (std::size_t i = 0; i < disc_->size(); ++i) {
      nlohmann::json a;
      a["point"] = disc_->is_finite_space() ? nlohmann::json(disc_->sites()[i]) : nlohmann::json(disc_->points()[i]);
      a["weight"] = disc_->weights()[i];
      atoms.push_back(a);
    }
    j["atoms"] = atoms;
  } else {
    j["kind"] = "density1d";
    j["name"] = dens_->name;
    j["a"] = dens_->a;
    j["b"] = dens_->b;
  }
  return j.dump();
}

double MeasureDescriptor::abs_moment(double order) const {
  if (dens_) return dens_->abs_moment(order);
  if (disc_) return disc_->abs_moment(order);
  // Gaussian: exact only for centered isotropic cases; use the norm bound
  // E|X|^r <= 2^{r-1}(|m|^r + E|Z|^r) with Z ~ N(0,V). Callers needing exact
  // values supply them explicitly.
  throw std::logic_error("abs_moment: supply the moment explicitly for Gaussian sources");
}

SampleTrajectory sample_iid(const MeasureDescriptor& source, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample_iid: n must be >= 1");
  SampleTrajectory traj;
  traj.seed = seed;
  traj.source = source.to_string();
  traj.draws.reserve(n);
  CounterRng rng(seed);

  if (const auto& g = source.as_gaussian()) {
    const int d = g->dim();
    Eigen::LLT<Eigen::MatrixXd> llt(g->covariance());
    if (llt.info() != Eigen::Success)
      throw std::invalid_argument("sample_iid: covariance not positive definite");
    const Eigen::MatrixXd L = llt.matrixL();
    for (std::size_t i = 0; i < n; ++i) {
      Eigen::VectorXd z(d);
      for (int c = 0; c < d; ++c) z(c) = rng.next_normal();
      const Eigen::VectorXd x = g->mean() + L * z;
      traj.draws.emplace_back(x.data(), x.data() + d);
    }
    return traj;
  }
  if (const auto& m = source.as_discrete()) {
    if (m->is_finite_space())
      throw std::invalid_argument("sample_iid: finite-space sources are sampled by the bayes module");
    std::vector<double> cdf(m->size());
    double acc = 0.0;
    for (std::size_t i = 0; i < m->size(); ++i) {
      acc += m->weights()[i];
      cdf[i] = acc;
    }
    for (std::size_t i = 0; i < n; ++i) traj.draws.push_back(m->points()[rng.next_index(cdf)]);
    return traj;
  }
  const auto& d = source.as_density();
  for (std::size_t i = 0; i < n; ++i) traj.draws.push_back({d->quantile(rng.next_unit())});
  return traj;
}

DiscreteMeasure empirical_measure(const SampleTrajectory& traj, std::size_t n) {
  if (n < 1 || n > traj.size()) throw std::invalid_argument("empirical_measure: n out of range");
  std::vector<Point> pts(traj.draws.begin(), traj.draws.begin() + n);
  std::vector<double> ws(n, 1.0 / static_cast<double>(n));
  return DiscreteMeasure::on_rd(std::move(pts), std::move(ws));
}

PluginFit gaussian_mle(const SampleTrajectory& traj, std::size_t n) {
  if (n < 1 || n > traj.size()) throw std::invalid_argument("gaussian_mle: n out of range");
  const int d = static_cast<int>(traj.draws[0].size());
  if (n == 1) return DiscreteMeasure::dirac(traj.draws[0]);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (std::size_t i = 0; i < n; ++i)
    mean += Eigen::Map<const Eigen::VectorXd>(traj.draws[i].data(), d);
  mean /= static_cast<double>(n);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::VectorXd diff = Eigen::Map<const Eigen::VectorXd>(traj.draws[i].data(), d) - mean;
    cov += diff * diff.transpose();
  }
  cov /= static_cast<double>(n);
  return GaussianMeasure(mean, cov, /*allow_psd=*/true);
}

GaussianMeasure plugin_as_gaussian(const PluginFit& fit) {
  if (std::holds_alternative<GaussianMeasure>(fit)) return std::get<GaussianMeasure>(fit);
  const DiscreteMeasure& m = std::get<DiscreteMeasure>(fit);
  const int d = m.dim();
  Eigen::VectorXd mean(d);
  for (int c = 0; c < d; ++c) mean(c) = m.points()[0][c];
  return GaussianMeasure(mean, Eigen::MatrixXd::Zero(d, d), /*allow_psd=*/true);
}

double gaussian_kl(const GaussianMeasure& q, const GaussianMeasure& p) {
  if (q.dim() != p.dim()) throw std::invalid_argument("gaussian_kl: dimension mismatch");
  if (q.degenerate() || p.degenerate())
    throw std::domain_error("gaussian_kl: degenerate covariance");
  const int d = q.dim();
  Eigen::LLT<Eigen::MatrixXd> llt_p(p.covariance());
  if (llt_p.info() != Eigen::Success) throw std::domain_error("gaussian_kl: singular covariance");
  const Eigen::MatrixXd ratio = llt_p.solve(q.covariance());
  const Eigen::VectorXd dm = p.mean() - q.mean();
  double logdet_q = 0.0, logdet_p = 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt_q(q.covariance());
  if (llt_q.info() != Eigen::Success) throw std::domain_error("gaussian_kl: singular covariance");
  for (int i = 0; i < d; ++i) {
    logdet_q += 2.0 * std::log(Eigen::MatrixXd(llt_q.matrixL())(i, i));
    logdet_p += 2.0 * std::log(Eigen::MatrixXd(llt_p.matrixL())(i, i));
  }
  const double kl =
      0.5 * (ratio.trace() - d - (logdet_q - logdet_p) + dm.dot(llt_p.solve(dm)));
  return std::max(0.0, kl);
}

}  // namespace wassrates
