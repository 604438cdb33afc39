#include "wassrates/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <thread>

namespace wassrates {

ExperimentConfig ExperimentConfig::parse(const nlohmann::json& j) {
  ExperimentConfig cfg;
  cfg.raw = j;
  try {
    cfg.kind = j.at("kind").get<std::string>();
    cfg.n_max = j.value("n_max", std::size_t{10000});
    cfg.replicas = j.value("replicas", std::size_t{10});
    cfg.seed = j.value("seed", std::uint64_t{0});
    cfg.statistic = j.value("statistic", std::string("both"));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  if (cfg.kind != "empirical" && cfg.kind != "gaussian_plugin" && cfg.kind != "teicher" && cfg.kind != "bayes_np" &&
      cfg.kind != "bayes_gauss" && cfg.kind != "bayes_expfam")
    throw ConfigError("invalid config: unknown kind " + cfg.kind);
  if (cfg.n_max < 1 || cfg.replicas < 1) throw ConfigError("invalid config: n_max and replicas must be >= 1");
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("invalid config: cannot read " + file.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  return parse(j);
}

namespace {

MeasureDescriptor config_source(const nlohmann::json& raw) {
  try {
    return MeasureDescriptor::parse(raw.at("source"));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
}

double config_moment(const ExperimentConfig& cfg, double order) {
  if (cfg.raw.contains("moment")) return cfg.raw.at("moment").get<double>();
  return config_source(cfg.raw).abs_moment(order);
}

}  // namespace

void ExperimentConfig::check_hypotheses() const {
  if (kind == "empirical") {
    const double p = raw.value("p", 1.0);
    const int d = raw.value("d", 1);
    const double delta = raw.value("delta", 1.0);
    if (!(p >= 1.0)) throw HypothesisError("hypothesis violated: p >= 1");
    if (!(p > d / 2.0)) throw HypothesisError("hypothesis violated: p > d/2");
    if (!(delta > 0.0)) throw HypothesisError("hypothesis violated: delta > 0");
    if (d != 1) throw ConfigError("invalid config: the empirical-measure experiment is wired for d = 1");
  } else if (kind == "gaussian_plugin") {
    const MeasureDescriptor src = config_source(raw);
    if (!src.as_gaussian()) throw ConfigError("invalid config: the gaussian_plugin kind needs a gaussian source");
    const int d = src.as_gaussian()->dim();
    const double eps_max = std::pow(2.0 * (d + 1.0), -static_cast<double>(d));
    const double eps = raw.value("eps", eps_max);
    if (!(eps > 0.0 && eps <= eps_max))
      throw HypothesisError("hypothesis violated: 0 < eps <= (2(d+1))^{-d}");
  } else if (kind == "bayes_gauss") {
    NiwParams prior;
    const auto& nj = raw.at("niw");
    const auto m0 = nj.at("m0").get<std::vector<double>>();
    prior.m0 = Eigen::Map<const Eigen::VectorXd>(m0.data(), m0.size());
    prior.kappa = nj.at("kappa").get<double>();
    const auto psi = nj.at("psi").get<std::vector<std::vector<double>>>();
    prior.psi.resize(m0.size(), m0.size());
    for (std::size_t i = 0; i < m0.size(); ++i)
      for (std::size_t j2 = 0; j2 < m0.size(); ++j2) prior.psi(i, j2) = psi.at(i).at(j2);
    prior.nu = nj.at("nu").get<double>();
    try {
      prior.validate();
    } catch (const std::invalid_argument& e) {
      throw HypothesisError(std::string("hypothesis violated: ") + e.what());
    }
  }
}

namespace {

// Distances of one replica trajectory on the evaluation grid.
std::vector<std::pair<std::size_t, double>> replica_distances(const ExperimentConfig& cfg,
                                                              std::size_t replica) {
  const std::vector<std::size_t> grid = evaluation_grid(cfg.n_max);
  std::vector<std::pair<std::size_t, double>> out;
  out.reserve(grid.size());
  const MeasureDescriptor src = config_source(cfg.raw);
  const std::uint64_t rep_seed = derive_seed(cfg.seed, replica);

  if (cfg.kind == "empirical") {
    const double p = cfg.raw.value("p", 1.0);
    const SampleTrajectory traj = sample_iid(src, cfg.n_max, rep_seed);
    std::vector<double> prefix;
    prefix.reserve(cfg.n_max);
    if (src.as_density()) {
      for (std::size_t n : grid) {
        prefix.resize(n);
        for (std::size_t i = 0; i < n; ++i) prefix[i] = traj.draws[i][0];
        std::sort(prefix.begin(), prefix.end());
        out.emplace_back(n, wasserstein_1d_vs_density(*src.as_density(), prefix, p));
      }
    } else if (src.as_discrete()) {
      const DiscreteMeasure& base = *src.as_discrete();
      std::vector<double> xs(base.size());
      for (std::size_t i = 0; i < base.size(); ++i) xs[i] = base.points()[i][0];
      for (std::size_t n : grid) {
        std::vector<double> emp(n);
        for (std::size_t i = 0; i < n; ++i) emp[i] = traj.draws[i][0];
        std::vector<double> ew(n, 1.0 / static_cast<double>(n));
        out.emplace_back(n, wasserstein_1d(xs, base.weights(), emp, ew, p));
      }
    } else {
      throw ConfigError("invalid config: the empirical kind needs a 1-D density or discrete source");
    }
    return out;
  }
  if (cfg.kind == "gaussian_plugin") {
    const GaussianMeasure& target = *src.as_gaussian();
    const SampleTrajectory traj = sample_iid(src, cfg.n_max, rep_seed);
    for (std::size_t n : grid) {
      const GaussianMeasure fit = plugin_as_gaussian(gaussian_mle(traj, n));
      out.emplace_back(n, gaussian_w2(target, fit));
    }
    return out;
  }
  throw ConfigError("invalid config: trajectory statistics support the empirical and gaussian_plugin kinds");
}

RateSchedule config_schedule(const ExperimentConfig& cfg) {
  if (cfg.kind == "empirical")
    return RateSchedule{cfg.raw.value("p", 1.0), RateSchedule::Kind::nonparametric};
  return RateSchedule{2.0, RateSchedule::Kind::parametric};
}

std::vector<BoundReport> config_bounds(const ExperimentConfig& cfg) {
  std::vector<BoundReport> bounds;
  if (cfg.kind == "empirical") {
    const double p = cfg.raw.value("p", 1.0);
    const int d = cfg.raw.value("d", 1);
    const double delta = cfg.raw.value("delta", 1.0);
    const double moment = config_moment(cfg, 2.0 * p + delta);
    const EmpiricalRateWindow params = empirical_rate_window(p, d, delta);
    bounds.push_back(cp_nonparametric(p, d, delta, params.r, moment));
    bounds.push_back(yp_nonparametric(p, d, delta, moment));
  } else if (cfg.kind == "gaussian_plugin") {
    const MeasureDescriptor src = config_source(cfg.raw);
    const int d = src.as_gaussian()->dim();
    const double eps_max = std::pow(2.0 * (d + 1.0), -static_cast<double>(d));
    const double eps = cfg.raw.value("eps", eps_max);
    bounds.push_back(c2_gauss(src.as_gaussian()->covariance(), eps));
    bounds.push_back(y2_gauss(src.as_gaussian()->covariance(), eps));
  }
  return bounds;
}

TrajectoryReport trajectory_statistic(const ExperimentConfig& cfg, bool limsup) {
  cfg.check_hypotheses();
  const RateSchedule sched = config_schedule(cfg);
  const double p = sched.p;
  std::vector<BoundReport> bounds = config_bounds(cfg);

  std::vector<std::vector<std::pair<std::size_t, double>>> per_replica(cfg.replicas);
  try {
    parallel_replicas(cfg.replicas,
                      [&](std::size_t r) { per_replica[r] = replica_distances(cfg, r); });
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw NumericError(std::string("numeric failure in trajectory evaluation: ") + e.what());
  }

  TrajectoryReport rep;
  rep.bounds = bounds;
  rep.summary.statistic = limsup ? "limsup" : "sup";
  rep.summary.replicas = cfg.replicas;
  rep.summary.n_max = cfg.n_max;
  const BoundReport& active = limsup ? bounds.at(1) : bounds.at(0);
  rep.summary.bound = active.value;
  rep.summary.bound_kind = active.kind;

  double stat_sum = 0.0, stat_sq = 0.0;
  for (std::size_t r = 0; r < cfg.replicas; ++r) {
    double running = 0.0, sup_pow = 0.0, tail_max = 0.0;
    for (const auto& [n, dist] : per_replica[r]) {
      const double bn = rate_b(n, sched);
      running = std::max(running, bn * dist);
      sup_pow = std::max(sup_pow, std::pow(bn * dist, p));
      if (n >= cfg.n_max / 2) tail_max = std::max(tail_max, bn * dist);
      rep.rows.push_back({r, n, bn, dist, running});
    }
    stat_sum += sup_pow;
    stat_sq += sup_pow * sup_pow;
    rep.summary.tail_max_worst = std::max(rep.summary.tail_max_worst, tail_max);
    if (limsup && tail_max > rep.summary.bound) rep.summary.violations++;
  }
  rep.summary.sup_stat_mean = stat_sum / static_cast<double>(cfg.replicas);
  const double var =
      std::max(0.0, stat_sq / cfg.replicas - rep.summary.sup_stat_mean * rep.summary.sup_stat_mean);
  rep.summary.sup_stat_stderr = std::sqrt(var / static_cast<double>(cfg.replicas));
  if (!limsup && rep.summary.sup_stat_mean > rep.summary.bound) rep.summary.violations = 1;
  return rep;
}

}  // namespace

TrajectoryReport estimate_sup_statistic(const ExperimentConfig& cfg) {
  return trajectory_statistic(cfg, false);
}

TrajectoryReport estimate_limsup_statistic(const ExperimentConfig& cfg) {
  return trajectory_statistic(cfg, true);
}

nlohmann::json TrajectorySummary::to_json() const {
  nlohmann::json j;
  j["statistic"] = statistic;
  j["sup_stat_mean"] = sup_stat_mean;
  j["sup_stat_stderr"] = sup_stat_stderr;
  j["tail_max_worst"] = tail_max_worst;
  j["violations"] = violations;
  j["bound"] = bound;
  j["bound_kind"] = bound_kind;
  j["replicas"] = replicas;
  j["n_max"] = n_max;
  j["note"] = "suprema over the evaluation grid; truncation keeps checks one-sided";
  return j;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_trajectory_csv(const std::filesystem::path& file, const std::vector<TrajectoryRow>& rows) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw NumericError("cannot write " + file.string());
  out << "replica,n,b_n,distance,running_sup\n";
  for (const auto& r : rows)
    out << r.replica << ',' << r.n << ',' << format_double(r.b_n) << ',' << format_double(r.distance)
        << ',' << format_double(r.running_sup) << '\n';
}

void write_bayes_csv(const std::filesystem::path& file, const std::vector<BayesTrajRow>& rows) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw NumericError("cannot write " + file.string());
  out << "replica,n,b_n,distance,bound\n";
  for (const auto& r : rows)
    out << r.replica << ',' << r.n << ',' << format_double(r.b_n) << ',' << format_double(r.distance)
        << ',' << format_double(r.bound) << '\n';
}

namespace {

void write_text(const std::filesystem::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw NumericError("cannot write " + file.string());
  out << text;
}

int run_parsed(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  nlohmann::json summary;
  summary["kind"] = cfg.kind;
  summary["seed"] = cfg.seed;
  summary["replicas"] = cfg.replicas;
  summary["n_max"] = cfg.n_max;

  if (cfg.kind == "empirical" || cfg.kind == "gaussian_plugin") {
    nlohmann::json bounds_json = nlohmann::json::array();
    std::vector<TrajectoryRow> rows;
    if (cfg.statistic == "sup" || cfg.statistic == "both") {
      const TrajectoryReport rep = estimate_sup_statistic(cfg);
      summary["sup"] = rep.summary.to_json();
      rows = rep.rows;
      for (const auto& b : rep.bounds) bounds_json.push_back(b.to_json());
    }
    if (cfg.statistic == "limsup" || cfg.statistic == "both") {
      const TrajectoryReport rep = estimate_limsup_statistic(cfg);
      summary["limsup"] = rep.summary.to_json();
      if (rows.empty()) rows = rep.rows;
      if (bounds_json.empty())
        for (const auto& b : rep.bounds) bounds_json.push_back(b.to_json());
    }
    write_trajectory_csv(out_dir / "trajectories.csv", rows);
    write_text(out_dir / "bounds.json", bounds_json.dump(2) + "\n");
  } else if (cfg.kind == "teicher") {
    const std::string law = cfg.raw.value("law", std::string("rademacher"));
    const double r = cfg.raw.value("r", 3.0);
    TeicherMcReport mc;
    try {
      mc = verify_teicher_mc(law, r, cfg.n_max, cfg.replicas, cfg.seed);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("invalid config: ") + e.what());
    }
    summary["empirical_mean"] = mc.empirical_mean;
    summary["mc_stderr"] = mc.mc_stderr;
    summary["bound"] = mc.bound;
    summary["respected"] = mc.respected;
    const TeicherConstants tc = teicher_constants(r);
    nlohmann::json bounds_json = nlohmann::json::array();
    nlohmann::json tj;
    tj["kind"] = "teicher_constants";
    tj["value"] = tc.alpha0;
    tj["inputs"] = {{"r", r}};
    tj["sub_constants"] = tc.ledger;
    bounds_json.push_back(tj);
    write_text(out_dir / "bounds.json", bounds_json.dump(2) + "\n");
    write_text(out_dir / "trajectories.csv", "replica,n,b_n,distance,running_sup\n");
  } else {
    cfg.check_hypotheses();
    BayesRateReport rep;
    try {
      if (cfg.kind == "bayes_np") {
        rep = bayes_rate_nonparametric(cfg.raw.at("support_points").get<std::vector<double>>(),
                                       cfg.raw.at("alpha").get<std::vector<double>>(),
                                       cfg.raw.value("p", 1.0), cfg.raw.value("delta", 1.0), cfg.n_max,
                                       cfg.replicas, cfg.seed);
      } else if (cfg.kind == "bayes_gauss") {
        const auto& nj = cfg.raw.at("niw");
        NiwParams prior;
        const auto m0 = nj.at("m0").get<std::vector<double>>();
        prior.m0 = Eigen::Map<const Eigen::VectorXd>(m0.data(), m0.size());
        prior.kappa = nj.at("kappa").get<double>();
        const auto psi = nj.at("psi").get<std::vector<std::vector<double>>>();
        prior.psi.resize(m0.size(), m0.size());
        for (std::size_t i = 0; i < m0.size(); ++i)
          for (std::size_t j2 = 0; j2 < m0.size(); ++j2) prior.psi(i, j2) = psi.at(i).at(j2);
        prior.nu = nj.at("nu").get<double>();
        const double eps_max = std::pow(2.0 * (m0.size() + 1.0), -static_cast<double>(m0.size()));
        rep = bayes_rate_gaussian(prior, cfg.raw.value("eps", eps_max), cfg.n_max, cfg.replicas,
                                  cfg.seed);
      } else {
        rep = bayes_rate_expfam_location(cfg.raw.value("prior_mean", 0.0),
                                         cfg.raw.value("prior_sd", 1.0), cfg.n_max, cfg.replicas,
                                         cfg.seed);
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("invalid config: ") + e.what());
    }
    summary["respected"] = rep.respected;
    summary["fraction"] = rep.fraction;
    write_bayes_csv(out_dir / "trajectories.csv", rep.rows);
    write_text(out_dir / "bounds.json", "[]\n");
  }

  write_text(out_dir / "summary.json", summary.dump(2) + "\n");
  return kExitOk;
}

}  // namespace

int run_experiment(const std::filesystem::path& config_file, const std::filesystem::path& out_dir,
                   const nlohmann::json& overrides) {
  nlohmann::json j;
  {
    std::ifstream in(config_file);
    if (!in) throw ConfigError("invalid config: cannot read " + config_file.string());
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("invalid config: ") + e.what());
    }
  }
  for (auto it = overrides.begin(); it != overrides.end(); ++it) j[it.key()] = it.value();
  const ExperimentConfig cfg = ExperimentConfig::parse(j);
  cfg.check_hypotheses();
  return run_parsed(cfg, out_dir);
}

bool audit_file(const std::filesystem::path& report_file, std::string* detail) {
  std::ifstream in(report_file);
  if (!in) {
    if (detail) *detail = "cannot read " + report_file.string();
    return false;
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    if (detail) *detail = std::string("malformed ledger: ") + e.what();
    return false;
  }
  const nlohmann::json arr = j.is_array() ? j : nlohmann::json::array({j});
  for (const auto& item : arr) {
    BoundReport rep;
    try {
      rep = BoundReport::from_json(item);
    } catch (const nlohmann::json::exception& e) {
      if (detail) *detail = std::string("malformed ledger: ") + e.what();
      return false;
    }
    if (rep.kind == "teicher_constants") {
      // Replayed through the nested ledger of any bound that embeds it.
      continue;
    }
    if (!audit_pass(rep)) {
      if (detail) *detail = "replay mismatch for kind " + rep.kind;
      return false;
    }
  }
  if (detail) *detail = "all ledgers replay";
  return true;
}

}  // namespace wassrates
