#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "wassrates/harness.hpp"

namespace {

using namespace wassrates;

int classify_and_report(const std::exception& e) {
  std::cerr << e.what() << "\n";
  if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
  if (dynamic_cast<const HypothesisError*>(&e)) return kExitHypothesis;
  return kExitNumeric;
}

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("invalid config: cannot read " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  return j;
}

int cmd_dist(const std::string& config) {
  const nlohmann::json j = load_json(config);
  const double p = j.value("p", 2.0);
  const MeasureDescriptor mu = MeasureDescriptor::parse(j.at("mu"));
  const MeasureDescriptor nu = MeasureDescriptor::parse(j.at("nu"));
  double dist;
  if (mu.as_gaussian() && nu.as_gaussian()) {
    if (p != 2.0) throw ConfigError("invalid config: the closed form is the order-2 distance");
    dist = gaussian_w2(*mu.as_gaussian(), *nu.as_gaussian());
  } else if (mu.as_discrete() && nu.as_discrete()) {
    dist = wasserstein_exact(*mu.as_discrete(), *nu.as_discrete(), p).distance;
  } else {
    throw ConfigError("invalid config: dist needs two discrete or two gaussian measures");
  }
  nlohmann::json out;
  out["p"] = p;
  out["distance"] = dist;
  std::cout << out.dump(2) << "\n";
  return kExitOk;
}

int cmd_bounds(const std::string& config, const std::string& out_dir) {
  const nlohmann::json j = load_json(config);
  nlohmann::json reports = nlohmann::json::array();
  for (const auto& entry : j.at("bounds")) {
    const std::string which = entry.at("which").get<std::string>();
    BoundReport rep;
    if (which == "cp") {
      const double p = entry.at("p").get<double>();
      const int d = entry.at("d").get<int>();
      const double delta = entry.at("delta").get<double>();
      const double r = entry.contains("r") ? entry.at("r").get<double>()
                                          : empirical_rate_window(p, d, delta).r;
      rep = cp_nonparametric(p, d, delta, r, entry.at("moment").get<double>());
    } else if (which == "yp") {
      rep = yp_nonparametric(entry.at("p").get<double>(), entry.at("d").get<int>(),
                             entry.at("delta").get<double>(), entry.at("moment").get<double>());
    } else if (which == "c2_gauss" || which == "y2_gauss") {
      const auto cov = entry.at("cov").get<std::vector<std::vector<double>>>();
      const int d = static_cast<int>(cov.size());
      Eigen::MatrixXd v(d, d);
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) v(a, b) = cov.at(a).at(b);
      const double eps_max = std::pow(2.0 * (d + 1.0), -static_cast<double>(d));
      const double eps = entry.value("eps", eps_max);
      rep = which == "c2_gauss" ? c2_gauss(v, eps) : y2_gauss(v, eps);
    } else {
      throw ConfigError("invalid config: unknown bound " + which);
    }
    reports.push_back(rep.to_json());
  }
  std::filesystem::create_directories(out_dir);
  const auto file = std::filesystem::path(out_dir) / "bounds.json";
  std::ofstream out(file, std::ios::binary);
  out << reports.dump(2) << "\n";
  std::cout << "wrote " << file.string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wassrates: transport distances, explicit uniform-rate constants, and seeded experiments"};
  app.require_subcommand(1);

  std::string config, out_dir = "out", report;
  std::uint64_t seed = 0;
  std::size_t replicas = 0, nmax = 0;
  bool seed_set = false;

  auto add_common = [&](CLI::App* sub, bool with_runtime) {
    sub->add_option("--config", config, "JSON config file")->required();
    if (with_runtime) {
      sub->add_option("--out-dir", out_dir, "output directory");
      sub->add_option("--seed", seed, "master seed override")->each([&](const std::string&) {
        seed_set = true;
      });
      sub->add_option("--replicas", replicas, "replica count override");
      sub->add_option("--nmax", nmax, "trajectory length override");
    }
  };

  CLI::App* dist = app.add_subcommand("dist", "distance between two measures");
  add_common(dist, false);
  CLI::App* bounds = app.add_subcommand("bounds", "compute bound reports with ledgers");
  add_common(bounds, false);
  bounds->add_option("--out-dir", out_dir, "output directory");
  CLI::App* simulate = app.add_subcommand("simulate", "trajectory statistics for the i.i.d. models");
  add_common(simulate, true);
  CLI::App* bayes = app.add_subcommand("bayes", "exchangeable-sequence experiments");
  add_common(bayes, true);
  CLI::App* audit = app.add_subcommand("audit", "replay a bound report ledger");
  audit->add_option("report", report, "bound report JSON file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (dist->parsed()) return cmd_dist(config);
    if (bounds->parsed()) return cmd_bounds(config, out_dir);
    if (simulate->parsed() || bayes->parsed()) {
      nlohmann::json overrides;
      if (seed_set) overrides["seed"] = seed;
      if (replicas > 0) overrides["replicas"] = replicas;
      if (nmax > 0) overrides["n_max"] = nmax;
      return run_experiment(config, out_dir, overrides);
    }
    if (audit->parsed()) {
      std::string detail;
      const bool ok = audit_file(report, &detail);
      std::cout << (ok ? "pass: " : "fail: ") << detail << "\n";
      return ok ? kExitOk : kExitNumeric;
    }
  } catch (const std::exception& e) {
    return classify_and_report(e);
  }
  return kExitOk;
}
