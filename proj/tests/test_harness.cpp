#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "wassrates/harness.hpp"

using namespace wassrates;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path temp_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("wassrates_test_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

nlohmann::json small_empirical_config() {
  nlohmann::json j;
  j["kind"] = "empirical";
  j["source"] = {{"kind", "density1d"}, {"name", "uniform"}, {"a", 0.0}, {"b", 1.0}};
  j["p"] = 1.0;
  j["d"] = 1;
  j["delta"] = 1.0;
  j["n_max"] = 400;
  j["replicas"] = 3;
  j["seed"] = 11;
  j["statistic"] = "both";
  return j;
}

}  // namespace

TEST_CASE("config validation") {
  CHECK_THROWS_AS(ExperimentConfig::parse(nlohmann::json{{"kind", "nope"}}), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::parse(nlohmann::json::object()), ConfigError);

  nlohmann::json bad = small_empirical_config();
  bad["p"] = 0.4;  // violates p >= 1
  CHECK_THROWS_AS(ExperimentConfig::parse(bad).check_hypotheses(), HypothesisError);
  bad["p"] = 1.0;
  bad["d"] = 3;  // violates p > d/2
  try {
    ExperimentConfig::parse(bad).check_hypotheses();
    CHECK(false);
  } catch (const HypothesisError& e) {
    CHECK(std::string(e.what()).find("p > d/2") != std::string::npos);
  }
}

TEST_CASE("shortest round-trip formatting") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456.75, 0.0}) {
    const std::string s = format_double(v);
    CHECK(std::stod(s) == v);
  }
}

TEST_CASE("trajectory statistics: running sup is monotone and bounds hold") {
  const ExperimentConfig cfg = ExperimentConfig::parse(small_empirical_config());
  const TrajectoryReport rep = estimate_sup_statistic(cfg);
  REQUIRE(!rep.rows.empty());
  std::size_t replica = SIZE_MAX;
  double running = 0.0;
  for (const auto& row : rep.rows) {
    if (row.replica != replica) {
      replica = row.replica;
      running = 0.0;
    }
    CHECK(row.running_sup >= running - 1e-15);
    running = row.running_sup;
  }
  CHECK(rep.summary.sup_stat_mean > 0.0);
  CHECK(rep.summary.sup_stat_mean <= rep.summary.bound);
  CHECK(rep.summary.bound_kind == "C_p");

  // The summary statistic is recomputable from the rows.
  const ExperimentConfig cfg2 = ExperimentConfig::parse(small_empirical_config());
  double stat_sum = 0.0;
  std::size_t current = SIZE_MAX;
  double sup_pow = 0.0;
  for (const auto& row : rep.rows) {
    if (row.replica != current) {
      if (current != SIZE_MAX) stat_sum += sup_pow;
      current = row.replica;
      sup_pow = 0.0;
    }
    sup_pow = std::max(sup_pow, row.b_n * row.distance);  // p = 1
  }
  stat_sum += sup_pow;
  CHECK(rep.summary.sup_stat_mean ==
        doctest::Approx(stat_sum / cfg2.replicas).epsilon(1e-12));

  const TrajectoryReport lim = estimate_limsup_statistic(cfg);
  CHECK(lim.summary.violations == 0);
  CHECK(lim.summary.bound_kind == "Y_p");
}

TEST_CASE("doubling the replicas shrinks the standard error") {
  nlohmann::json j = small_empirical_config();
  j["replicas"] = 8;
  j["n_max"] = 200;
  const TrajectoryReport a = estimate_sup_statistic(ExperimentConfig::parse(j));
  j["replicas"] = 32;
  const TrajectoryReport b = estimate_sup_statistic(ExperimentConfig::parse(j));
  CHECK(b.summary.sup_stat_stderr < a.summary.sup_stat_stderr * 1.2);
}

TEST_CASE("experiment artifacts are byte-identical across reruns") {
  const fs::path dir1 = temp_dir("det1"), dir2 = temp_dir("det2");
  const fs::path cfg = temp_dir("cfg") / "c.json";
  {
    std::ofstream out(cfg);
    out << small_empirical_config().dump(2);
  }
  CHECK(run_experiment(cfg, dir1) == kExitOk);
  CHECK(run_experiment(cfg, dir2) == kExitOk);
  for (const char* name : {"trajectories.csv", "bounds.json", "summary.json"}) {
    CHECK(slurp(dir1 / name) == slurp(dir2 / name));
    CHECK(!slurp(dir1 / name).empty());
  }
  const std::string csv = slurp(dir1 / "trajectories.csv");
  CHECK(csv.rfind("replica,n,b_n,distance,running_sup\n", 0) == 0);
}

TEST_CASE("thread count does not change the artifacts") {
  const fs::path dir1 = temp_dir("th1"), dir2 = temp_dir("th2");
  const fs::path cfg = temp_dir("thcfg") / "c.json";
  {
    std::ofstream out(cfg);
    out << small_empirical_config().dump(2);
  }
  setenv("WASSRATES_THREADS", "1", 1);
  CHECK(run_experiment(cfg, dir1) == kExitOk);
  setenv("WASSRATES_THREADS", "3", 1);
  CHECK(run_experiment(cfg, dir2) == kExitOk);
  unsetenv("WASSRATES_THREADS");
  CHECK(slurp(dir1 / "trajectories.csv") == slurp(dir2 / "trajectories.csv"));
}

TEST_CASE("changing the seed changes the trajectories") {
  const fs::path dir1 = temp_dir("seed1"), dir2 = temp_dir("seed2");
  const fs::path cfgdir = temp_dir("cfgs");
  const fs::path cfg = cfgdir / "c.json";
  {
    std::ofstream out(cfg);
    out << small_empirical_config().dump(2);
  }
  CHECK(run_experiment(cfg, dir1) == kExitOk);
  nlohmann::json overrides;
  overrides["seed"] = 999;
  CHECK(run_experiment(cfg, dir2, overrides) == kExitOk);
  CHECK(slurp(dir1 / "trajectories.csv") != slurp(dir2 / "trajectories.csv"));
}

TEST_CASE("emitted bounds pass the ledger audit; perturbed ledgers fail") {
  const fs::path dir = temp_dir("audit");
  const fs::path cfg = dir / "c.json";
  {
    std::ofstream out(cfg);
    out << small_empirical_config().dump(2);
  }
  REQUIRE(run_experiment(cfg, dir) == kExitOk);
  std::string detail;
  CHECK(audit_file(dir / "bounds.json", &detail));

  nlohmann::json bounds;
  {
    std::ifstream in(dir / "bounds.json");
    in >> bounds;
  }
  CHECK(bounds[0]["sub_constants"]["k_pd"].get<double>() == 12.0);  // p = d = 1
  bounds[0]["sub_constants"]["k_pd"] = bounds[0]["sub_constants"]["k_pd"].get<double>() + 1e-3;
  const fs::path broken = dir / "broken.json";
  {
    std::ofstream out(broken);
    out << bounds.dump(2);
  }
  CHECK_FALSE(audit_file(broken, &detail));

  const fs::path garbage = dir / "garbage.json";
  {
    std::ofstream out(garbage);
    out << "{not json";
  }
  CHECK_FALSE(audit_file(garbage, &detail));
  CHECK(detail.find("malformed") != std::string::npos);
}

TEST_CASE("gaussian pipeline stays below its bounds at small scale") {
  nlohmann::json j;
  j["kind"] = "gaussian_plugin";
  j["source"] = {{"kind", "gaussian"},
                 {"mean", {0.0, 0.0}},
                 {"cov", {{1.0, 0.2}, {0.2, 0.5}}}};
  j["n_max"] = 500;
  j["replicas"] = 5;
  j["seed"] = 3;
  const ExperimentConfig cfg = ExperimentConfig::parse(j);
  const TrajectoryReport sup = estimate_sup_statistic(cfg);
  CHECK(sup.summary.sup_stat_mean <= sup.summary.bound);
  const TrajectoryReport lim = estimate_limsup_statistic(cfg);
  CHECK(lim.summary.violations == 0);
}

TEST_CASE("gaussian sup statistic below the uniform bound, d in {1,2}, 100 replicas") {
  for (int d : {1, 2}) {
    nlohmann::json j;
    j["kind"] = "gaussian_plugin";
    if (d == 1) {
      j["source"] = {{"kind", "gaussian"}, {"mean", {0.0}}, {"cov", {{1.0}}}};
    } else {
      j["source"] = {{"kind", "gaussian"},
                     {"mean", {0.0, 0.0}},
                     {"cov", {{1.0, 0.3}, {0.3, 0.8}}}};
    }
    j["n_max"] = 10000;
    j["replicas"] = 100;
    j["seed"] = 44 + d;
    const ExperimentConfig cfg = ExperimentConfig::parse(j);
    const TrajectoryReport sup = estimate_sup_statistic(cfg);
    CHECK(sup.summary.sup_stat_mean <= sup.summary.bound);
    CHECK(sup.summary.bound_kind == "C2_gauss");
  }
}

TEST_CASE("bayes experiment kinds run end to end") {
  const fs::path dir = temp_dir("bayes");
  nlohmann::json j;
  j["kind"] = "bayes_expfam";
  j["prior_mean"] = 0.0;
  j["prior_sd"] = 0.5;
  j["n_max"] = 500;
  j["replicas"] = 4;
  j["seed"] = 8;
  const fs::path cfg = dir / "c.json";
  {
    std::ofstream out(cfg);
    out << j.dump(2);
  }
  CHECK(run_experiment(cfg, dir) == kExitOk);
  const std::string csv = slurp(dir / "trajectories.csv");
  CHECK(csv.rfind("replica,n,b_n,distance,bound\n", 0) == 0);
  nlohmann::json summary;
  {
    std::ifstream in(dir / "summary.json");
    in >> summary;
  }
  CHECK(summary.at("fraction").get<double>() == 1.0);
}

TEST_CASE("invalid NIW prior is a named hypothesis failure") {
  nlohmann::json j;
  j["kind"] = "bayes_gauss";
  j["niw"] = {{"m0", {0.0}}, {"kappa", 1.0}, {"psi", {{1.0}}}, {"nu", 1.5}};
  j["n_max"] = 100;
  j["replicas"] = 2;
  const ExperimentConfig cfg = ExperimentConfig::parse(j);
  CHECK_THROWS_AS(cfg.check_hypotheses(), HypothesisError);
}

TEST_CASE("teicher experiment writes a ledger") {
  const fs::path dir = temp_dir("teicher");
  nlohmann::json j;
  j["kind"] = "teicher";
  j["law"] = "rademacher";
  j["r"] = 3.0;
  j["n_max"] = 1000;
  j["replicas"] = 20;
  j["seed"] = 5;
  const fs::path cfg = dir / "c.json";
  {
    std::ofstream out(cfg);
    out << j.dump(2);
  }
  CHECK(run_experiment(cfg, dir) == kExitOk);
  nlohmann::json summary;
  {
    std::ifstream in(dir / "summary.json");
    in >> summary;
  }
  CHECK(summary.at("respected").get<bool>());
}
