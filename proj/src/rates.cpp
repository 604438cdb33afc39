#include "wassrates/rates.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <stdexcept>

#include "wassrates/parallel.hpp"

namespace wassrates {

double rate_b(std::size_t n, const RateSchedule& sched) {
  if (n < 1) throw std::invalid_argument("rate_b: n must be >= 1");
  const double x = static_cast<double>(n);
  return std::pow(x / log2_fn(x), sched.exponent());
}

std::vector<std::size_t> evaluation_grid(std::size_t n_max) {
  std::vector<std::size_t> grid;
  double x = 1.0;
  while (true) {
    const std::size_t n = static_cast<std::size_t>(std::ceil(x));
    if (n > n_max) break;
    if (grid.empty() || grid.back() != n) grid.push_back(n);
    x *= 1.1;
  }
  auto insert_sorted = [&](std::size_t n) {
    auto it = std::lower_bound(grid.begin(), grid.end(), n);
    if (it == grid.end() || *it != n) grid.insert(it, n);
  };
  insert_sorted(std::max<std::size_t>(1, n_max / 2));
  insert_sorted(n_max);
  return grid;
}

nlohmann::json BoundReport::to_json() const {
  nlohmann::json j;
  j["kind"] = kind;
  j["value"] = value;
  j["inputs"] = inputs;
  j["sub_constants"] = sub_constants;
  return j;
}

BoundReport BoundReport::from_json(const nlohmann::json& j) {
  BoundReport r;
  r.kind = j.at("kind").get<std::string>();
  r.value = j.at("value").get<double>();
  r.inputs = j.at("inputs");
  r.sub_constants = j.at("sub_constants");
  return r;
}

// ---------------------------------------------------------------------------
// Dominated-ergodic constants
// ---------------------------------------------------------------------------

namespace {

// lambda(2,1) = 1, lambda(q,0) = 2^{q-2}, lambda(q+1,h) = 2^{q-1} lambda(q,h-1).
std::vector<std::vector<double>> lambda_table(int qmax) {
  std::vector<std::vector<double>> lam(qmax + 1);
  lam[2] = {1.0, 1.0};  // lambda(2,0) = 2^0, lambda(2,1) = 1
  for (int q = 3; q <= qmax; ++q) {
    lam[q].assign(q + 1, 0.0);
    lam[q][0] = std::pow(2.0, q - 2);
    for (int h = 1; h <= q; ++h)
      if (h - 1 < static_cast<int>(lam[q - 1].size())) lam[q][h] = std::pow(2.0, q - 2) * lam[q - 1][h - 1];
  }
  return lam;
}

// K(h) = sum_n n^{-(r-h)/r} (n Log2 n)^{-h/2}, a certified upper bound. The
// excess target is absolute except for orders so close to 2 that the series
// barely converges, where it degrades to a relative certificate.
SeriesBound k_series(double r, double h) {
  const double a = (r - h) / r + h / 2.0;
  const double b = h / 2.0;
  const SeriesBound s = sum_poly_loglog_series(a, b);
  if (s.excess_bound > std::max(1e-10, 1e-9 * s.value))
    throw std::runtime_error("k_series: tail bound too loose");
  return s;
}

// Blocks n_j = floor(e^j). Exact below 2^53, log-space bracket above.
double log_nj_lower(int j) {
  if (j <= 36) return std::log(std::floor(std::exp(static_cast<double>(j))));
  return static_cast<double>(j) + std::log1p(-std::exp(-static_cast<double>(std::min(j, 700))));
}

double log2_of_nj_upper(int j) {
  // n_j <= e^j, Log2 is nondecreasing.
  if (j <= 2) return 1.0;  // n_1 = 2, n_2 = 7 are below e^e
  return std::log(static_cast<double>(j));
}

double gamma_r_sup(double r) {
  // sup over blocks of sqrt(Log2(n_{k+1}) / n_{k+1}) n_{k+1}^{1/r}; scanned
  // until the summand is certifiably decreasing in the block size.
  const double expo = 2.0 / r - 1.0;  // negative
  double best_sq = 0.0;
  for (int j = 1; j <= 3000000; ++j) {
    double phi_sq;
    if (j <= 36) {
      const double n = std::floor(std::exp(static_cast<double>(j)));
      phi_sq = log2_fn(n) * std::pow(n, expo);
    } else {
      phi_sq = log2_of_nj_upper(j) * std::exp(expo * log_nj_lower(j));
    }
    best_sq = std::max(best_sq, phi_sq);
    const double lnn = log_nj_lower(j);
    if (lnn > std::exp(1.0) && (1.0 - 2.0 / r) * lnn * std::log(lnn) > 1.0) break;
    if (j == 3000000) throw std::runtime_error("gamma_r_sup: scan did not terminate");
  }
  return std::sqrt(best_sq);
}

double alpha_inf(double*) {
  // inf over blocks of sqrt(n_k Log2(n_k) / (n_{k+1} Log2(n_{k+1}))). The
  // scanned range covers the infimum: for k >= 8 the ratio exceeds 0.34,
  // above the minimum attained at k = 1.
  double best = std::numeric_limits<double>::infinity();
  double prev_n = 1.0;  // n_0 = 1
  for (int j = 1; j <= 36; ++j) {
    const double n = std::floor(std::exp(static_cast<double>(j)));
    const double ratio = (prev_n * log2_fn(std::max(prev_n, 1.0))) / (n * log2_fn(n));
    best = std::min(best, std::sqrt(ratio));
    prev_n = n;
  }
  if (!(best < 0.589)) throw std::runtime_error("alpha_inf: scanned minimum above analytic tail bound");
  return best;
}

// sum_k exp(-2 Log2(n_{k+1})), certified upper bound.
double log2_block_series() {
  double total = 0.0;
  const int J = 64;
  for (int j = 1; j <= J; ++j) {
    if (j <= 2) {
      total += std::exp(-2.0);
    } else {
      const double lnn = log_nj_lower(j);
      total += 1.0 / (lnn * lnn);
    }
  }
  total += inverse_square_tail(J + 1) * (1.0 + 1e-12);
  return total;
}

double assemble_beta1(double r, const nlohmann::json& kvals, const nlohmann::json& lam) {
  auto K = [&](double h) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", h);
    return kvals.at(buf).get<double>();
  };
  auto L = [&](int q, int h) { return lam.at(std::to_string(q) + "," + std::to_string(h)).get<double>(); };
  const bool integral = std::floor(r) == r;
  if (integral) {
    const int ri = static_cast<int>(r);
    double s = 0.0;
    for (int k = 0; k <= ri - 1; ++k) s += L(ri, k) * K(ri - k) * std::pow(K(1), k);
    return s;
  }
  const int fr = static_cast<int>(std::floor(r));
  double tail = 0.0;
  for (int k = 0; k <= fr - 2; ++k) tail += L(fr, k) * K(fr - k) * std::pow(K(1), k);
  return std::pow(2.0, fr - 1) *
         (K(r) + L(fr, fr - 1) * K(r - fr) * std::pow(K(1), fr) + K(r - fr) * tail);
}

double assemble_beta0(const nlohmann::json& led) {
  const double r = led.at("r").get<double>();
  const double u0 = led.at("u0").get<double>();
  const double g = led.at("gamma_r").get<double>();
  const double a = led.at("alpha_inf").get<double>();
  const double s = led.at("block_log2_series").get<double>();
  const double gam_r = led.at("gamma_function_r").get<double>();
  return std::pow(u0, r) +
         4.0 * r * std::pow(g, -r) * s * std::pow((4.0 * g * g + 1.0) / (2.0 * a), r) * gam_r;
}

TeicherConstants teicher_from_ledger(nlohmann::json led) {
  TeicherConstants tc;
  tc.r = led.at("r").get<double>();
  const double beta0 = assemble_beta0(led);
  const double beta1 = assemble_beta1(tc.r, led.at("K"), led.at("lambda"));
  led["beta0"] = beta0;
  led["beta1"] = beta1;
  const double symfac = led.at("symmetrization_factor").get<double>();
  tc.alpha0 = std::pow(2.0, tc.r - 1.0) * beta0 * symfac;
  tc.alpha1 = std::pow(2.0, tc.r - 1.0) * beta1 * symfac;
  led["alpha0"] = tc.alpha0;
  led["alpha1"] = tc.alpha1;
  tc.ledger = std::move(led);
  return tc;
}

}  // namespace

TeicherConstants teicher_constants(double r) {
  if (!(r > 2.0) || !(r <= 16.0)) throw std::invalid_argument("teicher_constants: need 2 < r <= 16");
  static std::map<double, TeicherConstants> cache;
  static std::mutex mu;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(r);
    if (it != cache.end()) return it->second;
  }

  nlohmann::json led;
  led["r"] = r;
  led["ceil_r"] = std::ceil(r);

  // K(h) for every h the assembly needs, keyed by h.
  std::vector<double> hs;
  const bool integral = std::floor(r) == r;
  const int fr = static_cast<int>(std::floor(r));
  if (integral) {
    for (int k = 0; k <= fr - 1; ++k) hs.push_back(r - k);
  } else {
    hs.push_back(r);
    hs.push_back(r - fr);
    for (int k = 0; k <= fr - 2; ++k) hs.push_back(fr - k);
  }
  hs.push_back(1.0);
  nlohmann::json kvals, kexcess;
  for (double h : hs) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", h);
    if (!kvals.contains(buf)) {
      const SeriesBound s = k_series(r, h);
      kvals[buf] = s.value;
      kexcess[buf] = s.excess_bound;
    }
  }
  led["K"] = kvals;
  led["K_excess"] = kexcess;

  const auto lam = lambda_table(std::max(4, fr + 1));
  nlohmann::json lamj;
  for (int q = 2; q < static_cast<int>(lam.size()); ++q)
    for (int h = 0; h < static_cast<int>(lam[q].size()); ++h)
      lamj[std::to_string(q) + "," + std::to_string(h)] = lam[q][h];
  led["lambda"] = lamj;

  const double g = gamma_r_sup(r);
  const double a = alpha_inf(nullptr);
  led["gamma_r"] = g;
  led["alpha_inf"] = a;
  led["block_log2_series"] = log2_block_series();
  led["gamma_function_r"] = std::tgamma(r);

  // Smallest 1e-3 grid point with alpha * gamma * u0 strictly above 4g^2 + 1.
  double u0 = (std::floor(((4.0 * g * g + 1.0) / (a * g)) / 1e-3) + 1.0) * 1e-3;
  while (!(a * g * u0 > 4.0 * g * g + 1.0)) u0 += 1e-3;
  led["u0"] = u0;

  // Centered, non-symmetric laws enter through the symmetrization argument:
  // comparing with an independent copy doubles the variance and costs 2^r on
  // the r-th moment, giving the common factor 2^{r(1+ceil r)/2} below.
  led["symmetrization_factor"] = std::pow(2.0, r * (1.0 + std::ceil(r)) / 2.0);

  TeicherConstants tc = teicher_from_ledger(std::move(led));
  std::lock_guard<std::mutex> lock(mu);
  cache[r] = tc;
  return tc;
}

double teicher_bound(const TeicherConstants& tc, double sigma2, double abs_moment_r) {
  if (sigma2 == 0.0) return 0.0;
  const double sig_r = std::pow(sigma2, tc.r / 2.0);
  return sig_r * (tc.alpha0 + tc.alpha1 * std::pow(abs_moment_r / sig_r, std::ceil(tc.r)));
}

CenteredLaw centered_law(const std::string& name) {
  if (name != "rademacher" && name != "normal" && name != "uniform" && name != "point_mass")
    throw std::invalid_argument("centered_law: unknown law " + name);
  return CenteredLaw{name};
}

double CenteredLaw::sample(CounterRng& rng) const {
  if (name == "rademacher") return rng.next_u64() & 1 ? 1.0 : -1.0;
  if (name == "normal") return rng.next_normal();
  if (name == "uniform") return 2.0 * rng.next_unit() - 1.0;
  return 0.0;
}

double CenteredLaw::sigma2() const {
  if (name == "rademacher") return 1.0;
  if (name == "normal") return 1.0;
  if (name == "uniform") return 1.0 / 3.0;
  return 0.0;
}

double CenteredLaw::abs_moment(double r) const {
  if (name == "rademacher") return 1.0;
  if (name == "normal") return std::pow(2.0, r / 2.0) * std::tgamma((r + 1.0) / 2.0) / std::sqrt(M_PI);
  if (name == "uniform") return 1.0 / (r + 1.0);
  return 0.0;
}

TeicherMcReport verify_teicher_mc(const std::string& law_name, double r, std::size_t n_max,
                                  std::size_t replicas, std::uint64_t seed) {
  const CenteredLaw law = centered_law(law_name);
  TeicherMcReport rep;
  rep.replicas = replicas;
  if (law.sigma2() > 0.0) {
    const TeicherConstants tc = teicher_constants(r);
    rep.bound = teicher_bound(tc, law.sigma2(), law.abs_moment(r));
  }
  std::vector<double> sups(replicas);
  parallel_replicas(replicas, [&](std::size_t rep_i) {
    CounterRng rng(derive_seed(seed, rep_i));
    double s = 0.0, sup = 0.0;
    for (std::size_t n = 1; n <= n_max; ++n) {
      s += law.sample(rng);
      const double x = static_cast<double>(n);
      const double val = std::pow(std::fabs(s), r) / std::pow(x * log2_fn(x), r / 2.0);
      sup = std::max(sup, val);
    }
    sups[rep_i] = sup;
  });
  double sum = 0.0, sum_sq = 0.0;
  for (double sup : sups) {
    sum += sup;
    sum_sq += sup * sup;
  }
  rep.empirical_mean = sum / static_cast<double>(replicas);
  const double var = std::max(0.0, sum_sq / replicas - rep.empirical_mean * rep.empirical_mean);
  rep.mc_stderr = std::sqrt(var / static_cast<double>(replicas));
  rep.respected = rep.empirical_mean <= rep.bound;
  return rep;
}

// ---------------------------------------------------------------------------
// Nonparametric empirical bounds
// ---------------------------------------------------------------------------

EmpiricalRateWindow empirical_rate_window(double p, int d, double delta, std::optional<double> r_opt) {
  if (!(p >= 1.0)) throw std::invalid_argument("empirical_rate_window: p must be >= 1");
  if (!(p > d / 2.0)) throw std::invalid_argument("empirical_rate_window: hypothesis p > d/2 fails");
  if (!(delta > 0.0)) throw std::invalid_argument("empirical_rate_window: delta must be positive");
  EmpiricalRateWindow out;
  out.M = std::max(2.0 - p / d, 1.0 + 1.0 / (2.0 + delta / p));
  out.r_hi = 3.0 / out.M;
  out.beta = 2.0 * p + delta;
  out.r = r_opt ? *r_opt : std::min(3.0, 0.5 * (2.0 + out.r_hi));
  if (!(out.r > out.r_lo && out.r < out.r_hi))
    throw std::invalid_argument("empirical_rate_window: r outside the admissible interval");
  out.lambda = p - d * (2.0 - 3.0 / out.r);
  out.sigma = out.beta * (3.0 / out.r - 1.0) - p;
  return out;
}

double k_pd(double p, int d) {
  if (!(p >= 1.0) || d < 1) throw std::invalid_argument("k_pd: need p >= 1, d >= 1");
  const double tp = std::pow(2.0, p);
  return std::pow(2.0, 2.0 * p) * std::pow(static_cast<double>(d), p / 2.0) * (tp + 1.0) /
         ((tp - 1.0) * (tp - 1.0));
}

namespace {

double assemble_cp(const nlohmann::json& led) {
  const double kpd = led.at("k_pd").get<double>();
  const double cbar = led.at("c_bar").get<double>();
  const double lambda = led.at("lambda").get<double>();
  const double sigma = led.at("sigma").get<double>();
  const double p = led.at("p").get<double>();
  const double r = led.at("r").get<double>();
  const double moment = led.at("moment").get<double>();
  return kpd * cbar / (1.0 - std::pow(2.0, -lambda)) *
         (1.0 + std::pow(2.0, p) / (1.0 - std::pow(2.0, -sigma)) * std::pow(moment, 3.0 / r - 1.0));
}

double assemble_yp(const nlohmann::json& led) {
  const double kpd = led.at("k_pd").get<double>();
  const double p = led.at("p").get<double>();
  const double d = led.at("d").get<double>();
  const double delta = led.at("delta").get<double>();
  const double moment = led.at("moment").get<double>();
  return std::pow(std::sqrt(2.0) * kpd / (1.0 - std::pow(2.0, -(p - d / 2.0))) *
                      (1.0 + std::pow(2.0, p) / (1.0 - std::pow(2.0, -delta / 2.0)) * std::sqrt(moment)),
                  1.0 / p);
}

}  // namespace

BoundReport cp_nonparametric(double p, int d, double delta, double r, double moment) {
  if (!(moment > 0.0) && moment != 0.0) throw std::invalid_argument("cp_nonparametric: bad moment");
  const EmpiricalRateWindow params = empirical_rate_window(p, d, delta, r);
  const TeicherConstants tc = teicher_constants(r);
  const double cbar = std::pow(tc.alpha0, 1.0 / r) + std::pow(2.0, 3.0 / r) * std::pow(tc.alpha1, 1.0 / r);

  BoundReport rep;
  rep.kind = "C_p";
  rep.inputs = {{"p", p}, {"d", d}, {"delta", delta}, {"r", r}, {"moment", moment}};
  rep.sub_constants["k_pd"] = k_pd(p, d);
  rep.sub_constants["c_bar"] = cbar;
  rep.sub_constants["lambda"] = params.lambda;
  rep.sub_constants["sigma"] = params.sigma;
  rep.sub_constants["p"] = p;
  rep.sub_constants["r"] = r;
  rep.sub_constants["moment"] = moment;
  rep.sub_constants["teicher"] = tc.ledger;
  rep.value = assemble_cp(rep.sub_constants);
  return rep;
}

BoundReport yp_nonparametric(double p, int d, double delta, double moment) {
  if (!(p > d / 2.0)) throw std::invalid_argument("yp_nonparametric: hypothesis p > d/2 fails");
  if (!(delta > 0.0)) throw std::invalid_argument("yp_nonparametric: delta must be positive");
  BoundReport rep;
  rep.kind = "Y_p";
  rep.inputs = {{"p", p}, {"d", d}, {"delta", delta}, {"moment", moment}};
  rep.sub_constants["k_pd"] = k_pd(p, d);
  rep.sub_constants["p"] = p;
  rep.sub_constants["d"] = static_cast<double>(d);
  rep.sub_constants["delta"] = delta;
  rep.sub_constants["moment"] = moment;
  rep.value = assemble_yp(rep.sub_constants);
  return rep;
}

// ---------------------------------------------------------------------------
// Eigenvalue-to-Frobenius constant
// ---------------------------------------------------------------------------

namespace {

// (x - 1 - log x)/(x - 1)^2, continuous value 1/2 at x = 1.
double eig_ratio(double x) {
  const double t = x - 1.0;
  if (std::fabs(t) < 1e-4) return 0.5 - t / 3.0 + t * t / 4.0;
  return (t - std::log(x)) / (t * t);
}

}  // namespace

double k_eps_d(double eps, int d) {
  if (d < 1) throw std::invalid_argument("k_eps_d: need d >= 1");
  const double eps_max = std::pow(2.0 * (d + 1.0), -static_cast<double>(d));
  if (!(eps > 0.0 && eps <= eps_max))
    throw std::invalid_argument("k_eps_d: eps out of range (0, (2(d+1))^{-d}]");

  double best = std::numeric_limits<double>::infinity();
  for (int i = 1; i < 512; ++i) {
    const double delta = static_cast<double>(i) / 512.0;
    // Inside [1-delta, 1+delta]: the ratio is decreasing, max at the left end.
    double k1 = 0.0;
    for (int g = 0; g <= 256; ++g)
      k1 = std::max(k1, eig_ratio(1.0 - delta + 2.0 * delta * g / 256.0));
    // Outside: product of stray eigenvalues stays above p0 = eps/(1+delta)^d.
    const double p0 = eps / std::pow(1.0 + delta, static_cast<double>(d));
    const double c1 = 1.0 / p0 + std::log(1.0 / p0) / (p0 * p0);
    const double k2 = std::pow((1.0 + delta) / delta, 2.0);
    best = std::min(best, std::max(k1, c1 * k2));
  }
  return best;
}

double omega_k(double rho, int k) {
  if (std::fabs(rho) > 1.0) throw std::invalid_argument("omega_k: |rho| must be <= 1");
  if (k == 2) return 1.0 + rho * rho;
  if (k == 4) {
    // Centered fourth moment of a product of correlated standard normals,
    // by Wick pairing; equals 60 at |rho| = 1.
    const double r2 = rho * rho;
    return 9.0 + 42.0 * r2 + 9.0 * r2 * r2;
  }
  throw std::invalid_argument("omega_k: k must be 2 or 4");
}

// ---------------------------------------------------------------------------
// Gaussian plug-in bounds
// ---------------------------------------------------------------------------

namespace {

struct ChernoffSeries {
  double det = 0.0, trace = 0.0, logdet = 0.0;
  double total() const { return det + trace + logdet; }
};

// Series over n >= d+1 of b_n^2 times the three tail bounds of the
// small-determinant region, for fixed (A, eta).
ChernoffSeries chernoff_series(double A, double eta, int d) {
  ChernoffSeries out;
  const double rho1 = (std::log(2.0) - 0.5) / 2.0;
  const double rho2 = eta * (std::exp(1.0) - 2.0) * A / (8.0 * std::exp(1.0) * (1.0 + eta));
  const double rho3 = A / (8.0 * d * (1.0 + eta));
  const double c2 = 8.0 * std::exp(1.0) * (1.0 + eta) / (eta * (std::exp(1.0) - 2.0));
  const double c3 = 8.0 * d * d * (1.0 + eta);

  auto run = [&](double rho, double coef_times, int shift, bool inv_n) {
    // term(n) = b_n^2 * coef(n) * exp(-rho (n - shift)) with coef(n) equal to
    // coef_times or coef_times/(n - shift).
    double acc = 0.0;
    const double x = std::exp(-rho);
    std::size_t n = static_cast<std::size_t>(d) + 1;
    for (; n < 2000000; ++n) {
      const double nn = static_cast<double>(n);
      const double bn2 = nn / log2_fn(nn);
      const double coef = inv_n ? coef_times / (nn - shift) : coef_times;
      const double term = bn2 * coef * std::exp(-rho * (nn - shift));
      acc += term;
      if (term < 1e-14 * (acc + 1e-300) && nn > d + 32) break;
    }
    // remaining terms are below n * coef_times * e^{rho shift} * x^n
    acc += coef_times * std::exp(rho * shift) * geometric_poly_tail(x, n);
    return acc;
  };

  out.det = run(rho1, A * d, d, false);
  out.trace = run(rho2, c2, 1, true);
  out.logdet = run(rho3, c3, d, true);
  return out;
}

double assemble_c2_gauss(const nlohmann::json& led) {
  return (led.at("c_star").get<double>() + led.at("bd2_term").get<double>()) * led.at("trace").get<double>() +
         led.at("c_ast").get<double>() * led.at("k_eps_d").get<double>() * led.at("frobenius").get<double>() +
         led.at("H_term").get<double>();
}

double assemble_y2_gauss(const nlohmann::json& led) {
  return std::sqrt(2.0) * (led.at("sigma_max").get<double>() +
                           led.at("d").get<double>() * std::sqrt(led.at("k_eps_d").get<double>()) *
                               std::sqrt(led.at("trace").get<double>()));
}

void check_covariance(const Eigen::MatrixXd& v0) {
  if (v0.rows() != v0.cols() || v0.rows() < 1) throw std::invalid_argument("covariance: not square");
  if ((v0 - v0.transpose()).cwiseAbs().maxCoeff() > 1e-10)
    throw std::invalid_argument("covariance: not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(v0, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() <= 0.0) throw std::invalid_argument("covariance: not positive definite");
}

}  // namespace

BoundReport c2_gauss(const Eigen::MatrixXd& v0, double eps, double r_mean, RateSchedule sched) {
  check_covariance(v0);
  const int d = static_cast<int>(v0.rows());
  const double eps_max = std::pow(2.0 * (d + 1.0), -static_cast<double>(d));
  if (!(eps > 0.0 && eps <= eps_max)) throw std::invalid_argument("c2_gauss: eps out of range");
  if (sched.kind != RateSchedule::Kind::parametric)
    throw std::invalid_argument("c2_gauss: the plug-in bound uses the parametric rate");

  const TeicherConstants tc_mean = teicher_constants(r_mean);
  const TeicherConstants tc4 = teicher_constants(4.0);

  // Mean component, any r > 2: the r-th absolute moment of a standard normal.
  const double abs_mom = std::pow(2.0, r_mean / 2.0) * std::tgamma((r_mean + 1.0) / 2.0) / std::sqrt(M_PI);
  const double c_star =
      std::pow(tc_mean.alpha0 + tc_mean.alpha1 * std::pow(abs_mom, std::ceil(r_mean)), 2.0 / r_mean);

  const double bd2 = rate_b(static_cast<std::size_t>(d), sched) * rate_b(static_cast<std::size_t>(d), sched) *
                     (d + 1.0);

  // Covariance component on the well-conditioned region: the four maximal
  // inequalities behind the entrywise bounds, all at r = 4.
  const double t1 = std::sqrt(tc4.alpha0 + std::pow(15.0, 4.0) * tc4.alpha1);
  const double t2 = tc4.alpha0 + std::pow(3.0, 4.0) * tc4.alpha1;
  const double t3 = std::sqrt(tc4.alpha0 + std::pow(60.0, 4.0) * tc4.alpha1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(v0, Eigen::EigenvaluesOnly);
  const double lambda_min = es.eigenvalues().minCoeff();
  const double trace = v0.trace();
  const double frob = v0.norm();
  double diag_sq = 0.0;
  for (int i = 0; i < d; ++i) diag_sq += v0(i, i) * v0(i, i);

  const double bracket = 4.0 * t1 + 2.0 * t2 + 2.0 * (d - 1.0) * (2.0 * t3 + t2);
  const double c_ast = diag_sq * bracket / (lambda_min * lambda_min);

  // Small-determinant region: optimize the Chernoff series over (A, eta).
  const double eta_max = 1.0 / (1.0 + std::log(d + 1.0));
  double best = std::numeric_limits<double>::infinity();
  double best_a = 0.0, best_eta = 0.0;
  ChernoffSeries best_series;
  for (int je = 0; je < 32; ++je) {
    const double eta = eta_max * std::pow(10.0, -3.0 * je / 31.0);
    const double a_min = std::max(4.0 * d * (1.0 + 1.0 / eta), -2.0 * (1.0 + eta) * std::log(eps));
    for (int ja = 0; ja < 64; ++ja) {
      const double A = a_min * std::pow(1000.0, ja / 63.0);
      const ChernoffSeries s = chernoff_series(A, eta, d);
      if (s.total() < best) {
        best = s.total();
        best_a = A;
        best_eta = eta;
        best_series = s;
      }
    }
  }
  const double talagrand_ct = 2.0 * frob;
  const double h_term = talagrand_ct * best;

  BoundReport rep;
  rep.kind = "C2_gauss";
  rep.inputs = {{"d", d}, {"eps", eps}, {"r_mean", r_mean}};
  auto& led = rep.sub_constants;
  led["c_star"] = c_star;
  led["r_mean"] = r_mean;
  led["alpha0_r_mean"] = tc_mean.alpha0;
  led["alpha1_r_mean"] = tc_mean.alpha1;
  led["abs_moment_normal"] = abs_mom;
  led["bd2_term"] = bd2;
  led["trace"] = trace;
  led["frobenius"] = frob;
  led["lambda_min"] = lambda_min;
  led["diag_sq_sum"] = diag_sq;
  led["T1"] = t1;
  led["T2"] = t2;
  led["T3"] = t3;
  led["d"] = static_cast<double>(d);
  led["c_ast"] = c_ast;
  led["k_eps_d"] = k_eps_d(eps, d);
  led["A_star"] = best_a;
  led["eta_star"] = best_eta;
  led["chernoff_det"] = best_series.det;
  led["chernoff_trace"] = best_series.trace;
  led["chernoff_logdet"] = best_series.logdet;
  led["talagrand_ct"] = talagrand_ct;
  led["H_term"] = h_term;
  led["teicher4"] = tc4.ledger;
  rep.value = assemble_c2_gauss(led);
  return rep;
}

BoundReport y2_gauss(const Eigen::MatrixXd& v0, double eps) {
  check_covariance(v0);
  const int d = static_cast<int>(v0.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(v0, Eigen::EigenvaluesOnly);

  BoundReport rep;
  rep.kind = "Y2_gauss";
  rep.inputs = {{"d", d}, {"eps", eps}};
  rep.sub_constants["sigma_max"] = std::sqrt(es.eigenvalues().maxCoeff());
  rep.sub_constants["d"] = static_cast<double>(d);
  rep.sub_constants["k_eps_d"] = k_eps_d(eps, d);
  rep.sub_constants["trace"] = v0.trace();
  rep.value = assemble_y2_gauss(rep.sub_constants);
  return rep;
}

// ---------------------------------------------------------------------------
// Ledger replay
// ---------------------------------------------------------------------------

double audit_replay(const BoundReport& report) {
  const auto& led = report.sub_constants;
  if (report.kind == "C_p") {
    // Deep replay: c_bar from the dominated-ergodic constants, which are in
    // turn replayed from their own ledger.
    TeicherConstants tc = teicher_from_ledger(led.at("teicher"));
    const double r = led.at("r").get<double>();
    const double cbar = std::pow(tc.alpha0, 1.0 / r) + std::pow(2.0, 3.0 / r) * std::pow(tc.alpha1, 1.0 / r);
    if (std::fabs(cbar - led.at("c_bar").get<double>()) > 1e-12 * cbar)
      throw std::runtime_error("audit: c_bar does not replay");
    return assemble_cp(led);
  }
  if (report.kind == "Y_p") return assemble_yp(led);
  if (report.kind == "C2_gauss") {
    TeicherConstants tc4 = teicher_from_ledger(led.at("teicher4"));
    const double t3 = std::sqrt(tc4.alpha0 + std::pow(60.0, 4.0) * tc4.alpha1);
    if (std::fabs(t3 - led.at("T3").get<double>()) > 1e-12 * t3)
      throw std::runtime_error("audit: T3 does not replay");
    const double bracket = 4.0 * led.at("T1").get<double>() + 2.0 * led.at("T2").get<double>() +
                           2.0 * (led.at("d").get<double>() - 1.0) *
                               (2.0 * led.at("T3").get<double>() + led.at("T2").get<double>());
    const double c_ast = led.at("diag_sq_sum").get<double>() * bracket /
                         std::pow(led.at("lambda_min").get<double>(), 2.0);
    if (std::fabs(c_ast - led.at("c_ast").get<double>()) > 1e-12 * c_ast)
      throw std::runtime_error("audit: c_ast does not replay");
    const double h = led.at("talagrand_ct").get<double>() *
                     (led.at("chernoff_det").get<double>() + led.at("chernoff_trace").get<double>() +
                      led.at("chernoff_logdet").get<double>());
    if (std::fabs(h - led.at("H_term").get<double>()) > 1e-12 * std::max(h, 1e-300))
      throw std::runtime_error("audit: H_term does not replay");
    return assemble_c2_gauss(led);
  }
  if (report.kind == "Y2_gauss") return assemble_y2_gauss(led);
  if (report.kind == "Y2_expfam")
    return std::sqrt(2.0 * led.at("c_talagrand").get<double>()) * led.at("phi_theta0").get<double>() *
           led.at("sigma_max").get<double>();
  if (report.kind == "C2_expfam")
    return led.at("c_talagrand").get<double>() *
           std::pow(led.at("interior").get<double>() + led.at("exterior_l2").get<double>(), 2.0);
  throw std::runtime_error("audit: unknown report kind " + report.kind);
}

bool audit_pass(const BoundReport& report, double rel_tol) {
  try {
    const double replay = audit_replay(report);
    return std::fabs(replay - report.value) <= rel_tol * std::max(std::fabs(report.value), 1e-300);
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace wassrates
