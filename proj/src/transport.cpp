#include "wassrates/transport.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "wassrates/quadrature.hpp"

namespace wassrates {

std::vector<std::vector<double>> CouplingPlan::dense() const {
  std::vector<std::vector<double>> g(row.size(), std::vector<double>(col.size(), 0.0));
  for (const auto& [i, j, f] : entries) g[i][j] += f;
  return g;
}

void CouplingPlan::validate(double tol) const {
  std::vector<double> rs(row.size(), 0.0), cs(col.size(), 0.0);
  for (const auto& [i, j, f] : entries) {
    if (f < -tol) throw std::runtime_error("CouplingPlan: negative entry");
    rs[i] += f;
    cs[j] += f;
  }
  for (std::size_t i = 0; i < rs.size(); ++i)
    if (std::fabs(rs[i] - row.weights()[i]) > tol) throw std::runtime_error("CouplingPlan: row sum off");
  for (std::size_t j = 0; j < cs.size(); ++j)
    if (std::fabs(cs[j] - col.weights()[j]) > tol) throw std::runtime_error("CouplingPlan: column sum off");
}

namespace {

// Dense bipartite network simplex. Sources 0..m-1, sinks 0..n-1.
class TransportSimplex {
 public:
  TransportSimplex(std::vector<double> supply, std::vector<double> demand,
                   const std::function<double(std::size_t, std::size_t)>& cost)
      : a_(std::move(supply)), b_(std::move(demand)), cost_(cost), m_(a_.size()), n_(b_.size()) {}

  TransportSolution solve() {
    for (int attempt = 0; attempt < 4; ++attempt) {
      std::vector<double> a = a_, b = b_;
      if (attempt > 0) perturb(a, b, std::ldexp(1.0, -46 + 4 * attempt));
      if (run(a, b)) return extract();
    }
    throw std::runtime_error("network simplex did not converge");
  }

 private:
  struct BArc {
    std::size_t src, snk;
    double flow;
  };

  void perturb(std::vector<double>& a, std::vector<double>& b, double eps) {
    const double mass = std::accumulate(a.begin(), a.end(), 0.0);
    double added_a = 0.0, added_b = 0.0;
    for (std::size_t i = 0; i < m_; ++i) {
      const double e = eps * mass * static_cast<double>(i + 1);
      a[i] += e;
      added_a += e;
    }
    for (std::size_t j = 0; j < n_; ++j) {
      const double e = eps * mass * static_cast<double>(j + 1) * 1.0078125;
      b[j] += e;
      added_b += e;
    }
    b[n_ - 1] += added_a - added_b;
  }

  // Northwest-corner initial basis: a staircase of m+n-1 cells forming a tree.
  void initial_basis(const std::vector<double>& a, const std::vector<double>& b) {
    basis_.clear();
    std::size_t i = 0, j = 0;
    double ra = a[0], rb = b[0];
    for (;;) {
      const double t = std::min(ra, rb);
      basis_.push_back({i, j, t});
      ra -= t;
      rb -= t;
      if (i == m_ - 1 && j == n_ - 1) break;
      if ((ra <= rb && i < m_ - 1) || j == n_ - 1) {
        ++i;
        ra = a[i];
      } else {
        ++j;
        rb = b[j];
      }
    }
  }

  std::size_t node_of_src(std::size_t i) const { return i; }
  std::size_t node_of_snk(std::size_t j) const { return m_ + j; }

  void rebuild_tree() {
    const std::size_t N = m_ + n_;
    adj_.assign(N, {});
    for (std::size_t k = 0; k < basis_.size(); ++k) {
      adj_[node_of_src(basis_[k].src)].push_back(k);
      adj_[node_of_snk(basis_[k].snk)].push_back(k);
    }
    parent_.assign(N, SIZE_MAX);
    parc_.assign(N, SIZE_MAX);
    depth_.assign(N, 0);
    pot_.assign(N, 0.0);
    // BFS from node 0; potentials satisfy pot[src] + pot[snk] = cost on basis.
    std::vector<std::size_t> stack = {0};
    std::vector<char> seen(N, 0);
    seen[0] = 1;
    pot_[0] = 0.0;
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      for (std::size_t k : adj_[u]) {
        const std::size_t su = node_of_src(basis_[k].src), tu = node_of_snk(basis_[k].snk);
        const std::size_t v = (su == u) ? tu : su;
        if (seen[v]) continue;
        seen[v] = 1;
        parent_[v] = u;
        parc_[v] = k;
        depth_[v] = depth_[u] + 1;
        pot_[v] = cost_(basis_[k].src, basis_[k].snk) - pot_[u];
        stack.push_back(v);
      }
    }
  }

  bool run(const std::vector<double>& a, const std::vector<double>& b) {
    initial_basis(a, b);
    rebuild_tree();

    double scale = 1e-12;
    for (std::size_t i = 0; i < m_; ++i)
      for (std::size_t j = 0; j < n_; ++j) scale = std::max(scale, std::fabs(cost_(i, j)));
    const double tol = 1e-13 * scale;

    const std::size_t arcs = m_ * n_;
    const std::size_t block = std::max<std::size_t>(64, static_cast<std::size_t>(std::sqrt(double(arcs))));
    std::size_t offset = 0;
    const std::size_t max_pivots = 400 * (m_ + n_) + 20000;

    for (std::size_t pivot = 0; pivot < max_pivots; ++pivot) {
      // Block search for the entering arc.
      std::size_t enter = SIZE_MAX;
      double best = -tol;
      std::size_t scanned = 0;
      while (scanned < arcs) {
        const std::size_t stop = std::min(arcs, scanned + block);
        for (; scanned < stop; ++scanned) {
          const std::size_t idx = (offset + scanned) % arcs;
          const std::size_t i = idx / n_, j = idx % n_;
          const double red = cost_(i, j) - pot_[node_of_src(i)] - pot_[node_of_snk(j)];
          if (red < best) {
            best = red;
            enter = idx;
          }
        }
        if (enter != SIZE_MAX) break;
      }
      if (enter == SIZE_MAX) return true;  // optimal
      offset = (offset + scanned) % arcs;

      const std::size_t ei = enter / n_, ej = enter % n_;
      pivot_step(ei, ej);
      rebuild_tree();
    }
    return false;
  }

  void pivot_step(std::size_t ei, std::size_t ej) {
    // Cycle: entering arc (ei,ej) plus the tree path from sink ej back to
    // source ei. Tree edges along the walk alternate -theta, +theta.
    std::size_t u = node_of_snk(ej), v = node_of_src(ei);
    std::vector<std::size_t> up_u, up_v;  // arc indices walking to the LCA
    while (depth_[u] > depth_[v]) {
      up_u.push_back(parc_[u]);
      u = parent_[u];
    }
    while (depth_[v] > depth_[u]) {
      up_v.push_back(parc_[v]);
      v = parent_[v];
    }
    while (u != v) {
      up_u.push_back(parc_[u]);
      u = parent_[u];
      up_v.push_back(parc_[v]);
      v = parent_[v];
    }
    // Walk order: from ej up to LCA, then LCA down to ei.
    std::vector<std::size_t> walk = up_u;
    walk.insert(walk.end(), up_v.rbegin(), up_v.rend());

    double theta = std::numeric_limits<double>::infinity();
    std::size_t leave_pos = SIZE_MAX;
    for (std::size_t t = 0; t < walk.size(); ++t) {
      if (t % 2 == 0) {  // decreasing edge
        if (basis_[walk[t]].flow < theta) {
          theta = basis_[walk[t]].flow;
          leave_pos = t;
        }
      }
    }
    for (std::size_t t = 0; t < walk.size(); ++t)
      basis_[walk[t]].flow += (t % 2 == 0) ? -theta : theta;
    basis_[walk[leave_pos]] = {ei, ej, theta};
  }

  TransportSolution extract() {
    // Reflow the final tree with the unperturbed marginals: basis optimality
    // depends only on costs, so the tree stays optimal.
    const std::size_t N = m_ + n_;
    std::vector<double> residual(N);
    for (std::size_t i = 0; i < m_; ++i) residual[i] = a_[i];
    for (std::size_t j = 0; j < n_; ++j) residual[m_ + j] = b_[j];
    std::vector<int> degree(N, 0);
    std::vector<std::vector<std::size_t>> inc(N);
    for (std::size_t k = 0; k < basis_.size(); ++k) {
      const std::size_t s = node_of_src(basis_[k].src), t = node_of_snk(basis_[k].snk);
      degree[s]++;
      degree[t]++;
      inc[s].push_back(k);
      inc[t].push_back(k);
    }
    std::vector<char> arc_done(basis_.size(), 0), node_done(N, 0);
    std::vector<std::size_t> leaves;
    for (std::size_t v = 0; v < N; ++v)
      if (degree[v] == 1) leaves.push_back(v);
    std::vector<double> flow(basis_.size(), 0.0);
    while (!leaves.empty()) {
      const std::size_t v = leaves.back();
      leaves.pop_back();
      if (node_done[v]) continue;
      node_done[v] = 1;
      std::size_t karc = SIZE_MAX;
      for (std::size_t k : inc[v])
        if (!arc_done[k]) karc = k;
      if (karc == SIZE_MAX) continue;  // root of the strip order
      arc_done[karc] = 1;
      flow[karc] = residual[v];
      const std::size_t s = node_of_src(basis_[karc].src), t = node_of_snk(basis_[karc].snk);
      const std::size_t other = (s == v) ? t : s;
      residual[other] -= residual[v];
      residual[v] = 0.0;
      if (--degree[other] == 1 && !node_done[other]) leaves.push_back(other);
      --degree[v];
    }

    TransportSolution sol;
    const double mass = std::accumulate(a_.begin(), a_.end(), 0.0);
    for (std::size_t k = 0; k < basis_.size(); ++k) {
      if (flow[k] < -1e-8 * mass) throw std::runtime_error("network simplex: infeasible reflow");
      const double f = std::max(0.0, flow[k]);
      if (f > 0.0) sol.flows.emplace_back(basis_[k].src, basis_[k].snk, f);
      sol.cost += f * cost_(basis_[k].src, basis_[k].snk);
    }
    return sol;
  }

  std::vector<double> a_, b_;
  const std::function<double(std::size_t, std::size_t)>& cost_;
  std::size_t m_, n_;
  std::vector<BArc> basis_;
  std::vector<std::vector<std::size_t>> adj_;
  std::vector<std::size_t> parent_, parc_;
  std::vector<int> depth_;
  std::vector<double> pot_;
};

}  // namespace

TransportSolution solve_transport(const std::vector<double>& supply, const std::vector<double>& demand,
                                  const std::function<double(std::size_t, std::size_t)>& cost) {
  if (supply.empty() || demand.empty()) throw std::invalid_argument("solve_transport: empty marginal");
  const double sa = std::accumulate(supply.begin(), supply.end(), 0.0);
  const double sb = std::accumulate(demand.begin(), demand.end(), 0.0);
  if (std::fabs(sa - sb) > 1e-9 * std::max(1.0, std::fabs(sa)))
    throw std::invalid_argument("solve_transport: marginals have different total mass");
  TransportSimplex simplex(supply, demand, cost);
  return simplex.solve();
}

ExactTransport wasserstein_exact(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p) {
  if (p < 1.0) throw std::invalid_argument("wasserstein_exact: order must be >= 1");
  if (!mu.same_space(nu)) throw std::invalid_argument("wasserstein_exact: measures on different spaces");
  if (mu.size() + nu.size() > 10000)
    throw std::invalid_argument("wasserstein_exact: combined support exceeds 10^4 atoms");

  auto cost = [&](std::size_t i, std::size_t j) {
    const double d = mu.ground_distance(i, nu, j);
    if (p == 1.0) return d;
    if (p == 2.0) return d * d;
    return std::pow(d, p);
  };
  TransportSolution sol = solve_transport(mu.weights(), nu.weights(), cost);

  ExactTransport out;
  out.plan.row = mu;
  out.plan.col = nu;
  out.plan.entries = std::move(sol.flows);
  out.distance = std::pow(std::max(0.0, sol.cost), 1.0 / p);
  return out;
}

double wasserstein_1d(const std::vector<double>& xs, const std::vector<double>& xw,
                      const std::vector<double>& ys, const std::vector<double>& yw, double p) {
  if (xs.size() != xw.size() || ys.size() != yw.size() || xs.empty() || ys.empty())
    throw std::invalid_argument("wasserstein_1d: bad inputs");
  std::vector<std::size_t> ox(xs.size()), oy(ys.size());
  std::iota(ox.begin(), ox.end(), 0);
  std::iota(oy.begin(), oy.end(), 0);
  std::sort(ox.begin(), ox.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::sort(oy.begin(), oy.end(), [&](std::size_t a, std::size_t b) { return ys[a] < ys[b]; });

  std::size_t i = 0, j = 0;
  double ra = xw[ox[0]], rb = yw[oy[0]], total = 0.0;
  while (i < xs.size() && j < ys.size()) {
    const double t = std::min(ra, rb);
    const double d = std::fabs(xs[ox[i]] - ys[oy[j]]);
    total += t * (p == 1.0 ? d : p == 2.0 ? d * d : std::pow(d, p));
    ra -= t;
    rb -= t;
    if (ra <= 0.0) {
      ++i;
      if (i < xs.size()) ra = xw[ox[i]];
    }
    if (rb <= 0.0) {
      ++j;
      if (j < ys.size()) rb = yw[oy[j]];
    }
  }
  return std::pow(total, 1.0 / p);
}

double wasserstein_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p) {
  if (mu.is_finite_space() || nu.is_finite_space() || mu.dim() != 1 || nu.dim() != 1)
    throw std::invalid_argument("wasserstein_1d: needs R^1 measures");
  std::vector<double> xs(mu.size()), ys(nu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) xs[i] = mu.points()[i][0];
  for (std::size_t j = 0; j < nu.size(); ++j) ys[j] = nu.points()[j][0];
  return wasserstein_1d(xs, mu.weights(), ys, nu.weights(), p);
}

double wasserstein_1d_vs_density(const Density1d& density, const std::vector<double>& sorted_sample,
                                 double p) {
  const std::size_t n = sorted_sample.size();
  if (n == 0) throw std::invalid_argument("wasserstein_1d_vs_density: empty sample");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lo = static_cast<double>(i) / n;
    const double hi = static_cast<double>(i + 1) / n;
    const double xi = sorted_sample[i];
    auto piece = [&](double a, double b) {
      if (b <= a) return 0.0;
      return gauss_legendre_integrate(
          [&](double u) { return std::pow(std::fabs(density.quantile(u) - xi), p); }, a, b, 16);
    };
    const double cross = std::clamp(density.cdf(xi), lo, hi);
    total += piece(lo, cross) + piece(cross, hi);
  }
  return std::pow(total, 1.0 / p);
}

double gaussian_w2(const GaussianMeasure& a, const GaussianMeasure& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("gaussian_w2: dimension mismatch");
  const Eigen::MatrixXd &va = a.covariance(), &vb = b.covariance();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ea(va);
  const Eigen::VectorXd la = ea.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd sqa = ea.eigenvectors() * la.asDiagonal() * ea.eigenvectors().transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> em(sqa * vb * sqa);
  const double cross = em.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double d2 = (a.mean() - b.mean()).squaredNorm() + va.trace() + vb.trace() - 2.0 * cross;
  return std::sqrt(std::max(0.0, d2));
}

DyadicGrid DyadicGrid::for_tolerance(double p, int d, double beta, double moment, double lambda,
                                     double tol) {
  if (!(beta > p) || !(moment > 0.0))
    throw std::invalid_argument("DyadicGrid: need a finite moment of order above p");
  DyadicGrid g;
  const double kpd = std::pow(2.0, 2.0 * p) * std::pow(double(d), p / 2.0) * (std::pow(2.0, p) + 1.0) /
                     std::pow(std::pow(2.0, p) - 1.0, 2.0);
  // Markov annulus tail: mass beyond 2^{s-1} is at most 2^{-beta(s-1)} moment.
  double s_tail = 1.0;
  g.s_max = 0;
  while (g.s_max < 300) {
    s_tail = kpd * std::pow(2.0, beta + 1.0) * moment *
             std::pow(2.0, -(beta - p) * (g.s_max + 1.0)) / (1.0 - std::pow(2.0, -(beta - p))) /
             (1.0 - std::pow(2.0, -p));
    if (s_tail < tol) break;
    ++g.s_max;
  }
  g.l_max = 1;
  while (g.l_max < 200 && std::pow(2.0, -lambda * g.l_max) >= tol) ++g.l_max;
  return g;
}

DyadicBound dyadic_upper_bound(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p,
                               const DyadicGrid& grid) {
  if (mu.is_finite_space() || nu.is_finite_space())
    throw std::invalid_argument("dyadic_upper_bound: needs R^d measures");
  if (!mu.same_space(nu)) throw std::invalid_argument("dyadic_upper_bound: dimension mismatch");
  const int d = mu.dim();
  const double kpd = std::pow(2.0, 2.0 * p) * std::pow(double(d), p / 2.0) * (std::pow(2.0, p) + 1.0) /
                     std::pow(std::pow(2.0, p) - 1.0, 2.0);

  // Joint atom list (point, mu-weight, nu-weight), cross-merged.
  struct Atom {
    Point x;
    double wm, wn;
  };
  std::vector<Atom> atoms;
  for (std::size_t i = 0; i < mu.size(); ++i) atoms.push_back({mu.points()[i], mu.weights()[i], 0.0});
  for (std::size_t j = 0; j < nu.size(); ++j) atoms.push_back({nu.points()[j], 0.0, nu.weights()[j]});
  std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.x < b.x; });
  std::vector<Atom> merged;
  for (auto& a : atoms) {
    bool close = false;
    if (!merged.empty()) {
      close = true;
      for (int c = 0; c < d; ++c)
        if (std::fabs(merged.back().x[c] - a.x[c]) > kAtomMergeTol) {
          close = false;
          break;
        }
    }
    if (close) {
      merged.back().wm += a.wm;
      merged.back().wn += a.wn;
    } else {
      merged.push_back(a);
    }
  }

  // Annulus index: smallest s >= 0 with x in (-2^s, 2^s]^d.
  auto annulus = [&](const Point& x) {
    int s = 0;
    for (;;) {
      const double r = std::ldexp(1.0, s);
      bool inside = true;
      for (int c = 0; c < d; ++c)
        if (!(x[c] > -r && x[c] <= r)) {
          inside = false;
          break;
        }
      if (inside) return s;
      if (++s > 1100) throw std::invalid_argument("dyadic_upper_bound: atom too far out");
    }
  };

  std::map<int, std::vector<const Atom*>> by_annulus;
  for (const auto& a : merged) by_annulus[annulus(a.x)].push_back(&a);

  DyadicBound out;
  const double geo = 1.0 / (1.0 - std::pow(2.0, -p));
  for (const auto& [s, group] : by_annulus) {
    out.s_used = std::max(out.s_used, s);
    double d_s = 0.0;
    for (const Atom* a : group) d_s += std::fabs(a->wm - a->wn);
    const double scale_s = std::pow(2.0, p * s);
    if (s > grid.s_max) {
      out.remainder += kpd * scale_s * d_s * geo;
      continue;
    }
    double level_sum = 0.0;
    for (int l = 0; l <= grid.l_max; ++l) {
      const double side = std::ldexp(1.0, s + 1 - l);
      std::map<std::vector<std::int64_t>, std::pair<double, double>> cells;
      for (const Atom* a : group) {
        std::vector<std::int64_t> key(d);
        for (int c = 0; c < d; ++c) key[c] = static_cast<std::int64_t>(std::ceil(a->x[c] / side));
        auto& cell = cells[key];
        cell.first += a->wm;
        cell.second += a->wn;
      }
      double t_sl = 0.0;
      for (const auto& [key, w] : cells) t_sl += std::fabs(w.first - w.second);
      level_sum += std::pow(2.0, -l * p) * t_sl;
    }
    out.value += kpd * scale_s * level_sum;
    out.remainder += kpd * scale_s * d_s * std::pow(2.0, -p * (grid.l_max + 1)) * geo;
  }
  return out;
}

MetaMeasure::MetaMeasure(std::vector<DiscreteMeasure> atoms, std::vector<double> weights)
    : atoms_(std::move(atoms)), weights_(std::move(weights)) {
  if (atoms_.empty() || atoms_.size() != weights_.size())
    throw std::invalid_argument("MetaMeasure: empty or mismatched atoms");
  double total = 0.0;
  for (double w : weights_) {
    if (w < 0.0) throw std::invalid_argument("MetaMeasure: negative weight");
    total += w;
  }
  if (std::fabs(total - 1.0) > kWeightSumTol)
    throw std::invalid_argument("MetaMeasure: weights must sum to 1");
  for (std::size_t i = 1; i < atoms_.size(); ++i)
    if (!atoms_[0].same_space(atoms_[i]))
      throw std::invalid_argument("MetaMeasure: inner measures on different spaces");
}

double nested_distance(const MetaMeasure& A, const MetaMeasure& B, double p) {
  if (!A.atom(0).same_space(B.atom(0)))
    throw std::invalid_argument("nested_distance: inner spaces differ");
  std::vector<std::vector<double>> ground(A.size(), std::vector<double>(B.size()));
  for (std::size_t i = 0; i < A.size(); ++i)
    for (std::size_t j = 0; j < B.size(); ++j)
      ground[i][j] = wasserstein_exact(A.atom(i), B.atom(j), p).distance;
  auto cost = [&](std::size_t i, std::size_t j) {
    const double d = ground[i][j];
    return p == 1.0 ? d : p == 2.0 ? d * d : std::pow(d, p);
  };
  TransportSolution sol = solve_transport(A.weights(), B.weights(), cost);
  return std::pow(std::max(0.0, sol.cost), 1.0 / p);
}

}  // namespace wassrates
