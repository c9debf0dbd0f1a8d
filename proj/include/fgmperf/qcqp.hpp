#pragma once

// Reduced dual of the bundle subproblem:
//
//   max_{alpha, theta}  -theta + q^T alpha
//   s.t.  0.5 alpha^T G_t alpha <= theta   (t = 1..T)
//         sum_k alpha_k <= C,  alpha >= 0
//
// solved by a primal-dual interior point method on (alpha, theta). The
// multipliers of the T quadratic constraints are the group weights mu; they
// sum to one at any stationary point.

#include <Eigen/Dense>
#include <algorithm>
#include <optional>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fgmperf/cut.hpp"
#include "fgmperf/error.hpp"

namespace fgmperf {

struct QcqpInput {
  std::vector<Eigen::MatrixXd> gram;  // T matrices, K x K
  Eigen::VectorXd offsets;            // q, length K
  double capacity = 1.0;              // C
  Eigen::VectorXd start_alpha;        // optional warm start, length K
  Eigen::VectorXd start_mu;           // optional warm start, length T
};

struct QcqpOptions {
  double tol = 1e-8;
  int max_iterations = 200;
  bool check_psd = true;
};

struct QcqpSolution {
  Eigen::VectorXd alpha;
  double theta = 0.0;
  Eigen::VectorXd mu;
  double objective = 0.0;
  /// Multiplier of sum(alpha) <= C.
  double capacity_multiplier = 0.0;
  /// Multipliers of alpha >= 0.
  Eigen::VectorXd sign_multipliers;
  double stationarity = 0.0;
  double complementarity = 0.0;
  double kkt_residual = 0.0;
  /// False when no quadratic constraint is active (theta == 0); mu is then
  /// reported uniform over the non-degenerate groups.
  bool mu_active = false;
  int iterations = 0;
};

/// Raised when the iteration cap is hit before the tolerance; keeps the best
/// iterate found so the caller can decide whether to use it.
class QcqpError : public Error {
 public:
  QcqpError(const std::string& what, QcqpSolution best)
      : Error(what), best_(std::move(best)) {}
  const QcqpSolution& best() const { return best_; }

 private:
  QcqpSolution best_;
};

namespace detail {

inline void check_qcqp_input(const QcqpInput& in, bool check_psd) {
  const auto K = in.offsets.size();
  if (K == 0) throw ConfigError("QCQP needs at least one cut");
  if (in.gram.empty()) throw ConfigError("QCQP needs at least one group");
  if (!(in.capacity > 0.0) || !std::isfinite(in.capacity)) {
    throw ConfigError("QCQP capacity must be positive");
  }
  for (const auto& G : in.gram) {
    if (G.rows() != K || G.cols() != K) {
      throw ConfigError("Gram matrix size does not match the cut count");
    }
    if (!G.allFinite() || !in.offsets.allFinite()) {
      throw DataError("non-finite QCQP data");
    }
    if (!check_psd) continue;
    const double scale = std::max(1.0, G.cwiseAbs().maxCoeff());
    if ((G - G.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
      throw DataError("Gram matrix is not symmetric");
    }
    // Gershgorin first; the eigen solve only runs when that is inconclusive.
    double lower = std::numeric_limits<double>::infinity();
    for (Eigen::Index r = 0; r < K; ++r) {
      lower = std::min(lower, G(r, r) - (G.row(r).cwiseAbs().sum() -
                                         std::abs(G(r, r))));
    }
    if (lower >= -1e-10 * scale) continue;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(G, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -1e-10 * scale) {
      throw DataError("Gram matrix is not positive semidefinite");
    }
  }
}

}  // namespace detail

/// KKT residuals of a candidate solution, in the units of `in`.
inline void certify(const QcqpInput& in, QcqpSolution& sol) {
  const auto T = in.gram.size();
  Eigen::VectorXd grad = -in.offsets;
  double comp = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    if (sol.mu(t) == 0.0) continue;
    grad += sol.mu(t) * (in.gram[t] * sol.alpha);
    const double quad = 0.5 * sol.alpha.dot(in.gram[t] * sol.alpha);
    comp = std::max(comp, sol.mu(t) * std::abs(sol.theta - quad));
  }
  grad.array() += sol.capacity_multiplier;
  grad -= sol.sign_multipliers;
  sol.stationarity = grad.cwiseAbs().maxCoeff();
  comp = std::max(comp, sol.capacity_multiplier *
                            std::abs(in.capacity - sol.alpha.sum()));
  comp = std::max(comp, sol.sign_multipliers.cwiseProduct(sol.alpha)
                            .cwiseAbs()
                            .maxCoeff());
  sol.complementarity = comp;
  sol.kkt_residual = std::max(sol.stationarity, comp);
}

inline QcqpSolution solve(const QcqpInput& in, const QcqpOptions& opt = {}) {
  detail::check_qcqp_input(in, opt.check_psd);
  const auto K = static_cast<Eigen::Index>(in.offsets.size());
  const std::size_t T = in.gram.size();
  const double C = in.capacity;

  // Groups orthogonal to every cut only contribute theta >= 0.
  double max_diag = 0.0;
  for (const auto& G : in.gram) max_diag = std::max(max_diag, G.diagonal().maxCoeff());
  std::vector<std::size_t> live;
  for (std::size_t t = 0; t < T; ++t) {
    if (in.gram[t].diagonal().maxCoeff() > 1e-14 * max_diag) live.push_back(t);
  }
  if (live.empty()) {
    for (std::size_t t = 0; t < T; ++t) live.push_back(t);
  }

  QcqpSolution sol;
  sol.alpha = Eigen::VectorXd::Zero(K);
  sol.sign_multipliers = Eigen::VectorXd::Zero(K);
  sol.mu = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(T));
  for (std::size_t t : live) sol.mu(t) = 1.0 / static_cast<double>(live.size());

  const double qmax = in.offsets.maxCoeff();
  if (qmax <= 0.0) {
    // No cut is profitable: alpha = 0 with sign multipliers -q.
    sol.sign_multipliers = -in.offsets;
    certify(in, sol);
    return sol;
  }

  // Work on alpha' = alpha / C, q' = q / qmax, G' = C G / qmax so that every
  // quantity is O(1); mu is unchanged by this rescaling.
  const double unit = qmax;
  const Eigen::VectorXd q = in.offsets / unit;
  std::vector<Eigen::MatrixXd> G;
  G.reserve(live.size());
  for (std::size_t t : live) G.push_back(in.gram[t] * (C / unit));
  const auto L = static_cast<Eigen::Index>(G.size());
  const Eigen::Index n = K + 1;
  const double mcount = static_cast<double>(L + 1 + K);

  Eigen::VectorXd a = Eigen::VectorXd::Constant(K, 0.5 / static_cast<double>(K));
  Eigen::VectorXd mu = Eigen::VectorXd::Constant(L, 1.0 / static_cast<double>(L));
  // A warm start is blended with the default point to stay interior.
  constexpr double kWarm = 0.9;
  if (in.start_alpha.size() == K && in.start_alpha.minCoeff() >= 0.0 &&
      in.start_alpha.sum() <= C) {
    a = kWarm * in.start_alpha / C + (1.0 - kWarm) * a;
  }
  if (in.start_mu.size() == static_cast<Eigen::Index>(T) && in.start_mu.minCoeff() >= 0.0) {
    Eigen::VectorXd m(L);
    for (Eigen::Index t = 0; t < L; ++t) m(t) = in.start_mu(static_cast<Eigen::Index>(live[t]));
    if (m.sum() > 0.0) mu = kWarm * m / m.sum() + (1.0 - kWarm) * mu;
  }
  double theta = 0.0;
  for (const auto& Gt : G) theta = std::max(theta, 0.5 * a.dot(Gt * a));
  theta += in.start_alpha.size() == K ? 0.1 : 1.0;
  std::vector<Eigen::VectorXd> g(L);
  Eigen::VectorXd f(L);

  // Dual-feasible start: pick lambda so that s = sum mu G a - q + lambda >= 1.
  Eigen::VectorXd mixed = -q;
  for (Eigen::Index t = 0; t < L; ++t) mixed += mu(t) * (G[t] * a);
  double lam = std::max(0.0, -mixed.minCoeff()) + 1.0;
  Eigen::VectorXd s = (mixed.array() + lam).matrix();

  auto evaluate = [&](const Eigen::VectorXd& av, double th, Eigen::VectorXd& fv,
                      std::vector<Eigen::VectorXd>& gv) {
    for (Eigen::Index t = 0; t < L; ++t) {
      gv[t] = G[t] * av;
      fv(t) = 0.5 * av.dot(gv[t]) - th;
    }
  };

  // Residual (dual, centrality) for the barrier parameter tinv = 1/t, given
  // f and g evaluated at av.
  auto residual_norm = [&](const Eigen::VectorXd& av, const Eigen::VectorXd& fv,
                           const std::vector<Eigen::VectorXd>& gv,
                           const Eigen::VectorXd& muv, double lv,
                           const Eigen::VectorXd& sv, double tinv) {
    Eigen::VectorXd rd = -q;
    double rth = 1.0;
    for (Eigen::Index t = 0; t < L; ++t) {
      rd += muv(t) * gv[t];
      rth -= muv(t);
    }
    rd.array() += lv;
    rd -= sv;
    double sq = rd.squaredNorm() + rth * rth;
    for (Eigen::Index t = 0; t < L; ++t) {
      const double rc = -muv(t) * fv(t) - tinv;
      sq += rc * rc;
    }
    const double rcap = -lv * (av.sum() - 1.0) - tinv;
    sq += rcap * rcap;
    sq += (sv.cwiseProduct(av).array() - tinv).matrix().squaredNorm();
    return std::sqrt(sq);
  };

  const double target = 0.1 * opt.tol;
  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    evaluate(a, theta, f, g);
    const double fcap = a.sum() - 1.0;
    const double gap = -mu.dot(f) - lam * fcap + s.dot(a);

    Eigen::VectorXd rd = -q;
    double rth = 1.0;
    for (Eigen::Index t = 0; t < L; ++t) {
      rd += mu(t) * g[t];
      rth -= mu(t);
    }
    rd.array() += lam;
    rd -= s;
    const double dual_res = std::max(rd.cwiseAbs().maxCoeff(), std::abs(rth));
    if (gap <= target && dual_res <= target) break;

    const double tinv = gap / (10.0 * mcount);

    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    rhs.head(K) = q;
    rhs(K) = -1.0;
    Eigen::MatrixXd scaled_g(K, L);
    for (Eigen::Index t = 0; t < L; ++t) {
      const double slack = -f(t);
      const double wgt = mu(t) / slack;
      M.topLeftCorner(K, K) += mu(t) * G[t];
      scaled_g.col(t) = std::sqrt(wgt) * g[t];
      M.col(K).head(K) -= wgt * g[t];
      M(K, K) += wgt;
      rhs.head(K) -= (tinv / slack) * g[t];
      rhs(K) += tinv / slack;
    }
    M.topLeftCorner(K, K).noalias() += scaled_g * scaled_g.transpose();
    M.topLeftCorner(K, K).array() += lam / (-fcap);
    rhs.head(K).array() -= tinv / (-fcap);
    for (Eigen::Index k = 0; k < K; ++k) {
      M(k, k) += s(k) / a(k);
      rhs(k) += tinv / a(k);
    }
    M.row(K).head(K) = M.col(K).head(K).transpose();

    Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
    Eigen::VectorXd dx = ldlt.solve(rhs);
    if (ldlt.info() != Eigen::Success || !dx.allFinite()) break;
    const Eigen::VectorXd da = dx.head(K);
    const double dth = dx(K);

    Eigen::VectorXd dmu(L);
    for (Eigen::Index t = 0; t < L; ++t) {
      const double df = g[t].dot(da) - dth;
      dmu(t) = -mu(t) + (tinv + mu(t) * df) / (-f(t));
    }
    const double dlam = -lam + (tinv + lam * da.sum()) / (-fcap);
    Eigen::VectorXd ds(K);
    for (Eigen::Index k = 0; k < K; ++k) {
      ds(k) = -s(k) + (tinv - s(k) * da(k)) / a(k);
    }

    double step = 1.0;
    for (Eigen::Index t = 0; t < L; ++t) {
      if (dmu(t) < 0) step = std::min(step, -mu(t) / dmu(t));
    }
    if (dlam < 0) step = std::min(step, -lam / dlam);
    for (Eigen::Index k = 0; k < K; ++k) {
      if (ds(k) < 0) step = std::min(step, -s(k) / ds(k));
    }
    step *= 0.99;

    Eigen::VectorXd f_try(L);
    std::vector<Eigen::VectorXd> g_try(L);
    auto strictly_feasible = [&](double st) {
      const Eigen::VectorXd an = a + st * da;
      if ((an.array() <= 0.0).any() || an.sum() >= 1.0) return false;
      evaluate(an, theta + st * dth, f_try, g_try);
      return (f_try.array() < 0.0).all();
    };
    int guard = 0;
    bool feasible = strictly_feasible(step);
    while (!feasible && guard++ < 60) {
      step *= 0.5;
      feasible = strictly_feasible(step);
    }

    const double r0 = residual_norm(a, f, g, mu, lam, s, tinv);
    guard = 0;
    while (guard++ < 60) {
      if (feasible &&
          residual_norm(a + step * da, f_try, g_try, mu + step * dmu, lam + step * dlam,
                        s + step * ds, tinv) <= (1.0 - 0.01 * step) * r0) {
        break;
      }
      step *= 0.5;
      feasible = strictly_feasible(step);
    }
    if (step < 1e-14) break;

    a += step * da;
    theta += step * dth;
    mu += step * dmu;
    lam += step * dlam;
    s += step * ds;
  }

  // Back to the caller's units.
  sol.iterations = it;
  sol.alpha = a * C;
  sol.capacity_multiplier = lam * unit;
  sol.sign_multipliers = s * unit;
  sol.mu.setZero();
  const double mu_sum = mu.sum();
  for (Eigen::Index t = 0; t < L; ++t) sol.mu(live[t]) = mu(t) / mu_sum;
  sol.theta = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    sol.theta = std::max(sol.theta, 0.5 * sol.alpha.dot(in.gram[t] * sol.alpha));
  }
  sol.objective = in.offsets.dot(sol.alpha) - sol.theta;
  const double ref = std::max({1.0, unit, unit * C});
  sol.mu_active = sol.theta > opt.tol * ref;
  if (!sol.mu_active) {
    sol.mu.setZero();
    for (std::size_t t : live) sol.mu(t) = 1.0 / static_cast<double>(live.size());
  }
  certify(in, sol);
  if (sol.kkt_residual > opt.tol * ref) {
    throw QcqpError("QCQP did not reach tolerance (KKT residual " +
                        std::to_string(sol.kkt_residual) + ")",
                    sol);
  }
  return sol;
}

/// Solves the QCQP whose Gram matrices are G_t(k, l) = <p^k_t, p^l_t> over
/// the given cuts, without forming them in full. The interior point method
/// only sees a working set of cuts and of groups. Cuts outside it stay at
/// alpha_k = 0 and are priced by their reduced cost
/// q_k - sum_t mu_t <p^k_t, u_t> - lambda with u_t = sum_k alpha_k p^k_t.
/// Groups outside it keep mu_t = 0 and are checked against
/// 0.5 ||u_t||^2 <= theta. Violators join the sets and the subproblem is
/// solved again. Empty sets mean "everything".
inline QcqpSolution solve_cuts(std::span<const Cut> cuts, double capacity,
                               const QcqpOptions& opt,
                               std::vector<std::size_t> working = {},
                               std::vector<std::size_t> group_working = {},
                               const QcqpSolution* start = nullptr) {
  const std::size_t K = cuts.size();
  if (K == 0) throw ConfigError("QCQP needs at least one cut");
  const std::size_t T = cuts.front().blocks.size();
  for (const auto& cut : cuts) {
    if (cut.blocks.size() != T) throw ConfigError("cuts disagree on the group count");
  }
  std::vector<char> in_set(K, working.empty() ? 1 : 0);
  for (std::size_t k : working) {
    if (k >= K) throw ConfigError("working set index out of range");
    in_set[k] = 1;
  }
  std::vector<char> group_in(T, group_working.empty() ? 1 : 0);
  for (std::size_t t : group_working) {
    if (t >= T) throw ConfigError("group working set index out of range");
    group_in[t] = 1;
  }
  double qmax = 0.0;
  for (const auto& cut : cuts) qmax = std::max(qmax, cut.offset);
  const double ref = std::max({1.0, qmax, qmax * capacity});
  auto dot = [](const std::vector<double>& x, const std::vector<double>& y) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
    return acc;
  };

  std::optional<QcqpSolution> warm;
  if (start) warm = *start;
  for (;;) {
    std::vector<std::size_t> idx, gidx;
    for (std::size_t k = 0; k < K; ++k) {
      if (in_set[k]) idx.push_back(k);
    }
    for (std::size_t t = 0; t < T; ++t) {
      if (group_in[t]) gidx.push_back(t);
    }
    const auto W = static_cast<Eigen::Index>(idx.size());
    QcqpInput sub;
    sub.capacity = capacity;
    sub.offsets.resize(W);
    for (Eigen::Index r = 0; r < W; ++r) sub.offsets(r) = cuts[idx[r]].offset;
    if (warm) {
      const QcqpSolution* from = &*warm;
      sub.start_alpha = Eigen::VectorXd::Zero(W);
      for (Eigen::Index r = 0; r < W; ++r) {
        const auto k = static_cast<Eigen::Index>(idx[r]);
        if (k < from->alpha.size()) sub.start_alpha(r) = from->alpha(k);
      }
      sub.start_mu = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(gidx.size()));
      for (std::size_t i = 0; i < gidx.size(); ++i) {
        const auto t = static_cast<Eigen::Index>(gidx[i]);
        if (t < from->mu.size()) sub.start_mu(static_cast<Eigen::Index>(i)) = from->mu(t);
      }
    }
    for (std::size_t t : gidx) {
      const auto rows = static_cast<Eigen::Index>(cuts.front().blocks[t].size());
      Eigen::MatrixXd P(rows, W);
      for (Eigen::Index r = 0; r < W; ++r) {
        P.col(r) = Eigen::Map<const Eigen::VectorXd>(cuts[idx[r]].blocks[t].data(), rows);
      }
      sub.gram.push_back(P.transpose() * P);
    }

    QcqpSolution part;
    bool failed = false;
    try {
      part = solve(sub, opt);
    } catch (const QcqpError& e) {
      part = e.best();
      failed = true;
    }

    QcqpSolution full = part;
    full.alpha = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(K));
    full.sign_multipliers = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(K));
    full.mu = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(T));
    for (Eigen::Index r = 0; r < W; ++r) {
      full.alpha(static_cast<Eigen::Index>(idx[r])) = part.alpha(r);
      full.sign_multipliers(static_cast<Eigen::Index>(idx[r])) = part.sign_multipliers(r);
    }
    for (std::size_t i = 0; i < gidx.size(); ++i) {
      full.mu(static_cast<Eigen::Index>(gidx[i])) = part.mu(static_cast<Eigen::Index>(i));
    }
    std::vector<std::vector<double>> u(T);
    for (std::size_t t = 0; t < T; ++t) {
      u[t].assign(cuts.front().blocks[t].size(), 0.0);
      for (Eigen::Index r = 0; r < W; ++r) {
        const double a = part.alpha(r);
        if (a == 0.0) continue;
        const auto& block = cuts[idx[r]].blocks[t];
        for (std::size_t j = 0; j < block.size(); ++j) u[t][j] += a * block[j];
      }
    }

    std::vector<std::pair<double, std::size_t>> entering_groups;
    double theta = part.theta;
    for (std::size_t t = 0; t < T; ++t) {
      if (group_in[t]) continue;
      const double quad = 0.5 * dot(u[t], u[t]);
      theta = std::max(theta, quad);
      if (quad > part.theta + opt.tol * ref) entering_groups.emplace_back(quad, t);
    }
    if (!failed && !entering_groups.empty()) {
      constexpr std::size_t kGroupBatch = 5;
      const std::size_t m = std::min(kGroupBatch, entering_groups.size());
      std::partial_sort(entering_groups.begin(),
                        entering_groups.begin() + static_cast<std::ptrdiff_t>(m),
                        entering_groups.end(), std::greater<>());
      for (std::size_t r = 0; r < m; ++r) group_in[entering_groups[r].second] = 1;
      warm = full;
      continue;
    }
    full.theta = theta;
    full.objective = sub.offsets.dot(part.alpha) - theta;

    double worst = 0.0;
    std::vector<std::pair<double, std::size_t>> entering;
    for (std::size_t k = 0; k < K; ++k) {
      if (in_set[k]) continue;
      double mixed = 0.0;
      for (std::size_t t = 0; t < T; ++t) {
        if (full.mu(static_cast<Eigen::Index>(t)) != 0.0) {
          mixed += full.mu(static_cast<Eigen::Index>(t)) * dot(cuts[k].blocks[t], u[t]);
        }
      }
      const double reduced = cuts[k].offset - mixed - full.capacity_multiplier;
      full.sign_multipliers(static_cast<Eigen::Index>(k)) = std::max(0.0, -reduced);
      worst = std::max(worst, reduced);
      if (reduced > opt.tol * ref) entering.emplace_back(reduced, k);
    }
    if (!failed && !entering.empty()) {
      // A few at a time keeps the subproblem small.
      constexpr std::size_t kBatch = 10;
      const std::size_t m = std::min(kBatch, entering.size());
      std::partial_sort(entering.begin(), entering.begin() + static_cast<std::ptrdiff_t>(m),
                        entering.end(), std::greater<>());
      for (std::size_t r = 0; r < m; ++r) in_set[entering[r].second] = 1;
      warm = full;
      continue;
    }
    // Omitted cuts have alpha_k = 0, so they only add stationarity error.
    full.stationarity = std::max(part.stationarity, worst);
    full.kkt_residual = std::max(full.stationarity, part.complementarity);
    if (failed || full.kkt_residual > opt.tol * ref) {
      throw QcqpError("QCQP did not reach tolerance (KKT residual " +
                          std::to_string(full.kkt_residual) + ")",
                      full);
    }
    return full;
  }
}

/// w_t = -mu_t * sum_k alpha_k p^k_t over the first alpha.size() cuts.
inline std::vector<std::vector<double>> recover_group_weights(
    const QcqpSolution& sol, std::span<const Cut> cuts,
    std::span<const std::size_t> group_sizes) {
  std::vector<std::vector<double>> w(group_sizes.size());
  for (std::size_t t = 0; t < group_sizes.size(); ++t) {
    w[t].assign(group_sizes[t], 0.0);
    const double mu = t < static_cast<std::size_t>(sol.mu.size()) ? sol.mu(t) : 0.0;
    if (mu == 0.0) continue;
    for (Eigen::Index k = 0; k < sol.alpha.size(); ++k) {
      const double coef = sol.alpha(k);
      if (coef == 0.0) continue;
      const auto& block = cuts[k].blocks[t];
      for (std::size_t p = 0; p < block.size(); ++p) w[t][p] -= mu * coef * block[p];
    }
  }
  return w;
}

}  // namespace fgmperf
