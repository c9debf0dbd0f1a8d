#pragma once

// Slow reference solvers for small instances. They share no code with the
// production paths beyond the input types, so agreement is meaningful.

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "fgmperf/bundle.hpp"
#include "fgmperf/cut.hpp"
#include "fgmperf/error.hpp"
#include "fgmperf/feature_group.hpp"
#include "fgmperf/qcqp.hpp"

namespace fgmperf::reference {

/// Every d with 1..B ones over m features, in lexicographic order.
inline std::vector<FeatureGroup> enumerate_groups(std::size_t m, std::size_t B) {
  if (m > 20) throw ConfigError("group enumeration is limited to m <= 20");
  std::vector<FeatureGroup> out;
  for (std::uint32_t mask = 1; mask < (1u << m); ++mask) {
    if (static_cast<std::size_t>(std::popcount(mask)) > B) continue;
    std::vector<std::size_t> members;
    for (std::size_t j = 0; j < m; ++j) {
      if ((mask >> j) & 1u) members.push_back(j);
    }
    out.emplace_back(std::move(members));
  }
  return out;
}

inline double group_value(std::span<const double> c, const FeatureGroup& d) {
  double s = 0.0;
  for (std::size_t j : d.members()) s += c[j] * c[j];
  return s;
}

/// max over d in D of sum_j c_j^2 d_j (the empty group scores 0).
inline double exhaustive_group_max(std::span<const double> c, std::size_t B) {
  double best = 0.0;
  for (const auto& d : enumerate_groups(c.size(), B)) {
    best = std::max(best, group_value(c, d));
  }
  return best;
}

struct QpResult {
  Eigen::VectorXd alpha;
  double value = -std::numeric_limits<double>::infinity();
};

/// max q^T a - 0.5 a^T H a  s.t. a >= 0, sum a <= C, by enumerating every
/// face (support set, capacity active or not) and keeping the best KKT point.
/// Exponential in K; meant for K <= 10.
inline QpResult capped_simplex_qp(const Eigen::MatrixXd& H, const Eigen::VectorXd& q,
                                  double C) {
  const auto K = q.size();
  if (K > 12) throw ConfigError("face enumeration is limited to K <= 12");
  const double scale = std::max({1.0, H.cwiseAbs().maxCoeff(), q.cwiseAbs().maxCoeff()});
  const double tol = 1e-10 * scale * std::max(1.0, C);
  QpResult best;
  auto consider = [&](const Eigen::VectorXd& a, double lam) {
    if ((a.array() < -tol).any() || a.sum() > C + tol || lam < -tol) return;
    const Eigen::VectorXd grad = q - H * a;
    for (Eigen::Index j = 0; j < K; ++j) {
      if (a(j) <= tol && grad(j) - lam > tol) return;
    }
    const Eigen::VectorXd clipped = a.cwiseMax(0.0);
    const double v = q.dot(clipped) - 0.5 * clipped.dot(H * clipped);
    if (v > best.value) {
      best.value = v;
      best.alpha = clipped;
    }
  };
  consider(Eigen::VectorXd::Zero(K), 0.0);
  for (std::uint32_t mask = 1; mask < (1u << K); ++mask) {
    std::vector<Eigen::Index> S;
    for (Eigen::Index j = 0; j < K; ++j) {
      if ((mask >> j) & 1u) S.push_back(j);
    }
    const auto s = static_cast<Eigen::Index>(S.size());
    Eigen::MatrixXd Hs(s, s);
    Eigen::VectorXd qs(s);
    for (Eigen::Index r = 0; r < s; ++r) {
      qs(r) = q(S[r]);
      for (Eigen::Index c = 0; c < s; ++c) Hs(r, c) = H(S[r], S[c]);
    }
    // Capacity slack: H_SS a_S = q_S.
    Eigen::FullPivLU<Eigen::MatrixXd> lu(Hs);
    if (lu.isInvertible()) {
      const Eigen::VectorXd as = lu.solve(qs);
      Eigen::VectorXd a = Eigen::VectorXd::Zero(K);
      for (Eigen::Index r = 0; r < s; ++r) a(S[r]) = as(r);
      consider(a, 0.0);
    }
    // Capacity tight: [H_SS 1; 1^T 0] [a_S; lam] = [q_S; C].
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(s + 1, s + 1);
    M.topLeftCorner(s, s) = Hs;
    M.col(s).head(s).setOnes();
    M.row(s).head(s).setOnes();
    Eigen::VectorXd rhs(s + 1);
    rhs.head(s) = qs;
    rhs(s) = C;
    Eigen::FullPivLU<Eigen::MatrixXd> lu2(M);
    if (lu2.isInvertible()) {
      const Eigen::VectorXd x = lu2.solve(rhs);
      Eigen::VectorXd a = Eigen::VectorXd::Zero(K);
      for (Eigen::Index r = 0; r < s; ++r) a(S[r]) = x(r);
      consider(a, x(s));
    }
  }
  if (!std::isfinite(best.value)) throw Error("face enumeration found no KKT point");
  return best;
}

/// q^T a - max_t 0.5 a^T G_t a, the QCQP objective at a feasible alpha.
inline double qcqp_primal_value(const QcqpInput& in, const Eigen::VectorXd& a) {
  double theta = 0.0;
  for (const auto& G : in.gram) theta = std::max(theta, 0.5 * a.dot(G * a));
  return in.offsets.dot(a) - theta;
}

/// phi(mu) = max_a q^T a - 0.5 a^T (sum_t mu_t G_t) a; an upper bound on the
/// QCQP optimum for every mu in the simplex.
inline double qcqp_dual_value(const QcqpInput& in, std::span<const double> mu) {
  const auto K = in.offsets.size();
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(K, K);
  for (std::size_t t = 0; t < in.gram.size(); ++t) H += mu[t] * in.gram[t];
  return capped_simplex_qp(H, in.offsets, in.capacity).value;
}

/// min over the mu-simplex of phi(mu) by pattern search: the incumbent moves
/// to the best point of a lattice around it, and the lattice is halved only
/// when no point improves. `levels` halvings are performed. T <= 4.
inline double qcqp_mu_search(const QcqpInput& in, int levels = 24) {
  const std::size_t T = in.gram.size();
  if (T == 0 || T > 4) throw ConfigError("mu search supports 1 <= T <= 4");
  std::vector<double> center(T, 1.0 / static_cast<double>(T));
  double best = qcqp_dual_value(in, center);
  if (T == 1) return best;
  double radius = 1.0;
  constexpr int kSteps = 2;  // grid points per side of the window
  constexpr int kMaxMoves = 10000;
  std::vector<double> mu(T);
  int moves = 0;
  for (int level = 0; level < levels && moves < kMaxMoves; ++moves) {
    const double h = radius / kSteps;
    std::vector<double> incumbent = center;
    bool improved = false;
    // Walk the first T-1 coordinates; the last closes the simplex.
    std::vector<int> idx(T - 1, -kSteps);
    for (;;) {
      double used = 0.0;
      bool ok = true;
      for (std::size_t t = 0; t + 1 < T; ++t) {
        mu[t] = center[t] + idx[t] * h;
        if (mu[t] < -1e-15) ok = false;
        mu[t] = std::max(0.0, mu[t]);
        used += mu[t];
      }
      mu[T - 1] = 1.0 - used;
      if (ok && mu[T - 1] >= -1e-15) {
        mu[T - 1] = std::max(0.0, mu[T - 1]);
        const double v = qcqp_dual_value(in, mu);
        if (v < best - 1e-15 * std::max(1.0, std::abs(best))) {
          best = v;
          incumbent = mu;
          improved = true;
        }
      }
      std::size_t t = 0;
      while (t + 1 < T && ++idx[t] > kSteps) idx[t++] = -kSteps;
      if (t + 1 >= T) break;
    }
    center = incumbent;
    if (!improved) {
      radius *= 0.5;
      ++level;
    }
  }
  return best;
}

/// min of phi(mu) over a uniform grid on the mu-simplex, T <= 2.  The inner
/// maximisation is exact, so the error is second order in the step.
inline double qcqp_mu_grid(const QcqpInput& in, int steps = 1000) {
  const std::size_t T = in.gram.size();
  if (T < 1 || T > 2) throw ConfigError("mu grid supports T in {1, 2}");
  if (T == 1) return qcqp_dual_value(in, std::vector<double>{1.0});
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= steps; ++i) {
    const double m0 = static_cast<double>(i) / steps;
    best = std::min(best, qcqp_dual_value(in, std::vector<double>{m0, 1.0 - m0}));
  }
  return best;
}

/// max of the QCQP objective over a uniform grid on {a >= 0, sum a <= C}.
/// K <= 2; a lower bound on the optimum, exact up to the grid step.
inline double qcqp_alpha_grid(const QcqpInput& in, int steps = 2000) {
  const auto K = in.offsets.size();
  if (K < 1 || K > 2) throw ConfigError("alpha grid supports K in {1, 2}");
  const double h = in.capacity / steps;
  double best = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd a(K);
  for (int i = 0; i <= steps; ++i) {
    a(0) = i * h;
    if (K == 1) {
      best = std::max(best, qcqp_primal_value(in, a));
      continue;
    }
    for (int j = 0; i + j <= steps; ++j) {
      a(1) = j * h;
      best = std::max(best, qcqp_primal_value(in, a));
    }
  }
  return best;
}

/// 0.5 (sum_t ||w_t||)^2 + C max(0, max_k q_k + sum_t <p^k_t, w_t>): the
/// cutting-plane model J_K at w.
inline double cutting_plane_objective(std::span<const Cut> cuts,
                                      const GroupWeights& w, double C) {
  double hinge = 0.0;
  for (const auto& cut : cuts) {
    double v = cut.offset;
    for (std::size_t t = 0; t < w.size(); ++t) {
      for (std::size_t j = 0; j < w[t].size(); ++j) v += cut.blocks[t][j] * w[t][j];
    }
    hinge = std::max(hinge, v);
  }
  return group_regularizer(w) + C * hinge;
}

}  // namespace fgmperf::reference
