#pragma once

// Outer layer: grows the group pool with the most violated feature group and
// re-optimises over the pool until the generated group is already present.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string_view>
#include <vector>

#include "fgmperf/bundle.hpp"
#include "fgmperf/contingency.hpp"
#include "fgmperf/cut.hpp"
#include "fgmperf/data.hpp"
#include "fgmperf/error.hpp"
#include "fgmperf/feature_group.hpp"

namespace fgmperf {

/// c_j = sum_k alpha_k sum_i (y_i - y^k_i) x_ij, over cuts with alpha_k != 0.
inline std::vector<double> feature_scores(std::span<const Cut> cuts,
                                          const Eigen::VectorXd& alpha,
                                          std::size_t dimension) {
  std::vector<double> c(dimension, 0.0);
  const auto K = std::min<std::size_t>(cuts.size(),
                                       static_cast<std::size_t>(alpha.size()));
  for (std::size_t k = 0; k < K; ++k) {
    const double a = alpha(static_cast<Eigen::Index>(k));
    if (a == 0.0) continue;
    for (const Feature& f : cuts[k].difference) {
      if (f.index < dimension) c[f.index] += a * f.value;
    }
  }
  return c;
}

/// Scores for the first outer iteration: the labeling y' = -y at alpha = C,
/// i.e. c_j = 2C sum_i y_i x_ij.
inline std::vector<double> initial_feature_scores(const SparseDataset& ds,
                                                  double C) {
  std::vector<double> c(ds.dimension(), 0.0);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double coef = 2.0 * C * ds.label(i);
    for (const Feature& f : ds.example(i)) c[f.index] += coef * f.value;
  }
  return c;
}

/// The B features with largest c_j^2 (ties by lower index), skipping
/// `excluded` and zero scores. Exact maximiser of sum_j c_j^2 d_j over the
/// budgeted domain.
inline FeatureGroup most_violated_group(std::span<const double> c,
                                        std::size_t budget,
                                        std::span<const std::size_t> excluded = {}) {
  if (budget == 0) throw ConfigError("budget B must be at least 1");
  std::vector<std::size_t> idx;
  for (std::size_t j = 0; j < c.size(); ++j) {
    if (c[j] == 0.0) continue;
    if (std::find(excluded.begin(), excluded.end(), j) != excluded.end()) continue;
    idx.push_back(j);
  }
  if (idx.empty()) {
    throw DataError("no informative features for current cuts");
  }
  auto better = [&](std::size_t a, std::size_t b) {
    const double ca = c[a] * c[a], cb = c[b] * c[b];
    return ca > cb || (ca == cb && a < b);
  };
  const std::size_t keep = std::min(budget, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(keep),
                    idx.end(), better);
  idx.resize(keep);
  return FeatureGroup(std::move(idx));
}

struct GroupPool {
  std::vector<FeatureGroup> groups;
  std::size_t budget = 0;
  /// Best objective J after each outer iteration.
  std::vector<double> history;

  bool contains(const FeatureGroup& g) const {
    return std::find(groups.begin(), groups.end(), g) != groups.end();
  }
};

enum class OuterStop { kDuplicateGroup, kSmallImprovement, kMaxOuter, kNoInformativeFeatures };

inline std::string_view outer_stop_name(OuterStop s) {
  switch (s) {
    case OuterStop::kDuplicateGroup: return "duplicate-group";
    case OuterStop::kSmallImprovement: return "small-improvement";
    case OuterStop::kMaxOuter: return "max-outer";
    case OuterStop::kNoInformativeFeatures: return "no-informative-features";
  }
  return "?";
}

struct OuterTrace {
  std::size_t iteration = 0;  // 1-based t
  std::size_t groups = 0;
  double objective = 0.0;
  double lower_bound = 0.0;
  double gap = 0.0;
  std::size_t cuts = 0;
  bool inner_converged = false;
};

struct TwoLayerOptions {
  std::size_t budget = 10;
  double capacity = 1.0;
  double eps = 1e-3;
  std::size_t max_outer = 50;
  std::size_t max_cuts = 200;
  /// Stop when |J_prev - J| / |J_prev| falls below this; 0 disables.
  double outer_tol = 1e-4;
  std::vector<std::size_t> excluded;
  QcqpOptions qcqp{1e-8, 200, false};
  std::function<void(const InnerTrace&)> on_inner;
  std::function<void(const OuterTrace&)> on_outer;
};

struct TwoLayerResult {
  GroupPool pool;
  BundleState bundle;
  OuterStop stop = OuterStop::kMaxOuter;
  /// Every inner run met its eps-gap.
  bool inner_converged = true;
};

/// Outer layer: grow the group pool. Cuts persist across outer iterations: each new group
/// extends every stored cut with its block, then the inner layer resumes.
inline TwoLayerResult run_two_layer(const SparseDataset& ds,
                                    const LossSpec& spec,
                                    const TwoLayerOptions& opt) {
  if (opt.budget == 0) throw ConfigError("budget B must be at least 1");
  if (opt.max_outer == 0) throw ConfigError("max_outer must be at least 1");
  BundleOptions bopt;
  bopt.capacity = opt.capacity;
  bopt.eps = opt.eps;
  bopt.max_cuts = opt.max_cuts;
  bopt.qcqp = opt.qcqp;
  bopt.on_iteration = opt.on_inner;
  BundleSolver solver(ds, spec, bopt);

  TwoLayerResult res;
  res.pool.budget = opt.budget;
  std::vector<std::size_t> excluded = opt.excluded;
  std::sort(excluded.begin(), excluded.end());

  for (std::size_t t = 1;; ++t) {
    std::vector<double> c =
        t == 1 ? initial_feature_scores(ds, opt.capacity)
               : feature_scores(solver.state().cuts, solver.state().solution.alpha,
                                ds.dimension());
    FeatureGroup group;
    try {
      group = most_violated_group(c, opt.budget, excluded);
    } catch (const DataError&) {
      if (t == 1) throw;
      res.stop = OuterStop::kNoInformativeFeatures;
      break;
    }
    if (res.pool.contains(group)) {
      res.stop = OuterStop::kDuplicateGroup;
      break;
    }
    res.pool.groups.push_back(group);
    solver.add_group(std::move(group));
    const BundleState& st = solver.run();
    res.inner_converged = res.inner_converged && st.converged;
    const double prev = res.pool.history.empty() ? 0.0 : res.pool.history.back();
    res.pool.history.push_back(st.best.objective);
    if (opt.on_outer) {
      opt.on_outer({t, res.pool.groups.size(), st.best.objective, st.lower_bound,
                    st.gap, st.cuts.size(), st.converged});
    }
    if (t >= 2 && opt.outer_tol > 0.0 &&
        std::abs(prev - st.best.objective) <
            opt.outer_tol * std::max(std::abs(prev), 1e-300)) {
      res.stop = OuterStop::kSmallImprovement;
      break;
    }
    if (t == opt.max_outer) {
      res.stop = OuterStop::kMaxOuter;
      break;
    }
  }
  res.bundle = solver.state();
  return res;
}

/// Shorthand taking the main parameters directly.
inline TwoLayerResult run_two_layer(const SparseDataset& ds,
                                    const LossSpec& spec, std::size_t budget,
                                    double C, double eps,
                                    std::size_t max_outer) {
  TwoLayerOptions opt;
  opt.budget = budget;
  opt.capacity = C;
  opt.eps = eps;
  opt.max_outer = max_outer;
  return run_two_layer(ds, spec, opt);
}

}  // namespace fgmperf
