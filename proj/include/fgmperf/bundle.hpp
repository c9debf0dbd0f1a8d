#pragma once

// Inner layer: bundle method over a fixed group pool.
//
// Minimises J(w) = 0.5 (sum_t ||w_t||)^2 + C R_emp(w) with
//   R_emp(w) = max(0, max_y' loss(y', y)/n - sum_t <w_t, a^t_y'>),
//   a^t_y' = (1/n) sum_i (y_i - y'_i) (x_i ⊙ d^t).
// Each iteration asks the label oracle for the most violated y', turns it
// into a cut (p^k, q^k) and re-solves the reduced QCQP. The loop stops once
// min_k J(w^k) - J_K(w^K) <= eps.

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "fgmperf/contingency.hpp"
#include "fgmperf/cut.hpp"
#include "fgmperf/data.hpp"
#include "fgmperf/error.hpp"
#include "fgmperf/feature_group.hpp"
#include "fgmperf/label_oracle.hpp"
#include "fgmperf/qcqp.hpp"

namespace fgmperf {

using GroupWeights = std::vector<std::vector<double>>;

struct RiskEvaluation {
  double risk = 0.0;  // R_emp
  OracleResult witness;
};

/// R_emp at the given group weights, with the maximising labeling.
inline RiskEvaluation empirical_risk(const GroupWeights& weights,
                                     std::span<const FeatureGroup> groups,
                                     const SparseDataset& ds,
                                     const LossSpec& spec) {
  const auto v = decision_values(groups, weights, ds);
  RiskEvaluation out;
  out.witness = most_violated_y(spec, ds.labels(), v);
  out.risk = std::max(0.0, out.witness.violation()) /
             static_cast<double>(ds.size());
  return out;
}

/// 0.5 (sum_t ||w_t||_2)^2
inline double group_regularizer(const GroupWeights& weights) {
  double sum = 0.0;
  for (const auto& block : weights) {
    double sq = 0.0;
    for (double w : block) sq += w * w;
    sum += std::sqrt(sq);
  }
  return 0.5 * sum * sum;
}

/// Restriction of -(1/n) * difference to a group's members.
inline std::vector<double> cut_block(const std::vector<Feature>& difference,
                                     const FeatureGroup& group, std::size_t n) {
  std::vector<double> block(group.size(), 0.0);
  auto members = group.members();
  std::size_t p = 0;
  for (const Feature& f : difference) {
    while (p < members.size() && members[p] < f.index) ++p;
    if (p == members.size()) break;
    if (members[p] == f.index) block[p] = -f.value / static_cast<double>(n);
  }
  return block;
}

inline Cut make_cut(const OracleResult& witness,
                    std::span<const FeatureGroup> groups,
                    const SparseDataset& ds) {
  Cut cut;
  cut.y_config = witness.y_prime;
  cut.table = witness.table;
  cut.offset = witness.loss / static_cast<double>(ds.size());

  std::vector<double> dense(ds.dimension(), 0.0);
  std::vector<char> touched(ds.dimension(), 0);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const int diff = ds.label(i) - witness.y_prime[i];
    if (diff == 0) continue;
    for (const Feature& f : ds.example(i)) {
      dense[f.index] += diff * f.value;
      touched[f.index] = 1;
    }
  }
  for (std::size_t j = 0; j < dense.size(); ++j) {
    if (touched[j] && dense[j] != 0.0) cut.difference.push_back({j, dense[j]});
  }
  cut.blocks.reserve(groups.size());
  for (const auto& g : groups) {
    cut.blocks.push_back(cut_block(cut.difference, g, ds.size()));
  }
  return cut;
}

struct InnerTrace {
  std::size_t iteration = 0;
  double objective = 0.0;    // J at the current iterate
  double lower_bound = 0.0;  // J_K
  double gap = 0.0;          // min_k J - J_K
  std::size_t cuts = 0;
};

struct BundleOptions {
  double capacity = 1.0;
  double eps = 1e-3;
  std::size_t max_cuts = 200;
  QcqpOptions qcqp{1e-8, 200, false};
  std::function<void(const InnerTrace&)> on_iteration;
};

enum class InnerStop { kGap, kNullCut, kCutLimit };

/// The iterate with the smallest J seen so far, with the dual variables that
/// produced it (alpha covers the first alpha.size() cuts).
struct IterateSnapshot {
  GroupWeights weights;
  Eigen::VectorXd alpha;
  Eigen::VectorXd mu;
  double objective = std::numeric_limits<double>::infinity();
};

struct BundleState {
  std::vector<FeatureGroup> groups;
  std::vector<Cut> cuts;
  QcqpSolution solution;
  GroupWeights weights;
  /// (J, J_K) for every iterate evaluated by the last run.
  std::vector<std::pair<double, double>> history;
  IterateSnapshot best;
  double lower_bound = 0.0;
  double gap = std::numeric_limits<double>::infinity();
  bool converged = false;
  InnerStop stop = InnerStop::kCutLimit;
  std::size_t cuts_added = 0;
  std::size_t qcqp_failures = 0;
};

class BundleSolver {
 public:
  BundleSolver(const SparseDataset& ds, LossSpec spec, BundleOptions options)
      : ds_(ds), spec_(spec), opt_(std::move(options)) {
    if (!(opt_.capacity > 0.0)) throw ConfigError("C must be positive");
    if (!(opt_.eps > 0.0)) throw ConfigError("eps must be positive");
    if (opt_.max_cuts == 0) throw ConfigError("max_cuts must be at least 1");
    ds_.require_nondegenerate();
    spec_.validate_for(ds_.size());
  }

  /// Appends a group; existing cuts get a block for it and the old best
  /// iterate stays valid with a zero block.
  void add_group(FeatureGroup group) {
    for (auto& cut : st_.cuts) {
      cut.blocks.push_back(cut_block(cut.difference, group, ds_.size()));
    }
    st_.weights.emplace_back(group.size(), 0.0);
    if (std::isfinite(st_.best.objective)) {
      st_.best.weights.emplace_back(group.size(), 0.0);
      const auto T = st_.best.mu.size();
      st_.best.mu.conservativeResize(T + 1);
      st_.best.mu(T) = 0.0;
    }
    st_.groups.push_back(std::move(group));
    stale_ = true;
  }

  const BundleState& state() const { return st_; }
  const SparseDataset& dataset() const { return ds_; }
  const LossSpec& loss() const { return spec_; }
  const BundleOptions& options() const { return opt_; }

  /// Runs the cutting-plane loop from the current cuts.
  const BundleState& run() {
    if (st_.groups.empty()) throw ConfigError("group pool is empty");
    st_.history.clear();
    st_.cuts_added = 0;
    st_.converged = false;
    if (stale_) {
      if (st_.cuts.empty()) {
        for (std::size_t t = 0; t < st_.groups.size(); ++t) {
          st_.weights[t].assign(st_.groups[t].size(), 0.0);
        }
        st_.lower_bound = 0.0;
        st_.solution = {};
        st_.solution.mu =
            Eigen::VectorXd::Constant(static_cast<Eigen::Index>(st_.groups.size()),
                                      1.0 / static_cast<double>(st_.groups.size()));
      } else {
        resolve();
      }
      stale_ = false;
    }

    const double C = opt_.capacity;
    for (std::size_t iter = 0;; ++iter) {
      RiskEvaluation eval = empirical_risk(st_.weights, st_.groups, ds_, spec_);
      const double J = group_regularizer(st_.weights) + C * eval.risk;
      st_.history.emplace_back(J, st_.lower_bound);
      if (J < st_.best.objective) {
        st_.best.weights = st_.weights;
        st_.best.alpha = st_.solution.alpha;
        st_.best.mu = st_.solution.mu;
        st_.best.objective = J;
      }
      st_.gap = st_.best.objective - st_.lower_bound;
      if (opt_.on_iteration) {
        opt_.on_iteration({iter, J, st_.lower_bound, st_.gap, st_.cuts.size()});
      }
      if (st_.gap <= opt_.eps) {
        st_.converged = true;
        st_.stop = InnerStop::kGap;
        break;
      }
      if (C * eval.risk <= opt_.eps / 10.0) {
        st_.converged = true;
        st_.stop = InnerStop::kNullCut;
        break;
      }
      if (st_.cuts_added == opt_.max_cuts) {
        st_.stop = InnerStop::kCutLimit;
        break;
      }
      st_.cuts.push_back(make_cut(eval.witness, st_.groups, ds_));
      ++st_.cuts_added;
      resolve();
    }
    return st_;
  }

 private:
  void resolve() {
    // Previous support plus any cuts it has not seen yet.
    std::vector<std::size_t> working;
    const Eigen::VectorXd& prev = st_.solution.alpha;
    const double big = prev.size() > 0 ? prev.maxCoeff() : 0.0;
    for (std::size_t k = 0; k < st_.cuts.size(); ++k) {
      const auto e = static_cast<Eigen::Index>(k);
      if (e >= prev.size() || prev(e) > 1e-6 * big) working.push_back(k);
    }
    // Groups carrying weight last time plus any new ones.
    std::vector<std::size_t> group_working;
    const Eigen::VectorXd& prev_mu = st_.solution.mu;
    if (prev_mu.size() > 0) {
      const double top = prev_mu.maxCoeff();
      for (std::size_t t = 0; t < st_.groups.size(); ++t) {
        const auto e = static_cast<Eigen::Index>(t);
        if (e >= prev_mu.size() || prev_mu(e) > 1e-6 * top) group_working.push_back(t);
      }
    }
    try {
      const QcqpSolution previous = st_.solution;
      st_.solution = solve_cuts(st_.cuts, opt_.capacity, opt_.qcqp, std::move(working),
                                std::move(group_working),
                                previous.alpha.size() > 0 ? &previous : nullptr);
    } catch (const QcqpError& e) {
      // Any feasible alpha still yields a valid lower bound.
      st_.solution = e.best();
      ++st_.qcqp_failures;
    }
    std::vector<std::size_t> sizes;
    for (const auto& g : st_.groups) sizes.push_back(g.size());
    st_.weights = recover_group_weights(st_.solution, st_.cuts, sizes);
    st_.lower_bound = st_.solution.objective;
  }

  const SparseDataset& ds_;
  LossSpec spec_;
  BundleOptions opt_;
  BundleState st_;
  bool stale_ = true;
};

/// Cutting-plane run on a fixed pool, starting from no cuts.
inline BundleState run_inner(const SparseDataset& ds, const LossSpec& spec,
                             std::span<const FeatureGroup> groups, double C,
                             double eps, std::size_t max_cuts) {
  BundleOptions opt;
  opt.capacity = C;
  opt.eps = eps;
  opt.max_cuts = max_cuts;
  BundleSolver solver(ds, spec, opt);
  for (const auto& g : groups) solver.add_group(g);
  return solver.run();
}

}  // namespace fgmperf
