#pragma once

// Most violated label configuration for the structured hinge.
//
// Both oracles maximise  loss(y', y) + sum_i y'_i v_i  over the admissible
// y'. The hinge term of the training objective is
//   loss - sum_i (y_i - y'_i) v_i = objective - constant,
// with constant = sum_i y_i v_i, so the constant is reported separately.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "fgmperf/contingency.hpp"
#include "fgmperf/data.hpp"
#include "fgmperf/error.hpp"
#include "fgmperf/feature_group.hpp"

namespace fgmperf {

struct OracleResult {
  std::vector<int> y_prime;
  double objective = 0.0;  // loss + sum_i y'_i v_i
  double constant = 0.0;   // sum_i y_i v_i
  double loss = 0.0;
  ContingencyTable table;

  /// loss - sum_i (y_i - y'_i) v_i; may be negative, never clamped here.
  double violation() const { return objective - constant; }
};

/// v_i = sum_t <w_t, x_i ⊙ d^t> for every example.
inline std::vector<double> decision_values(
    std::span<const FeatureGroup> groups,
    std::span<const std::vector<double>> blocks, const SparseDataset& ds) {
  std::vector<double> dense(ds.dimension(), 0.0);
  bool any = false;
  for (std::size_t t = 0; t < groups.size(); ++t) {
    for (std::size_t p = 0; p < groups[t].size(); ++p) {
      const std::size_t j = groups[t][p];
      if (j >= dense.size()) dense.resize(j + 1, 0.0);
      dense[j] += blocks[t][p];
      any = true;
    }
  }
  std::vector<double> v(ds.size(), 0.0);
  if (!any) return v;
  for (std::size_t i = 0; i < ds.size(); ++i) v[i] = ds.example(i).dot(dense);
  return v;
}

namespace detail {

inline void check_oracle_inputs(const LossSpec& spec, std::span<const int> y,
                                std::span<const double> v, std::size_t& p,
                                std::size_t& q) {
  if (y.size() != v.size()) {
    throw DataError("labels and decision values differ in length");
  }
  p = static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
  q = y.size() - p;
  if (p == 0 || q == 0) throw DataError("degenerate label distribution");
  spec.validate_for(y.size());
}

// Indices of one class sorted by v descending, ties by index ascending.
inline std::vector<std::size_t> ranked(std::span<const int> y,
                                       std::span<const double> v, int cls) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] == cls) idx.push_back(i);
  }
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
  return idx;
}

}  // namespace detail

/// Exact most violated y' in O(n log n + #admissible (a,b) pairs).
///
/// For a fixed number a of positives labelled +1 the best choice is the a
/// highest-scoring positives; likewise for the b negatives labelled +1. The
/// search enumerates the admissible (a,b) grid. Ties go to larger a, then
/// smaller b.
inline OracleResult most_violated_y(const LossSpec& spec,
                                    std::span<const int> y,
                                    std::span<const double> v) {
  std::size_t p = 0, q = 0;
  detail::check_oracle_inputs(spec, y, v, p, q);
  const std::size_t n = y.size();

  OracleResult res;
  res.constant = 0.0;
  for (std::size_t i = 0; i < n; ++i) res.constant += y[i] * v[i];

  if (spec.kind == LossKind::kHamming) {
    // Decomposes: flipping i gains 2 - y_i v_i against keeping y_i v_i.
    res.y_prime.assign(y.begin(), y.end());
    double margin = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double yv = y[i] * v[i];
      if (yv < 1.0) {
        res.y_prime[i] = -y[i];
        margin -= yv;
      } else {
        margin += yv;
      }
    }
    res.table = table_from_labels(y, res.y_prime);
    res.loss = loss_value_unchecked(spec, res.table);
    res.objective = res.loss + margin;
    return res;
  }

  const auto pos = detail::ranked(y, v, 1);
  const auto neg = detail::ranked(y, v, -1);
  // Prefix sums of v over the ranked blocks.
  std::vector<double> pos_prefix(p + 1, 0.0), neg_prefix(q + 1, 0.0);
  for (std::size_t r = 0; r < p; ++r) pos_prefix[r + 1] = pos_prefix[r] + v[pos[r]];
  for (std::size_t r = 0; r < q; ++r) neg_prefix[r + 1] = neg_prefix[r] + v[neg[r]];

  const auto P = static_cast<std::int64_t>(p);
  const auto Q = static_cast<std::int64_t>(q);
  std::int64_t best_a = -1, best_b = -1;
  double best = 0.0;
  auto consider = [&](std::int64_t a, std::int64_t b) {
    ContingencyTable t{a, b, P - a, Q - b};
    const double val = loss_value_unchecked(spec, t) +
                       (2.0 * pos_prefix[a] - pos_prefix[p]) +
                       (2.0 * neg_prefix[b] - neg_prefix[q]);
    if (best_a < 0 || val > best) {
      best = val;
      best_a = a;
      best_b = b;
    }
  };

  switch (spec.kind) {
    case LossKind::kFbeta:
      for (std::int64_t a = P; a >= 0; --a) {
        for (std::int64_t b = 0; b <= Q; ++b) consider(a, b);
      }
      break;
    case LossKind::kPrecAtK:
    case LossKind::kRecAtK: {
      const auto k = static_cast<std::int64_t>(spec.k);
      for (std::int64_t a = std::min(P, k); a >= std::max<std::int64_t>(0, k - Q);
           --a) {
        consider(a, k - a);
      }
      break;
    }
    case LossKind::kPrbep:
      for (std::int64_t a = P; a >= std::max<std::int64_t>(0, P - Q); --a) {
        consider(a, P - a);
      }
      break;
    case LossKind::kHamming:
      break;
  }

  res.y_prime.assign(n, -1);
  for (std::int64_t r = 0; r < best_a; ++r) res.y_prime[pos[r]] = 1;
  for (std::int64_t r = 0; r < best_b; ++r) res.y_prime[neg[r]] = 1;
  res.table = {best_a, best_b, P - best_a, Q - best_b};
  res.loss = loss_value_unchecked(spec, res.table);
  res.objective = best;
  return res;
}

/// Reference oracle: enumerates all 2^n labelings (n <= 20).
inline OracleResult brute_force_most_violated_y(const LossSpec& spec,
                                                std::span<const int> y,
                                                std::span<const double> v) {
  constexpr std::size_t kMaxN = 20;
  if (y.size() > kMaxN) {
    throw ConfigError("brute-force oracle is limited to n <= 20");
  }
  std::size_t p = 0, q = 0;
  detail::check_oracle_inputs(spec, y, v, p, q);
  const std::size_t n = y.size();

  OracleResult res;
  for (std::size_t i = 0; i < n; ++i) res.constant += y[i] * v[i];

  std::vector<int> cand(n);
  bool found = false;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    for (std::size_t i = 0; i < n; ++i) cand[i] = (mask >> i) & 1u ? 1 : -1;
    const ContingencyTable t = table_from_labels(y, cand);
    if (!admissible(spec, t)) continue;
    double val = loss_value_unchecked(spec, t);
    for (std::size_t i = 0; i < n; ++i) val += cand[i] * v[i];
    if (!found || val > res.objective) {
      found = true;
      res.objective = val;
      res.y_prime = cand;
      res.table = t;
    }
  }
  res.loss = loss_value_unchecked(spec, res.table);
  return res;
}

}  // namespace fgmperf
