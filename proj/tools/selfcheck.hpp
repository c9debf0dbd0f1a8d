#pragma once

// Randomised comparison of the fast oracles against their brute-force
// references on small instances.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "fgmperf/fgmperf.hpp"
#include "fgmperf/reference.hpp"

namespace fgmperf::cli {

struct SelfcheckArgs {
  std::size_t n_cap = 12;     // largest n for the label oracle (<= 20)
  std::size_t trials = 40;    // random cases per configuration
  std::uint64_t seed = 1;
  /// Shift every fast result by 1e-3 so the check must fail.
  bool perturb = false;
};

struct SuiteResult {
  std::string name;
  std::size_t cases = 0;
  double max_deviation = 0.0;
  double tolerance = 0.0;
  bool pass() const { return max_deviation <= tolerance; }
};

namespace detail {

inline std::vector<int> random_labels(std::mt19937_64& rng, std::size_t n) {
  std::vector<int> y(n);
  std::bernoulli_distribution coin(0.4);
  for (auto& v : y) v = coin(rng) ? 1 : -1;
  y[0] = 1;
  y[n - 1] = -1;
  return y;
}

inline SuiteResult check_label_oracle(const SelfcheckArgs& a, std::mt19937_64& rng) {
  SuiteResult r{"label_oracle", 0, 0.0, 1e-9};
  std::normal_distribution<double> gauss(0.0, 2.0);
  const double shift = a.perturb ? 1e-3 : 0.0;
  for (std::size_t n = 4; n <= std::min<std::size_t>(a.n_cap, 20); ++n) {
    const std::vector<LossSpec> specs = {LossSpec::hamming(),   LossSpec::fbeta(1.0),
                                         LossSpec::fbeta(2.0),  LossSpec::prec_at(n / 3 + 1),
                                         LossSpec::rec_at(n / 2), LossSpec::prbep()};
    for (const auto& spec : specs) {
      for (std::size_t t = 0; t < a.trials; ++t) {
        const auto y = random_labels(rng, n);
        std::vector<double> v(n);
        for (auto& x : v) x = gauss(rng);
        const double fast = most_violated_y(spec, y, v).objective + shift;
        const double slow = brute_force_most_violated_y(spec, y, v).objective;
        r.max_deviation = std::max(r.max_deviation, std::abs(fast - slow) / std::max(1.0, std::abs(slow)));
        ++r.cases;
      }
    }
  }
  return r;
}

inline SuiteResult check_group_oracle(const SelfcheckArgs& a, std::mt19937_64& rng) {
  SuiteResult r{"group_oracle", 0, 0.0, 1e-12};
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double shift = a.perturb ? 1e-3 : 0.0;
  for (std::size_t m = 2; m <= 12; ++m) {
    for (std::size_t B = 1; B <= 3; ++B) {
      for (std::size_t t = 0; t < a.trials; ++t) {
        std::vector<double> c(m);
        for (auto& x : c) x = gauss(rng);
        const double fast = reference::group_value(c, most_violated_group(c, B)) + shift;
        const double slow = reference::exhaustive_group_max(c, B);
        r.max_deviation = std::max(r.max_deviation, std::abs(fast - slow) / std::max(1.0, slow));
        ++r.cases;
      }
    }
  }
  return r;
}

inline QcqpInput random_qcqp(std::mt19937_64& rng, Eigen::Index K, std::size_t T, Eigen::Index rank) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  QcqpInput in;
  for (std::size_t t = 0; t < T; ++t) {
    Eigen::MatrixXd P(rank, K);
    for (Eigen::Index i = 0; i < P.size(); ++i) P.data()[i] = gauss(rng);
    in.gram.push_back(P.transpose() * P);
  }
  in.offsets.resize(K);
  for (Eigen::Index k = 0; k < K; ++k) in.offsets(k) = std::abs(gauss(rng));
  in.capacity = 0.5 + 4.0 * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  return in;
}

inline SuiteResult check_qcqp(const SelfcheckArgs& a, std::mt19937_64& rng) {
  SuiteResult r{"qcqp", 0, 0.0, 1e-6};
  const double shift = a.perturb ? 1e-3 : 0.0;
  const std::size_t trials = std::max<std::size_t>(1, a.trials / 4);
  for (std::size_t T = 1; T <= 3; ++T) {
    for (Eigen::Index K = 1; K <= 5; ++K) {
      for (std::size_t t = 0; t < trials; ++t) {
        const QcqpInput in = random_qcqp(rng, K, T, 3);
        const double fast = solve(in).objective + shift;
        const double slow = reference::qcqp_mu_search(in);
        r.max_deviation = std::max(r.max_deviation, std::abs(fast - slow) / std::max(1.0, std::abs(slow)));
        ++r.cases;
      }
    }
  }
  return r;
}

}  // namespace detail

inline std::vector<SuiteResult> selfcheck_suites(const SelfcheckArgs& a) {
  if (a.n_cap < 4 || a.n_cap > 20) throw ConfigError("--n-cap must lie in [4, 20]");
  if (a.trials == 0) throw ConfigError("--trials must be at least 1");
  std::mt19937_64 rng(a.seed);
  return {detail::check_label_oracle(a, rng), detail::check_group_oracle(a, rng),
          detail::check_qcqp(a, rng)};
}

inline bool run_selfcheck(const SelfcheckArgs& a, std::ostream& out) {
  bool ok = true;
  for (const auto& s : selfcheck_suites(a)) {
    out << s.name << ' ' << (s.pass() ? "PASS" : "FAIL") << " cases=" << s.cases
        << " max_dev=" << text::format_double(s.max_deviation)
        << " tol=" << text::format_double(s.tolerance) << '\n';
    ok = ok && s.pass();
  }
  return ok;
}

}  // namespace fgmperf::cli
