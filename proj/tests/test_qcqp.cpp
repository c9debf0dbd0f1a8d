#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "fgmperf/bundle.hpp"
#include "fgmperf/qcqp.hpp"
#include "fgmperf/reference.hpp"
#include "qcqp_checks.hpp"
#include "synthetic.hpp"

using namespace fgmperf;

namespace {

QcqpInput one_by_one(double g, double q, double C) {
  QcqpInput in;
  in.gram.push_back(Eigen::MatrixXd::Constant(1, 1, g));
  in.offsets = Eigen::VectorXd::Constant(1, q);
  in.capacity = C;
  return in;
}

}  // namespace

TEST(Qcqp, ClosedFormOneCut) {
  const auto s = solve(one_by_one(4.0, 3.0, 100.0));
  EXPECT_NEAR(s.alpha(0), 0.75, 1e-6);
  EXPECT_NEAR(s.theta, 1.125, 1e-6);
  EXPECT_NEAR(s.objective, 1.125, 1e-9);
  EXPECT_NEAR(s.mu(0), 1.0, 1e-12);
}

TEST(Qcqp, ClosedFormCapacityBinds) {
  // Unconstrained optimum 0.75 exceeds C = 0.5.
  const auto s = solve(one_by_one(4.0, 3.0, 0.5));
  EXPECT_NEAR(s.alpha(0), 0.5, 1e-9);
  EXPECT_NEAR(s.objective, 1.5 - 0.5, 1e-9);
}

TEST(Qcqp, NonPositiveOffsetsGiveZero) {
  std::mt19937_64 rng(1);
  auto in = qcqp_checks::random_instance(rng, 4, 2, 3);
  in.offsets << -1.0, 0.0, -0.5, -2.0;
  const auto s = solve(in);
  EXPECT_NEAR(s.alpha.cwiseAbs().maxCoeff(), 0.0, 1e-9);
  EXPECT_NEAR(s.theta, 0.0, 1e-12);
  EXPECT_NEAR(s.objective, 0.0, 1e-9);
}

TEST(Qcqp, MatchesDenseGrid) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto in = qcqp_checks::random_instance(rng, 2, 2, 1 + trial % 3);
    const double obj = solve(in).objective;
    EXPECT_NEAR(obj, reference::qcqp_mu_grid(in, 1000), 1e-4);
    // The alpha grid is a lower bound whatever its step.
    EXPECT_LE(reference::qcqp_alpha_grid(in, 1000), obj + 1e-9);
  }
}

TEST(Qcqp, MatchesMuSearch) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t T = 1 + trial % 3;
    const Eigen::Index K = 1 + trial % 6;
    const auto in = qcqp_checks::random_instance(rng, K, T, 1 + trial % 4);
    EXPECT_NEAR(solve(in).objective, reference::qcqp_mu_search(in), 1e-6);
  }
}

TEST(Qcqp, KktAndDualityBridge) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t T = 1 + trial % 4;
    const Eigen::Index K = 1 + trial % 8;
    const auto in = qcqp_checks::random_instance(rng, K, T, 1 + trial % 5, trial % 7 == 0 ? -0.6 : 0.0);
    const auto s = solve(in);
    const auto r = qcqp_checks::kkt(in, s);
    EXPECT_LE(r.stationarity, 1e-6);
    EXPECT_LE(r.complementarity, 1e-6);
    EXPECT_LE(r.feasibility, 1e-9);
    EXPECT_NEAR(s.objective, reference::qcqp_primal_value(in, s.alpha), 1e-6);
    std::vector<double> mu(s.mu.data(), s.mu.data() + s.mu.size());
    EXPECT_NEAR(s.objective, reference::qcqp_dual_value(in, mu), 1e-6);
  }
}

TEST(Qcqp, PermutationInvariance) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index K = 2 + trial % 6;
    const auto in = qcqp_checks::random_instance(rng, K, 3, 2);
    std::vector<Eigen::Index> perm(K);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Eigen::PermutationMatrix<Eigen::Dynamic> P(K);
    for (Eigen::Index k = 0; k < K; ++k) P.indices()(k) = static_cast<int>(perm[k]);
    QcqpInput out = in;
    for (auto& G : out.gram) G = P * G * P.transpose();
    out.offsets = P * in.offsets;
    std::reverse(out.gram.begin(), out.gram.end());
    EXPECT_NEAR(solve(in).objective, solve(out).objective, 1e-7);
  }
}

TEST(Qcqp, MoreCutsNeverLowerMoreGroupsNeverRaise) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const auto in = qcqp_checks::random_instance(rng, 6, 3, 2);
    const double full = solve(in).objective;
    QcqpInput fewer = in;
    for (auto& G : fewer.gram) G = G.topLeftCorner(4, 4).eval();
    fewer.offsets = in.offsets.head(4);
    EXPECT_LE(solve(fewer).objective, full + 1e-8);
    QcqpInput one_group = in;
    one_group.gram.resize(1);
    EXPECT_GE(solve(one_group).objective, full - 1e-8);
  }
}

TEST(Qcqp, DegenerateGroupGetsNoWeight) {
  std::mt19937_64 rng(7);
  auto in = qcqp_checks::random_instance(rng, 3, 2, 2);
  in.gram.push_back(Eigen::MatrixXd::Zero(3, 3));
  const auto s = solve(in);
  EXPECT_EQ(s.mu(2), 0.0);
  EXPECT_NEAR(s.mu.sum(), 1.0, 1e-12);
}

TEST(Qcqp, InputErrors) {
  QcqpInput in = one_by_one(1.0, 1.0, 1.0);
  in.gram[0](0, 0) = -1.0;
  EXPECT_THROW(solve(in), DataError);
  QcqpInput bad = one_by_one(1.0, 1.0, 0.0);
  EXPECT_THROW(solve(bad), ConfigError);
  QcqpInput shape = one_by_one(1.0, 1.0, 1.0);
  shape.gram[0] = Eigen::MatrixXd::Identity(2, 2);
  EXPECT_THROW(solve(shape), ConfigError);
}

TEST(Qcqp, IterationCapCarriesBestIterate) {
  std::mt19937_64 rng(8);
  const auto in = qcqp_checks::random_instance(rng, 6, 3, 2);
  QcqpOptions opt;
  opt.max_iterations = 1;
  try {
    solve(in, opt);
    FAIL() << "expected QcqpError";
  } catch (const QcqpError& e) {
    EXPECT_EQ(e.best().alpha.size(), 6);
    EXPECT_GT(e.best().kkt_residual, 0.0);
  }
}

TEST(Qcqp, CutSolverMatchesDenseSolver) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    auto ds = synth::random_dataset(rng, 30, 12);
    std::vector<FeatureGroup> groups{FeatureGroup({0, 1, 2}), FeatureGroup({3, 7}),
                                     FeatureGroup({5, 9, 11})};
    std::vector<Cut> cuts;
    std::normal_distribution<double> g(0.0, 0.3);
    for (int k = 0; k < 25; ++k) {
      std::vector<double> v(ds.size());
      for (auto& x : v) x = g(rng);
      cuts.push_back(make_cut(most_violated_y(LossSpec::fbeta(1.0), ds.labels(), v), groups, ds));
    }
    QcqpInput in;
    in.capacity = 3.0;
    in.offsets.resize(static_cast<Eigen::Index>(cuts.size()));
    for (std::size_t k = 0; k < cuts.size(); ++k) in.offsets(static_cast<Eigen::Index>(k)) = cuts[k].offset;
    for (std::size_t t = 0; t < groups.size(); ++t) {
      Eigen::MatrixXd G(cuts.size(), cuts.size());
      for (std::size_t a = 0; a < cuts.size(); ++a) {
        for (std::size_t b = 0; b < cuts.size(); ++b) {
          double s = 0.0;
          for (std::size_t p = 0; p < groups[t].size(); ++p) s += cuts[a].blocks[t][p] * cuts[b].blocks[t][p];
          G(a, b) = s;
        }
      }
      in.gram.push_back(G);
    }
    const auto dense = solve(in);
    for (const auto& group_set : {std::vector<std::size_t>{}, std::vector<std::size_t>{1}}) {
      const auto sparse = solve_cuts(cuts, 3.0, QcqpOptions{}, {0}, group_set);
      EXPECT_NEAR(dense.objective, sparse.objective, 1e-7 * std::max(1.0, dense.objective));
      const auto r = qcqp_checks::kkt(in, sparse);
      EXPECT_LE(r.stationarity, 1e-6);
      EXPECT_LE(r.complementarity, 1e-6);
      EXPECT_LE(r.feasibility, 1e-6);
    }
  }
}

TEST(RecoverWeights, Substitution) {
  Cut cut;
  cut.blocks = {{0.5, -1.0}, {2.0}};
  std::vector<Cut> cuts{cut};
  QcqpSolution s;
  s.alpha = Eigen::VectorXd::Constant(1, 2.0);
  s.mu = Eigen::Vector2d(0.25, 0.0);
  const std::vector<std::size_t> sizes{2, 1};
  const auto w = recover_group_weights(s, cuts, sizes);
  EXPECT_DOUBLE_EQ(w[0][0], -0.25);
  EXPECT_DOUBLE_EQ(w[0][1], 0.5);
  EXPECT_EQ(w[1][0], 0.0);  // mu = 0

  s.alpha.setZero();
  s.mu = Eigen::Vector2d(0.5, 0.5);
  for (const auto& block : recover_group_weights(s, cuts, sizes)) {
    for (double v : block) EXPECT_EQ(v, 0.0);
  }
}
