#include <gtest/gtest.h>

#include <random>

#include "fgmperf/bundle.hpp"
#include "fgmperf/reference.hpp"
#include "synthetic.hpp"

using namespace fgmperf;

namespace {

SparseDataset line_dataset(std::vector<double> x, std::vector<int> y) {
  ExampleList xs;
  for (double v : x) xs.emplace_back(std::vector<Feature>{{0, v}});
  return synth::make_dataset(std::move(xs), std::move(y), 1);
}

}  // namespace

TEST(EmpiricalRisk, ZeroWeightsGiveWorstLoss) {
  auto ds = line_dataset({1, 1, 1, 1, 1}, {1, 1, -1, -1, -1});
  const std::vector<FeatureGroup> groups{FeatureGroup({0})};
  const GroupWeights w{{0.0}};
  EXPECT_DOUBLE_EQ(empirical_risk(w, groups, ds, LossSpec::fbeta(1.0)).risk, 20.0);
}

TEST(EmpiricalRisk, HammingTwoExampleHinge) {
  auto ds = line_dataset({2.0, -1.0}, {1, -1});
  const std::vector<FeatureGroup> groups{FeatureGroup({0})};
  const GroupWeights w{{0.25}};
  const auto r = empirical_risk(w, groups, ds, LossSpec::hamming());
  EXPECT_DOUBLE_EQ(r.risk, 1.25);
  EXPECT_EQ(r.witness.y_prime, (std::vector<int>{-1, 1}));
}

TEST(EmpiricalRisk, LargeSeparatingWeightsGiveZero) {
  auto ds = line_dataset({2.0, 1.0, -1.0, -3.0}, {1, 1, -1, -1});
  const std::vector<FeatureGroup> groups{FeatureGroup({0})};
  const GroupWeights w{{1e4}};
  for (const auto& spec : {LossSpec::hamming(), LossSpec::fbeta(1.0), LossSpec::prbep()}) {
    EXPECT_EQ(empirical_risk(w, groups, ds, spec).risk, 0.0);
  }
}

TEST(Regularizer, SumOfNormsSquared) {
  EXPECT_DOUBLE_EQ(group_regularizer({{3.0, 4.0}, {1.0}}), 18.0);
  EXPECT_EQ(group_regularizer({}), 0.0);
}

TEST(MakeCut, TruthGivesNullCut) {
  std::mt19937_64 rng(1);
  auto ds = synth::random_dataset(rng, 10, 5);
  OracleResult w;
  w.y_prime.assign(ds.labels().begin(), ds.labels().end());
  w.table = table_from_labels(ds.labels(), w.y_prime);
  w.loss = 0.0;
  const std::vector<FeatureGroup> groups{FeatureGroup({0, 1}), FeatureGroup({2, 3, 4})};
  const Cut c = make_cut(w, groups, ds);
  EXPECT_EQ(c.offset, 0.0);
  for (const auto& b : c.blocks) {
    for (double v : b) EXPECT_EQ(v, 0.0);
  }
}

TEST(MakeCut, SingleFlip) {
  std::mt19937_64 rng(2);
  auto ds = synth::random_dataset(rng, 8, 6, 1.0);
  const std::size_t i = 3;
  OracleResult w;
  w.y_prime.assign(ds.labels().begin(), ds.labels().end());
  w.y_prime[i] = -w.y_prime[i];
  w.table = table_from_labels(ds.labels(), w.y_prime);
  w.loss = loss_value(LossSpec::fbeta(1.0), w.table);
  const FeatureGroup d({1, 4});
  const Cut c = make_cut(w, std::vector<FeatureGroup>{d}, ds);
  const double n = static_cast<double>(ds.size());
  for (std::size_t p = 0; p < d.size(); ++p) {
    double xij = 0.0;
    for (const Feature& f : ds.example(i)) {
      if (f.index == d[p]) xij = f.value;
    }
    EXPECT_DOUBLE_EQ(c.blocks[0][p], -(1.0 / n) * 2.0 * ds.label(i) * xij);
  }
  EXPECT_DOUBLE_EQ(c.offset, w.loss / n);
}

TEST(MakeCut, F1OffsetWithNoTruePositives) {
  std::mt19937_64 rng(3);
  auto ds = synth::random_dataset(rng, 12, 4);
  OracleResult w;
  w.y_prime.assign(ds.size(), -1);
  w.table = table_from_labels(ds.labels(), w.y_prime);
  w.loss = loss_value(LossSpec::fbeta(1.0), w.table);
  const Cut c = make_cut(w, std::vector<FeatureGroup>{FeatureGroup({0})}, ds);
  EXPECT_DOUBLE_EQ(c.offset, 100.0 / 12.0);
}

TEST(Bundle, HugeEpsStopsImmediately) {
  std::mt19937_64 rng(4);
  auto ds = synth::random_dataset(rng, 20, 6);
  const std::vector<FeatureGroup> groups{FeatureGroup({0, 1, 2})};
  const auto st = run_inner(ds, LossSpec::fbeta(1.0), groups, 2.0, 1e9, 200);
  EXPECT_TRUE(st.converged);
  EXPECT_LE(st.cuts.size(), 1u);
}

TEST(Bundle, SeparableHammingReachesZeroRisk) {
  auto ds = line_dataset({1.0, 2.0, -1.0, -2.0}, {1, 1, -1, -1});
  const std::vector<FeatureGroup> groups{FeatureGroup({0})};
  const double C = 10.0, eps = 1e-6;
  const auto st = run_inner(ds, LossSpec::hamming(), groups, C, eps, 200);
  ASSERT_TRUE(st.converged);
  const double r = empirical_risk(st.best.weights, groups, ds, LossSpec::hamming()).risk;
  EXPECT_LE(C * r, eps);
  EXPECT_NEAR(st.best.weights[0][0], 1.0, 1e-3);
}

TEST(Bundle, LowerBoundMonotoneAndGapReached) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t n = 10 + 10 * (trial % 5);
    auto ds = synth::random_dataset(rng, n, 10);
    const std::vector<FeatureGroup> groups{FeatureGroup({0, 1, 2}), FeatureGroup({3, 4}),
                                           FeatureGroup({5, 6, 7, 8, 9})};
    const LossSpec specs[] = {LossSpec::hamming(), LossSpec::fbeta(1.0),
                              LossSpec::prec_at(n / 4), LossSpec::prbep()};
    const auto& spec = specs[trial % 4];
    const auto st = run_inner(ds, spec, groups, 0.1 * static_cast<double>(n), 1e-3, 200);
    EXPECT_TRUE(st.converged) << "trial " << trial;
    for (std::size_t k = 1; k < st.history.size(); ++k) {
      EXPECT_GE(st.history[k].second, st.history[k - 1].second - 1e-9 * std::max(1.0, st.history[k].second));
    }
    EXPECT_LE(st.best.objective - st.lower_bound, 1e-3);
  }
}

TEST(Bundle, LowerBoundIsCuttingPlaneModel) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 8; ++trial) {
    auto ds = synth::random_dataset(rng, 30, 8);
    const std::vector<FeatureGroup> groups{FeatureGroup({0, 1, 2, 3}), FeatureGroup({4, 5, 6, 7})};
    const double C = 3.0;
    const auto st = run_inner(ds, LossSpec::fbeta(1.0), groups, C, 1e-3, 200);
    const double model = reference::cutting_plane_objective(st.cuts, st.weights, C);
    EXPECT_NEAR(model, st.lower_bound, 1e-6 * std::max(1.0, model));
    // And the true objective at the best weights sits within eps of it.
    const double J = group_regularizer(st.best.weights) +
                     C * empirical_risk(st.best.weights, groups, ds, LossSpec::fbeta(1.0)).risk;
    EXPECT_NEAR(J, st.best.objective, 1e-9 * std::max(1.0, J));
    EXPECT_LE(J - st.lower_bound, 1e-3 + 1e-6);
  }
}

TEST(Bundle, RerunAfterConvergenceAddsNoCuts) {
  std::mt19937_64 rng(7);
  auto ds = synth::random_dataset(rng, 25, 6);
  BundleOptions opt;
  opt.capacity = 2.5;
  opt.eps = 1e-3;
  BundleSolver solver(ds, LossSpec::fbeta(1.0), opt);
  solver.add_group(FeatureGroup({0, 2, 4}));
  const std::size_t cuts = solver.run().cuts.size();
  const auto& again = solver.run();
  EXPECT_TRUE(again.converged);
  EXPECT_EQ(again.cuts_added, 0u);
  EXPECT_EQ(again.cuts.size(), cuts);
}

TEST(Bundle, AddGroupExtendsEveryCut) {
  std::mt19937_64 rng(8);
  auto ds = synth::random_dataset(rng, 25, 6);
  BundleOptions opt;
  opt.capacity = 2.5;
  BundleSolver solver(ds, LossSpec::fbeta(1.0), opt);
  solver.add_group(FeatureGroup({0, 1}));
  solver.run();
  const FeatureGroup extra({2, 3, 5});
  solver.add_group(extra);
  for (const auto& cut : solver.state().cuts) {
    ASSERT_EQ(cut.blocks.size(), 2u);
    EXPECT_EQ(cut.blocks[1], cut_block(cut.difference, extra, ds.size()));
  }
  // The old best iterate is still feasible, so J_best cannot rise.
  const double before = solver.state().best.objective;
  solver.run();
  EXPECT_LE(solver.state().best.objective, before);
}

TEST(Bundle, Errors) {
  std::mt19937_64 rng(9);
  auto ds = synth::random_dataset(rng, 10, 4);
  BundleOptions opt;
  opt.capacity = 0.0;
  EXPECT_THROW(BundleSolver(ds, LossSpec::fbeta(1.0), opt), ConfigError);
  opt.capacity = 1.0;
  BundleSolver empty(ds, LossSpec::fbeta(1.0), opt);
  EXPECT_THROW(empty.run(), ConfigError);
  auto one_class = synth::make_dataset(ExampleList(3), {1, 1, 1}, 2);
  EXPECT_THROW(BundleSolver(one_class, LossSpec::fbeta(1.0), opt), DataError);
}

TEST(Bundle, CutCapFlagsNonConvergence) {
  std::mt19937_64 rng(10);
  auto ds = synth::random_dataset(rng, 40, 10);
  const std::vector<FeatureGroup> groups{FeatureGroup({0, 1, 2, 3, 4, 5, 6, 7, 8, 9})};
  const auto st = run_inner(ds, LossSpec::fbeta(1.0), groups, 4.0, 1e-9, 2);
  EXPECT_FALSE(st.converged);
  EXPECT_EQ(st.stop, InnerStop::kCutLimit);
  EXPECT_EQ(st.cuts.size(), 2u);
}
