#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "fgmperf/train.hpp"
#include "synthetic.hpp"

using namespace fgmperf;

namespace {

TrainedModel trained(std::uint64_t seed, bool keep_beta = false) {
  std::mt19937_64 rng(seed);
  auto ds = synth::random_dataset(rng, 40, 15);
  TrainConfig cfg;
  cfg.budget = 3;
  cfg.max_outer = 4;
  cfg.keep_beta = keep_beta;
  return train(ds, cfg).model;
}

}  // namespace

TEST(Model, ZeroModel) {
  TrainedModel m;
  SparseVector x(std::vector<Feature>{{0, 1.0}, {4, -2.0}});
  EXPECT_EQ(m.score(x), 0.0);
  EXPECT_EQ(m.label(x), 1);
  EXPECT_EQ(predict_label(m, SparseVector{}), 1);
}

TEST(Model, HandBuiltScore) {
  TrainedModel m;
  m.weights = {{0, 2.0}, {3, -0.5}};
  SparseVector x(std::vector<Feature>{{0, 1.5}, {2, 9.0}, {3, 4.0}});
  EXPECT_DOUBLE_EQ(m.score(x), 1.0);
  SparseVector outside(std::vector<Feature>{{1, 3.0}, {2, 1.0}, {7, 1.0}});
  EXPECT_EQ(m.score(outside), 0.0);
  m.weights = {{0, -2.0}};
  EXPECT_EQ(m.label(x), -1);
}

TEST(Assemble, ZeroAlphaGivesZeroModel) {
  std::mt19937_64 rng(1);
  auto ds = synth::random_dataset(rng, 10, 4);
  BundleState st;
  st.groups = {FeatureGroup({0, 1})};
  st.best.alpha = Eigen::VectorXd::Zero(0);
  st.best.mu = Eigen::VectorXd::Ones(1);
  st.best.objective = 1.0;
  const auto m = assemble(st, ds);
  EXPECT_TRUE(m.weights.empty());
  EXPECT_EQ(m.score(ds.example(0)), 0.0);
}

TEST(Assemble, OneGroupOneCut) {
  std::mt19937_64 rng(2);
  auto ds = synth::random_dataset(rng, 12, 5, 1.0);
  const FeatureGroup d({1, 3});
  OracleResult w;
  w.y_prime.assign(ds.labels().begin(), ds.labels().end());
  w.y_prime[2] = -w.y_prime[2];
  w.y_prime[7] = -w.y_prime[7];
  w.table = table_from_labels(ds.labels(), w.y_prime);
  BundleState st;
  st.groups = {d};
  st.cuts = {make_cut(w, st.groups, ds)};
  const double a = 0.8, mu = 1.0;
  st.best.alpha = Eigen::VectorXd::Constant(1, a);
  st.best.mu = Eigen::VectorXd::Constant(1, mu);
  st.best.objective = 1.0;
  const auto m = assemble(st, ds, true);
  const double n = static_cast<double>(ds.size());
  std::vector<double> expect(5, 0.0);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double beta = a * (ds.label(i) - w.y_prime[i]) / n;
    EXPECT_DOUBLE_EQ((*m.beta)[i], beta);
    for (const Feature& f : ds.example(i)) {
      if (d.contains(f.index)) expect[f.index] += mu * beta * f.value;
    }
  }
  ASSERT_EQ(m.weights.size(), 2u);
  for (const Feature& f : m.weights) EXPECT_NEAR(f.value, expect[f.index], 1e-15);
}

TEST(Model, PathEquivalenceAndSparsity) {
  std::mt19937_64 rng(3);
  int pairs = 0;
  for (int trial = 0; trial < 10; ++trial) {
    auto ds = synth::random_dataset(rng, 40, 20);
    TwoLayerOptions opt;
    opt.budget = 2 + trial % 3;
    opt.capacity = 4.0;
    opt.max_outer = 5;
    const auto run = run_two_layer(ds, LossSpec::fbeta(1.0), opt);
    const auto m = assemble(run.bundle, ds);
    EXPECT_LE(m.selected_count(), m.groups.size() * opt.budget);
    for (int p = 0; p < 10; ++p, ++pairs) {
      const auto& x = ds.example(rng() % ds.size());
      const double a = m.score(x);
      const double b = groupwise_score(run.bundle.groups, run.bundle.best.weights, x);
      EXPECT_NEAR(a, b, 1e-9);
    }
  }
  EXPECT_EQ(pairs, 100);
}

TEST(ModelFile, RoundTripIsByteIdentical) {
  for (bool beta : {false, true}) {
    const auto m = trained(4, beta);
    const std::string once = to_string(m);
    std::istringstream in(once);
    const auto back = load_model(in);
    EXPECT_EQ(back, m);
    EXPECT_EQ(to_string(back), once);
  }
}

TEST(ModelFile, ScoresSurviveBitForBit) {
  const auto m = trained(5);
  std::istringstream in(to_string(m));
  const auto back = load_model(in);
  std::mt19937_64 rng(6);
  auto ds = synth::random_dataset(rng, 50, 15);
  for (const auto& x : ds.examples()) EXPECT_EQ(m.score(x), back.score(x));
}

TEST(ModelFile, ZeroGroupModel) {
  TrainedModel m;
  m.meta.dimension = 3;
  std::istringstream in(to_string(m));
  const auto back = load_model(in);
  EXPECT_TRUE(back.groups.empty());
  EXPECT_TRUE(back.weights.empty());
}

TEST(ModelFile, TruncationReportsLine) {
  const std::string text = to_string(trained(7));
  std::vector<std::string> lines;
  std::istringstream split(text);
  for (std::string l; std::getline(split, l);) lines.push_back(l);
  for (std::size_t keep : {std::size_t{0}, std::size_t{1}, std::size_t{5}, lines.size() - 1}) {
    std::string cut;
    for (std::size_t i = 0; i < keep; ++i) cut += lines[i] + "\n";
    std::istringstream in(cut);
    try {
      load_model(in);
      FAIL() << "truncated at " << keep;
    } catch (const ParseError& e) {
      EXPECT_EQ(e.line(), keep + 1);
    }
  }
}

TEST(ModelFile, RejectsCorruption) {
  std::string text = to_string(trained(8));
  auto bad = [](std::string s) {
    std::istringstream in(s);
    EXPECT_THROW(load_model(in), ParseError);
  };
  bad("fgmperf-model 2\n");
  bad("something else\n");
  std::string s = text;
  s.replace(s.find("budget"), 6, "budgit");
  bad(s);
  s = text;
  s.replace(s.find("converged ") + 10, 1, "7");
  bad(s);
}

TEST(Manifest, RoundTrip) {
  const std::vector<ManifestEntry> e{{"a", "m.0.model"}, {"b", "m.1.model"}};
  std::ostringstream out;
  save_manifest(e, out);
  std::istringstream in(out.str());
  EXPECT_TRUE(is_manifest(in));
  EXPECT_EQ(load_manifest(in), e);
  std::istringstream model(to_string(TrainedModel{}));
  EXPECT_FALSE(is_manifest(model));
}
