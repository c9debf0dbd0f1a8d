#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "fgmperf/data.hpp"
#include "synthetic.hpp"

using namespace fgmperf;

namespace {

MulticlassDataset parse(const std::string& text) {
  std::istringstream in(text);
  return parse_svmlight(in);
}

std::string parse_error(const std::string& text) {
  try {
    parse(text);
  } catch (const ParseError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(DataIo, ParsesSingleLine) {
  auto ds = parse("+1 3:0.5 7:1.0\n");
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds.raw_labels()[0], "+1");
  EXPECT_EQ(ds.dimension(), 7u);
  const auto& x = ds.examples()[0];
  ASSERT_EQ(x.size(), 2u);
  EXPECT_EQ(x.entries()[0].index, 2u);
  EXPECT_EQ(x.entries()[0].value, 0.5);
  EXPECT_EQ(x.entries()[1].index, 6u);
  EXPECT_EQ(x.entries()[1].value, 1.0);
}

TEST(DataIo, LabelWithoutFeatures) {
  auto ds = parse("-1\n");
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_TRUE(ds.examples()[0].empty());
  EXPECT_EQ(ds.dimension(), 0u);
}

TEST(DataIo, RejectsDecreasingIndices) {
  EXPECT_EQ(parse_error("1 5:2 3:1\n"), "indices not increasing at line 1");
  EXPECT_EQ(parse_error("1 1:1\n-1 2:1 2:3\n"), "indices not increasing at line 2");
}

TEST(DataIo, RejectsBadTokens) {
  EXPECT_NE(parse_error("1 2:abc\n").find("line 1"), std::string::npos);
  EXPECT_NE(parse_error("1 0:1\n").find("line 1"), std::string::npos);
  EXPECT_NE(parse_error("1 2:1\n1 3\n").find("line 2"), std::string::npos);
  EXPECT_NE(parse_error("1 2:inf\n").find("non-finite"), std::string::npos);
  EXPECT_FALSE(parse_error("").empty());
  EXPECT_FALSE(parse_error("# only a comment\n\n").empty());
}

TEST(DataIo, SkipsCommentsQidAndZeros) {
  auto ds = parse("# header\n2 qid:3 1:0 4:2.5 # trailing\n\n1 2:1\r\n");
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds.examples()[0].size(), 1u);
  EXPECT_EQ(ds.raw_labels()[1], "1");
}

TEST(DataIo, RoundTripIsExact) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1e3);
  std::ostringstream text;
  for (int i = 0; i < 50; ++i) {
    text << (i % 3 == 0 ? "a" : "b");
    for (int j = 1; j <= 20; ++j) {
      if (rng() % 3 == 0) text << ' ' << j << ':' << text::format_double(g(rng));
    }
    text << '\n';
  }
  auto ds = parse(text.str());
  std::ostringstream once;
  write_svmlight(once, ds);
  auto back = parse(once.str());
  std::ostringstream twice;
  write_svmlight(twice, back);
  EXPECT_EQ(once.str(), twice.str());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    ASSERT_EQ(ds.examples()[i].size(), back.examples()[i].size());
    for (std::size_t p = 0; p < ds.examples()[i].size(); ++p) {
      EXPECT_EQ(ds.examples()[i].entries()[p].value, back.examples()[i].entries()[p].value);
    }
  }
}

TEST(DataIo, ClassOrder) {
  const auto numeric = parse("10 1:1\n2 1:1\n-1 1:1\n");
  EXPECT_EQ(std::vector<std::string>(numeric.classes().begin(), numeric.classes().end()),
            (std::vector<std::string>{"-1", "2", "10"}));
  auto named = parse("b 1:1\na 1:1\nc 1:1\n");
  EXPECT_EQ(named.classes()[0], "a");
  EXPECT_EQ(named.classes()[2], "c");
}

TEST(Binarize, OneVsRest) {
  auto ds = parse("a 1:1\nb 1:1\nc 1:1\n");
  auto bin = binarize(ds, "a");
  EXPECT_EQ(std::vector<int>(bin.labels().begin(), bin.labels().end()),
            (std::vector<int>{1, -1, -1}));
}

TEST(Binarize, SingleClassIsDegenerateAtTrainTime) {
  auto ds = parse("b 1:1\nb 2:1\n");
  auto bin = binarize(ds, "b");
  EXPECT_EQ(bin.positives(), 2u);
  EXPECT_THROW(bin.require_nondegenerate(), DataError);
}

TEST(Binarize, UnknownClass) {
  auto ds = parse("a 1:1\nb 1:1\n");
  EXPECT_THROW(binarize(ds, "z"), DataError);
}

TEST(Binarize, BinaryModeUsesLargerClass) {
  auto ds = parse("-1 1:1\n+1 1:1\n-1 2:1\n");
  auto bin = binarize(ds);
  EXPECT_EQ(bin.label(1), 1);
  EXPECT_EQ(bin.label(0), -1);
  EXPECT_THROW(binarize(parse("a 1:1\nb 1:1\nc 1:1\n")), DataError);
}

TEST(SparseVectorTest, Invariants) {
  EXPECT_THROW(SparseVector(std::vector<Feature>{{3, 1.0}, {1, 1.0}}), DataError);
  SparseVector x(std::vector<Feature>{{0, 0.0}, {2, 3.0}});
  EXPECT_EQ(x.size(), 1u);
  EXPECT_EQ(x.dimension(), 3u);
}

TEST(DotOnGroup, HandExample) {
  // 1-based features {1,3} are indices {0,2}.
  SparseVector x(std::vector<Feature>{{0, 2.0}, {2, 1.0}});
  FeatureGroup d({0, 2});
  const std::vector<double> w{0.5, 0.5};
  EXPECT_DOUBLE_EQ(dot_on_group(x, w, d), 1.5);
}

TEST(DotOnGroup, DisjointAndEmpty) {
  SparseVector x(std::vector<Feature>{{0, 2.0}, {2, 1.0}});
  FeatureGroup d({1, 3});
  const std::vector<double> w{1.0, 1.0};
  EXPECT_EQ(dot_on_group(x, w, d), 0.0);
  EXPECT_EQ(dot_on_group(SparseVector{}, w, d), 0.0);
}

TEST(DotOnGroup, MatchesDenseProduct) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 1 + rng() % 30;
    std::vector<double> dense(m, 0.0);
    std::vector<Feature> f;
    for (std::size_t j = 0; j < m; ++j) {
      if (rng() % 2) {
        dense[j] = g(rng);
        f.push_back({j, dense[j]});
      }
    }
    std::vector<std::size_t> members;
    for (std::size_t j = 0; j < m; ++j) {
      if (rng() % 3 == 0) members.push_back(j);
    }
    if (members.empty()) members.push_back(rng() % m);
    FeatureGroup d(members);
    std::vector<double> w(d.size());
    double expect = 0.0;
    for (std::size_t p = 0; p < d.size(); ++p) {
      w[p] = g(rng);
      expect += w[p] * dense[d[p]];
    }
    EXPECT_NEAR(dot_on_group(SparseVector(f), w, d), expect, 1e-12);
  }
}

TEST(FeatureGroupTest, SortedAndUnique) {
  FeatureGroup g({5, 1, 3});
  EXPECT_EQ(g[0], 1u);
  EXPECT_EQ(g[2], 5u);
  EXPECT_TRUE(g.contains(3));
  EXPECT_FALSE(g.contains(2));
  EXPECT_THROW(FeatureGroup({1, 1}), std::exception);
}

TEST(Scaling, MaxAbs) {
  auto ds = parse("a 1:-4 2:1\nb 1:2 3:0.5\n");
  auto f = max_abs_factors(ds.examples(), ds.dimension());
  EXPECT_EQ(f, (std::vector<double>{4.0, 1.0, 0.5}));
  auto s = apply_scaling(ds, f);
  EXPECT_EQ(s.examples()[0].entries()[0].value, -1.0);
  EXPECT_EQ(s.examples()[1].entries()[1].value, 1.0);
}
