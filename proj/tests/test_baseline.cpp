#include "logrca/baseline.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <map>
#include <random>

using namespace logrca;

namespace {
TokenSequence doc(std::initializer_list<const char *> t) {
  TokenSequence s;
  s.tokens.push_back("[CLS]");
  for (auto *x : t) s.tokens.push_back(x);
  return s;
}

double value(const SparseVector &v, int f) {
  for (auto [k, x] : v) {
    if (k == f) return x;
  }
  return 0.0;
}
} // namespace

TEST(TfIdf, IdfExamples) {
  std::vector<TokenSequence> docs;
  for (int i = 0; i < 10; ++i) docs.push_back(i == 0 ? doc({"common", "rare"}) : doc({"common"}));
  const auto m = TfIdfModel::fit(docs);
  EXPECT_NEAR(m.idf()[static_cast<std::size_t>(m.feature("common"))], 1.0, 1e-12);
  EXPECT_NEAR(m.idf()[static_cast<std::size_t>(m.feature("rare"))], std::log(11.0 / 2.0) + 1.0, 1e-12);
  EXPECT_NEAR(m.idf()[static_cast<std::size_t>(m.feature("rare"))], 2.705, 1e-3);
  EXPECT_EQ(m.feature("[CLS]"), -1);
  EXPECT_TRUE(m.transform(doc({"unseen"})).empty());
  EXPECT_THROW(TfIdfModel::fit(std::vector<TokenSequence>{}), DataError);
}

TEST(TfIdf, MatchesBruteForceRecomputation) {
  std::mt19937_64 rng(6);
  const std::vector<std::string> words{"a", "b", "c", "d", "e", "[IP]", "[NUM]"};
  std::vector<TokenSequence> docs;
  for (int i = 0; i < 200; ++i) {
    TokenSequence s;
    s.tokens.push_back("[CLS]");
    const int len = 1 + static_cast<int>(rng() % 8);
    for (int k = 0; k < len; ++k) s.tokens.push_back(words[rng() % words.size()]);
    docs.push_back(s);
  }
  const auto m = TfIdfModel::fit(docs);
  for (const auto &d : docs) {
    std::map<std::string, int> tf;
    for (const auto &t : d.tokens) {
      if (t != "[CLS]") ++tf[t];
    }
    const auto v = m.transform(d);
    EXPECT_EQ(v.size(), tf.size());
    for (const auto &[t, n] : tf) {
      int df = 0;
      for (const auto &o : docs) df += std::find(o.tokens.begin(), o.tokens.end(), t) != o.tokens.end();
      const double want = n * (std::log((1.0 + 200.0) / (1.0 + df)) + 1.0);
      EXPECT_NEAR(value(v, m.feature(t)), want, 1e-12);
    }
  }
}

TEST(DecisionTree, LeafFractionScores) {
  // One feature; U samples have it, P samples mostly do not.
  std::vector<SparseVector> x{{{0, 1.0}}, {{0, 1.0}}, {{0, 1.0}}, {{0, 1.0}}, {}, {}, {}};
  std::vector<Label> y{Label::Unknown, Label::Unknown, Label::Unknown, Label::Positive,
                       Label::Positive, Label::Positive, Label::Positive};
  const auto t = DecisionTree::train(x, y);
  EXPECT_DOUBLE_EQ(t.score({{0, 1.0}}), 0.75);
  EXPECT_DOUBLE_EQ(t.score({}), 0.0);
}

TEST(DecisionTree, DepthZeroAndPureSets) {
  std::vector<SparseVector> x{{{0, 1.0}}, {}, {{1, 2.0}}};
  std::vector<Label> y{Label::Unknown, Label::Positive, Label::Positive};
  const auto t0 = DecisionTree::train(x, y, 0);
  EXPECT_EQ(t0.nodes().size(), 1u);
  EXPECT_DOUBLE_EQ(t0.score({{0, 1.0}}), 1.0 / 3.0);
  const auto pure = DecisionTree::train(x, std::vector<Label>(3, Label::Positive));
  EXPECT_EQ(pure.nodes().size(), 1u);
  EXPECT_DOUBLE_EQ(pure.score({}), 0.0);
  EXPECT_THROW(DecisionTree::train(x, std::vector<Label>(2, Label::Positive)), DataError);
}

TEST(DecisionTree, InvariantsOnRandomData) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<SparseVector> x;
    std::vector<Label> y;
    for (int i = 0; i < 300; ++i) {
      SparseVector v;
      for (int f = 0; f < 6; ++f) {
        if (rng() % 3 == 0) v.emplace_back(f, static_cast<double>(1 + rng() % 3));
      }
      x.push_back(v);
      y.push_back(rng() % 4 == 0 ? Label::Unknown : Label::Positive);
    }
    const int depth = 1 + trial;
    const auto t = DecisionTree::train(x, y, depth);
    EXPECT_LE(t.depth(), depth);
    std::size_t total = 0;
    for (const auto &n : t.nodes()) {
      if (n.leaf()) total += n.positives + n.unknowns;
    }
    EXPECT_EQ(total, x.size());
    for (const auto &v : x) {
      const double s = t.score(v);
      EXPECT_GE(s, 0.0);
      EXPECT_LE(s, 1.0);
    }
  }
}

TEST(DecisionTree, SeparableTokensRankAboveP) {
  std::mt19937_64 rng(21);
  std::vector<TokenSequence> docs;
  std::vector<Label> y;
  for (int i = 0; i < 200; ++i) {
    TokenSequence s;
    s.tokens = {"[CLS]", "w" + std::to_string(rng() % 5), "w" + std::to_string(rng() % 5)};
    const bool u = i % 5 == 0;
    if (u) s.tokens.push_back("boom");
    docs.push_back(s);
    y.push_back(u ? Label::Unknown : Label::Positive);
  }
  TreeBaseline b;
  b.tfidf = TfIdfModel::fit(docs);
  std::vector<SparseVector> x;
  for (const auto &d : docs) x.push_back(b.tfidf.transform(d));
  b.tree = DecisionTree::train(x, y);
  double min_u = 1.0, max_p = 0.0;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const double s = b.score(docs[i]);
    if (y[i] == Label::Unknown) min_u = std::min(min_u, s);
    else max_p = std::max(max_p, s);
  }
  EXPECT_GT(min_u, max_p);

  const auto path = std::filesystem::temp_directory_path() / "logrca_tree_test.json";
  b.save(path.string());
  const auto back = TreeBaseline::load(path.string());
  for (const auto &d : docs) EXPECT_EQ(back.score(d), b.score(d));
  std::filesystem::remove(path);
}
