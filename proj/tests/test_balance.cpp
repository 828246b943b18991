#include "logrca/balance.hpp"

#include <gtest/gtest.h>

#include <map>

using namespace logrca;

namespace {

LogLine line(LineId id, double s, std::string service) {
  return {id, seconds_to_micros(s), std::move(service), "m", std::nullopt};
}

} // namespace

TEST(ServiceVector, NormalizedCounts) {
  Corpus c({line(0, 1, "a"), line(1, 2, "a"), line(2, 3, "b"), line(3, 50, "c")});
  const auto idx = build_service_index(c);
  const auto w = extract_windows(c, {{0, seconds_to_micros(4.0), std::nullopt}}, 3.5);
  const auto v = service_vector(w[0], c, idx).values;
  EXPECT_NEAR(v[0], 2.0 / std::sqrt(5.0), 1e-12);
  EXPECT_NEAR(v[1], 1.0 / std::sqrt(5.0), 1e-12);
  EXPECT_EQ(v[2], 0.0);
  EXPECT_NEAR(v[0], 0.894, 1e-3);
  EXPECT_NEAR(v[1], 0.447, 1e-3);
}

TEST(ServiceVector, EdgeCases) {
  Corpus c({line(0, 1, "a"), line(1, 2, "a"), line(2, 30, "b")});
  const auto idx = build_service_index(c);
  InvestigationWindow empty;
  EXPECT_EQ(service_vector(empty, c, idx).values.norm(), 0.0);
  InvestigationWindow one;
  one.lines = {0, 1};
  const auto v = service_vector(one, c, idx).values;
  EXPECT_DOUBLE_EQ(v[0], 1.0);
  EXPECT_DOUBLE_EQ(v.norm(), 1.0);
  ServiceIndex partial{{"b", 0}};
  EXPECT_THROW(service_vector(one, c, partial), DataError);
  const auto bin = service_vector(one, c, idx, true).values;
  EXPECT_DOUBLE_EQ(bin[0], 1.0);
}

TEST(TargetSizes, Endpoints) {
  const auto p = target_sizes({100, 1000});
  EXPECT_EQ(p.targets, (std::vector<std::size_t>{500, 1000}));
}

TEST(TargetSizes, InteriorPoint) {
  const auto p = target_sizes({100, 400, 1000});
  EXPECT_EQ(p.targets[1], 667u);
  EXPECT_EQ(p.targets[0], 500u);
  EXPECT_EQ(p.targets[2], 1000u);
}

TEST(TargetSizes, EqualCountsUnchanged) {
  EXPECT_EQ(target_sizes({800, 800}).targets, (std::vector<std::size_t>{800, 800}));
  EXPECT_EQ(target_sizes({42}).targets, (std::vector<std::size_t>{42}));
  EXPECT_THROW(target_sizes({}), DataError);
}

TEST(TargetSizes, BoundsAndMonotonicity) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<std::size_t> counts(1 + rng() % 12);
    for (auto &c : counts) c = 1 + rng() % 5000;
    const auto p = target_sizes(counts);
    const double hi = static_cast<double>(p.max_count);
    for (std::size_t i = 0; i < counts.size(); ++i) {
      if (p.max_count == p.min_count) {
        EXPECT_EQ(p.targets[i], counts[i]);
        continue;
      }
      EXPECT_GE(static_cast<double>(p.targets[i]), std::floor(hi / 2.0));
      EXPECT_LE(p.targets[i], p.max_count);
      for (std::size_t j = 0; j < counts.size(); ++j) {
        if (counts[i] <= counts[j]) EXPECT_LE(p.targets[i], p.targets[j]);
      }
    }
  }
}

class BalanceFixture : public ::testing::Test {
protected:
  void SetUp() override {
    std::vector<LogLine> lines;
    LineId id = 0;
    // 100 background lines, a 10-line window of service x and a 4-line
    // window of service y.
    for (int i = 0; i < 100; ++i) lines.push_back(line(id++, 100.0 + i, "bg"));
    for (int i = 0; i < 10; ++i) lines.push_back(line(id++, 10.0 + 0.1 * i, "x"));
    for (int i = 0; i < 4; ++i) lines.push_back(line(id++, 50.0 + 0.1 * i, "y"));
    corpus = Corpus(lines);
    windows = extract_windows(corpus, {{0, seconds_to_micros(12.0), std::nullopt},
                                       {1, seconds_to_micros(52.0), std::nullopt}},
                              3.0);
    index = build_service_index(corpus);
  }

  Corpus corpus;
  std::vector<InvestigationWindow> windows;
  ServiceIndex index;
};

TEST_F(BalanceFixture, SmallClusterUpsampledFromItsOwnLines) {
  const auto pu = assign_pu_labels(corpus, windows);
  const auto a = cluster_windows(windows, corpus, index, 50, 0.5);
  ASSERT_EQ(a.clusters, 2u);
  EXPECT_EQ(a.line_counts, (std::vector<std::size_t>{10, 4}));
  const auto plan = target_sizes(a.line_counts);
  EXPECT_EQ(plan.targets, (std::vector<std::size_t>{10, 5}));
  const auto b = apply_balance(pu, windows, a, plan, 1);
  EXPECT_EQ(b.positives.size(), 100u);
  EXPECT_EQ(b.unknowns.size(), 15u);
  std::size_t resampled = 0;
  for (const auto &s : b.unknowns) {
    if (!s.resampled) continue;
    ++resampled;
    EXPECT_EQ(s.cluster, 1);
    EXPECT_EQ(corpus.at(s.line).service, "y");
  }
  EXPECT_EQ(resampled, 1u);
  EXPECT_DOUBLE_EQ(b.q(), 100.0 / 115.0);
}

TEST_F(BalanceFixture, SeededAndDeterministic) {
  const auto pu = assign_pu_labels(corpus, windows);
  const auto a = cluster_windows(windows, corpus, index, 50, 0.5);
  BalancePlan plan = target_sizes(a.line_counts);
  plan.targets = {10, 500};
  const auto b1 = apply_balance(pu, windows, a, plan, 42);
  const auto b2 = apply_balance(pu, windows, a, plan, 42);
  EXPECT_EQ(b1.to_json().dump(), b2.to_json().dump());
  EXPECT_EQ(b1.unknowns.size(), 510u);
  const auto b3 = apply_balance(pu, windows, a, plan, 43);
  EXPECT_NE(b1.to_json().dump(), b3.to_json().dump());
}

TEST_F(BalanceFixture, UnbalancedKeepsEveryLineOnce) {
  const auto pu = assign_pu_labels(corpus, windows);
  const auto b = unbalanced(pu);
  EXPECT_EQ(b.unknowns.size(), 14u);
  EXPECT_DOUBLE_EQ(b.q(), pu.q());
}

TEST(DrawIndex, StaysInRangeAndCoversIt) {
  std::mt19937_64 rng(0);
  std::map<std::size_t, int> seen;
  for (int i = 0; i < 7000; ++i) {
    const auto v = detail::draw_index(rng, 7);
    ASSERT_LT(v, 7u);
    ++seen[v];
  }
  EXPECT_EQ(seen.size(), 7u);
  for (auto [k, n] : seen) EXPECT_NEAR(n, 1000, 150);
}
