#include "logrca/birch.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <functional>
#include <set>

using namespace logrca;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) x[i++] = d;
  return x;
}

// Sum of child CFs equals each non-leaf entry's CF, recursively.
void check_internal_sums(const CFTree::Node &node) {
  for (const auto &e : node.entries) {
    if (!e.child) continue;
    ClusteringFeature sum(e.cf.ls.size());
    for (const auto &c : e.child->entries) sum.merge(c.cf);
    EXPECT_NEAR(sum.n, e.cf.n, 1e-9);
    EXPECT_LT((sum.ls - e.cf.ls).norm(), 1e-9);
    EXPECT_NEAR(sum.ss, e.cf.ss, 1e-9);
    check_internal_sums(*e.child);
  }
}

} // namespace

TEST(ClusteringFeature, RadiusIsRmsDistanceToCentroid) {
  auto cf = ClusteringFeature::of(vec({0, 0}));
  cf.merge(ClusteringFeature::of(vec({2, 0})));
  EXPECT_DOUBLE_EQ(cf.n, 2.0);
  EXPECT_NEAR(cf.radius(), 1.0, 1e-12);
  EXPECT_LT((cf.centroid() - vec({1, 0})).norm(), 1e-12);
  EXPECT_EQ(ClusteringFeature(2).radius(), 0.0);
}

TEST(Birch, IdenticalVectorsFormOneCluster) {
  std::vector<Eigen::VectorXd> pts(300, vec({0.6, 0.8, 0.0}));
  const auto r = birch(pts, 50, 0.5);
  EXPECT_EQ(r.clusters, 1u);
  EXPECT_DOUBLE_EQ(r.features[0].n, 300.0);
}

TEST(Birch, OrthogonalGroupsSeparate) {
  std::vector<Eigen::VectorXd> pts;
  for (int i = 0; i < 20; ++i) pts.push_back(i % 2 ? vec({1, 0}) : vec({0, 1}));
  const auto r = birch(pts, 50, 0.5);
  EXPECT_EQ(r.clusters, 2u);
  for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_EQ(r.labels[i], static_cast<int>(i % 2 ? 1 : 0));
}

TEST(Birch, GaussianBlobsMatchExhaustiveKMeans) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> noise(0.0, 0.03);
  // A lone point joins a leaf of b others when D*sqrt(b)/(b+1) <= T; D = 2*sqrt(2) keeps every blob apart for b <= 10.
  const std::vector<Eigen::VectorXd> centers{vec({2, 0, 0, 0}), vec({0, 2, 0, 0}), vec({0, 0, 1.4, 1.4})};
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<Eigen::VectorXd> pts;
    for (int i = 0; i < 11; ++i) {
      Eigen::VectorXd p = centers[rng() % 3];
      for (Eigen::Index d = 0; d < p.size(); ++d) p[d] += noise(rng);
      pts.push_back(p);
    }
    std::set<int> used;
    const auto kmeans = oracle::exhaustive_kmeans(pts, 3);
    const auto r = birch(pts, 50, 0.5);
    // Only compare when the draw produced all three blobs.
    bool three = true;
    for (const auto &c : centers) {
      bool present = false;
      for (const auto &p : pts) present |= (p - c).norm() < 0.5;
      three &= present;
    }
    if (!three) continue;
    EXPECT_EQ(r.clusters, 3u);
    EXPECT_TRUE(oracle::same_partition(r.labels, kmeans));
  }
}

TEST(Birch, LeafStatisticsMatchBruteForce) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index dim = 2 + static_cast<Eigen::Index>(rng() % 5);
    const std::size_t n = 1 + rng() % 300;
    std::vector<Eigen::VectorXd> pts;
    for (std::size_t i = 0; i < n; ++i) {
      Eigen::VectorXd p(dim);
      for (Eigen::Index d = 0; d < dim; ++d) p[d] = u(rng);
      pts.push_back(p);
    }
    const int b = 2 + static_cast<int>(rng() % 6);
    const auto r = birch(pts, b, 0.15);
    for (std::size_t c = 0; c < r.clusters; ++c) {
      const auto bf = oracle::brute_force_cf(pts, r.labels, static_cast<int>(c), dim);
      EXPECT_DOUBLE_EQ(bf.n, r.features[c].n);
      EXPECT_LT((bf.ls - r.features[c].ls).norm(), 1e-9);
      EXPECT_NEAR(bf.ss, r.features[c].ss, 1e-9);
    }
    CFTree tree(dim, b, 0.15);
    for (const auto &p : pts) tree.insert(p);
    check_internal_sums(tree.root());
  }
}

TEST(Birch, NodesRespectBranchingFactor) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  CFTree tree(2, 3, 0.1);
  for (int i = 0; i < 500; ++i) tree.insert(vec({u(rng), u(rng)}));
  std::function<void(const CFTree::Node &)> walk = [&](const CFTree::Node &n) {
    EXPECT_LE(n.entries.size(), 3u);
    for (const auto &e : n.entries) {
      if (e.child) walk(*e.child);
    }
  };
  walk(tree.root());
}

TEST(Birch, InvalidParameters) {
  EXPECT_THROW(CFTree(2, 1, 0.5), ConfigError);
  EXPECT_THROW(CFTree(2, 50, 0.0), ConfigError);
  CFTree t(2, 50, 0.5);
  EXPECT_THROW(t.insert(vec({1, 2, 3})), DataError);
  EXPECT_EQ(birch({}, 50, 0.5).clusters, 0u);
}
