#pragma once

// BIRCH clustering over a CF-tree of (N, LS, SS) clustering features.
// Leaf subclusters are the final clusters; there is no global refinement.

#include "logrca/error.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <memory>
#include <vector>

namespace logrca {

/// Clustering feature: member count, linear sum, and sum of squared norms.
struct ClusteringFeature {
  double n = 0.0;
  Eigen::VectorXd ls;
  double ss = 0.0;

  explicit ClusteringFeature(Eigen::Index dim = 0) : ls(Eigen::VectorXd::Zero(dim)) {}

  static ClusteringFeature of(const Eigen::VectorXd &x) {
    ClusteringFeature cf(x.size());
    cf.n = 1.0;
    cf.ls = x;
    cf.ss = x.squaredNorm();
    return cf;
  }

  void merge(const ClusteringFeature &o) {
    n += o.n;
    ls += o.ls;
    ss += o.ss;
  }

  ClusteringFeature merged(const ClusteringFeature &o) const {
    ClusteringFeature out = *this;
    out.merge(o);
    return out;
  }

  Eigen::VectorXd centroid() const { return ls / n; }

  /// Root-mean-square distance of members to the centroid.
  double radius() const {
    if (n <= 0.0) return 0.0;
    const double r2 = ss / n - (ls / n).squaredNorm();
    return r2 > 0.0 ? std::sqrt(r2) : 0.0;
  }
};

class CFTree {
public:
  struct Node;

  struct Entry {
    ClusteringFeature cf;
    std::unique_ptr<Node> child; // null in leaves
    int subcluster = -1;         // leaf entries only
  };

  struct Node {
    bool leaf = true;
    std::vector<Entry> entries;
  };

  CFTree(Eigen::Index dim, int branching, double threshold)
      : dim_(dim), branching_(branching), threshold_(threshold),
        root_(std::make_unique<Node>()) {
    if (branching < 2) throw ConfigError("BIRCH branching factor must be >= 2");
    if (!(threshold > 0.0)) throw ConfigError("BIRCH threshold must be > 0");
  }

  /// Inserts a point and returns the id of the leaf subcluster it joined.
  int insert(const Eigen::VectorXd &x) {
    if (x.size() != dim_) throw DataError("BIRCH input dimension mismatch");
    int sub = -1;
    auto split = insert_into(*root_, ClusteringFeature::of(x), sub);
    if (split) {
      auto old_root = std::move(root_);
      root_ = std::make_unique<Node>();
      root_->leaf = false;
      root_->entries.push_back(summarize(std::move(old_root)));
      root_->entries.push_back(summarize(std::move(split)));
    }
    return sub;
  }

  std::size_t subcluster_count() const { return subclusters_; }

  const Node &root() const { return *root_; }

  /// Leaf CF of every subcluster, indexed by subcluster id.
  std::vector<ClusteringFeature> leaf_features() const {
    std::vector<ClusteringFeature> out(subclusters_, ClusteringFeature(dim_));
    collect(*root_, out);
    return out;
  }

private:
  static Entry summarize(std::unique_ptr<Node> node) {
    Entry e;
    e.cf = ClusteringFeature(node->entries.front().cf.ls.size());
    for (const auto &c : node->entries) e.cf.merge(c.cf);
    e.child = std::move(node);
    return e;
  }

  static std::size_t closest(const Node &node, const Eigen::VectorXd &x) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < node.entries.size(); ++i) {
      const double d = (node.entries[i].cf.centroid() - x).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    return best;
  }

  // Returns a new sibling node when `node` overflowed and was split.
  std::unique_ptr<Node> insert_into(Node &node, const ClusteringFeature &point, int &sub) {
    const Eigen::VectorXd x = point.centroid();
    if (node.leaf) {
      if (!node.entries.empty()) {
        const std::size_t i = closest(node, x);
        if (node.entries[i].cf.merged(point).radius() <= threshold_) {
          node.entries[i].cf.merge(point);
          sub = node.entries[i].subcluster;
          return nullptr;
        }
      }
      Entry e;
      e.cf = point;
      e.subcluster = static_cast<int>(subclusters_++);
      sub = e.subcluster;
      node.entries.push_back(std::move(e));
    } else {
      const std::size_t i = closest(node, x);
      auto split = insert_into(*node.entries[i].child, point, sub);
      if (split) {
        // Recompute the CF of the shrunken child, then add its new sibling.
        Entry &child = node.entries[i];
        child.cf = ClusteringFeature(dim_);
        for (const auto &c : child.child->entries) child.cf.merge(c.cf);
        node.entries.push_back(summarize(std::move(split)));
      } else {
        node.entries[i].cf.merge(point);
      }
    }
    if (node.entries.size() > static_cast<std::size_t>(branching_)) return split_node(node);
    return nullptr;
  }

  // Farthest pair of entries seed two groups; the rest go to the nearer seed.
  static std::unique_ptr<Node> split_node(Node &node) {
    const std::size_t n = node.entries.size();
    std::size_t a = 0, b = 1;
    double far = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double d =
            (node.entries[i].cf.centroid() - node.entries[j].cf.centroid()).squaredNorm();
        if (d > far) {
          far = d;
          a = i;
          b = j;
        }
      }
    }
    const Eigen::VectorXd ca = node.entries[a].cf.centroid();
    const Eigen::VectorXd cb = node.entries[b].cf.centroid();
    auto sibling = std::make_unique<Node>();
    sibling->leaf = node.leaf;
    std::vector<Entry> keep;
    for (std::size_t i = 0; i < n; ++i) {
      auto &e = node.entries[i];
      bool to_b;
      if (i == a) {
        to_b = false;
      } else if (i == b) {
        to_b = true;
      } else {
        const Eigen::VectorXd c = e.cf.centroid();
        to_b = (c - cb).squaredNorm() < (c - ca).squaredNorm();
      }
      (to_b ? sibling->entries : keep).push_back(std::move(e));
    }
    node.entries = std::move(keep);
    return sibling;
  }

  static void collect(const Node &node, std::vector<ClusteringFeature> &out) {
    for (const auto &e : node.entries) {
      if (node.leaf) {
        out[static_cast<std::size_t>(e.subcluster)] = e.cf;
      } else {
        collect(*e.child, out);
      }
    }
  }

  Eigen::Index dim_;
  int branching_;
  double threshold_;
  std::unique_ptr<Node> root_;
  std::size_t subclusters_ = 0;
};

struct BirchResult {
  /// Cluster per input vector, renumbered by first appearance.
  std::vector<int> labels;
  std::size_t clusters = 0;
  /// Leaf CF per cluster, indexed by the renumbered cluster id.
  std::vector<ClusteringFeature> features;
};

/// Inserts points in index order into a CF-tree with branching factor B and
/// radius threshold T, and reports each point's leaf subcluster.
inline BirchResult birch(const std::vector<Eigen::VectorXd> &points, int branching,
                         double threshold) {
  BirchResult r;
  if (points.empty()) return r;
  CFTree tree(points.front().size(), branching, threshold);
  std::vector<int> raw;
  raw.reserve(points.size());
  for (const auto &p : points) raw.push_back(tree.insert(p));

  std::vector<int> remap(tree.subcluster_count(), -1);
  int next = 0;
  r.labels.reserve(raw.size());
  for (int s : raw) {
    auto &m = remap[static_cast<std::size_t>(s)];
    if (m < 0) m = next++;
    r.labels.push_back(m);
  }
  r.clusters = static_cast<std::size_t>(next);
  auto leaf = tree.leaf_features();
  r.features.assign(r.clusters, ClusteringFeature(points.front().size()));
  for (std::size_t s = 0; s < leaf.size(); ++s) {
    if (remap[s] >= 0) r.features[static_cast<std::size_t>(remap[s])] = leaf[s];
  }
  return r;
}

} // namespace logrca
