#pragma once

// Statistical comparison scorer: TF-IDF over placeholder-abstracted tokens and
// a single CART decision tree trained on the PU labels. A line's score is the
// fraction of U-class training samples in the leaf it lands in.

#include "logrca/error.hpp"
#include "logrca/tokenizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace logrca {

using SparseVector = std::vector<std::pair<int, double>>; // sorted by feature

inline bool is_structural_token(const std::string &t) {
  return t == tok::kCls || t == tok::kPad;
}

class TfIdfModel {
public:
  std::size_t documents() const { return n_docs_; }
  std::size_t features() const { return terms_.size(); }
  const std::vector<std::string> &terms() const { return terms_; }
  const std::vector<double> &idf() const { return idf_; }
  const std::vector<std::size_t> &document_frequency() const { return df_; }

  int feature(const std::string &term) const {
    auto it = index_.find(term);
    return it == index_.end() ? -1 : it->second;
  }

  /// Learns document frequencies. idf = ln((1 + N) / (1 + df)) + 1.
  static TfIdfModel fit(std::span<const TokenSequence> docs) {
    if (docs.empty()) throw DataError("TF-IDF needs a non-empty corpus");
    std::map<std::string, std::size_t> df;
    for (const auto &d : docs) {
      std::vector<std::string> uniq;
      for (const auto &t : d.tokens) {
        if (!is_structural_token(t)) uniq.push_back(t);
      }
      std::sort(uniq.begin(), uniq.end());
      uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
      for (auto &t : uniq) ++df[t];
    }
    TfIdfModel m;
    m.n_docs_ = docs.size();
    for (auto &[t, n] : df) {
      m.index_.emplace(t, static_cast<int>(m.terms_.size()));
      m.terms_.push_back(t);
      m.df_.push_back(n);
      m.idf_.push_back(std::log((1.0 + static_cast<double>(m.n_docs_)) / (1.0 + static_cast<double>(n))) + 1.0);
    }
    return m;
  }

  /// Raw term count times idf; unknown tokens are ignored.
  SparseVector transform(const TokenSequence &doc) const {
    std::map<int, double> counts;
    for (const auto &t : doc.tokens) {
      if (is_structural_token(t)) continue;
      const int f = feature(t);
      if (f >= 0) counts[f] += 1.0;
    }
    SparseVector v;
    v.reserve(counts.size());
    for (auto [f, c] : counts) v.emplace_back(f, c * idf_[static_cast<std::size_t>(f)]);
    return v;
  }

  nlohmann::json to_json() const {
    nlohmann::json terms = nlohmann::json::array();
    for (std::size_t i = 0; i < terms_.size(); ++i) terms.push_back({terms_[i], df_[i]});
    return {{"documents", n_docs_}, {"terms", terms}};
  }

  static TfIdfModel from_json(const nlohmann::json &j) {
    TfIdfModel m;
    m.n_docs_ = j.at("documents").get<std::size_t>();
    for (const auto &e : j.at("terms")) {
      const auto t = e[0].get<std::string>();
      const auto n = e[1].get<std::size_t>();
      m.index_.emplace(t, static_cast<int>(m.terms_.size()));
      m.terms_.push_back(t);
      m.df_.push_back(n);
      m.idf_.push_back(std::log((1.0 + static_cast<double>(m.n_docs_)) / (1.0 + static_cast<double>(n))) + 1.0);
    }
    return m;
  }

private:
  std::size_t n_docs_ = 0;
  std::vector<std::string> terms_;
  std::vector<std::size_t> df_;
  std::vector<double> idf_;
  std::unordered_map<std::string, int> index_;
};

class DecisionTree {
public:
  struct Node {
    int feature = -1; // -1 for leaves
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    std::size_t positives = 0;
    std::size_t unknowns = 0;
    int depth = 0;

    bool leaf() const { return feature < 0; }
  };

  static constexpr int kDefaultMaxDepth = 30;

  /// Greedy Gini splits, minimum one sample per leaf. A split is taken only
  /// when it strictly lowers impurity.
  static DecisionTree train(std::span<const SparseVector> vectors, std::span<const Label> labels,
                            int max_depth = kDefaultMaxDepth) {
    if (vectors.size() != labels.size()) throw DataError("label count mismatch");
    if (vectors.empty()) throw DataError("decision tree needs training data");
    if (max_depth < 0) throw ConfigError("max_depth must be >= 0");
    DecisionTree t;
    t.max_depth_ = max_depth;
    std::vector<std::uint32_t> all(vectors.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<std::uint32_t>(i);
    t.grow(vectors, labels, all, 0);
    return t;
  }

  const Node &leaf_for(const SparseVector &v) const {
    int i = 0;
    while (!nodes_[static_cast<std::size_t>(i)].leaf()) {
      const auto &n = nodes_[static_cast<std::size_t>(i)];
      i = value_of(v, n.feature) <= n.threshold ? n.left : n.right;
    }
    return nodes_[static_cast<std::size_t>(i)];
  }

  /// Fraction of U-class training samples in the line's leaf, in [0, 1].
  double score(const SparseVector &v) const {
    const auto &n = leaf_for(v);
    return static_cast<double>(n.unknowns) / static_cast<double>(n.positives + n.unknowns);
  }

  const std::vector<Node> &nodes() const { return nodes_; }
  int max_depth() const { return max_depth_; }

  int depth() const {
    int d = 0;
    for (const auto &n : nodes_) d = std::max(d, n.depth);
    return d;
  }

  nlohmann::json to_json() const {
    nlohmann::json ns = nlohmann::json::array();
    for (const auto &n : nodes_) {
      ns.push_back({n.feature, n.threshold, n.left, n.right, n.positives, n.unknowns, n.depth});
    }
    return {{"max_depth", max_depth_}, {"nodes", ns}};
  }

  static DecisionTree from_json(const nlohmann::json &j) {
    DecisionTree t;
    t.max_depth_ = j.at("max_depth").get<int>();
    for (const auto &e : j.at("nodes")) {
      Node n;
      n.feature = e[0].get<int>();
      n.threshold = e[1].get<double>();
      n.left = e[2].get<int>();
      n.right = e[3].get<int>();
      n.positives = e[4].get<std::size_t>();
      n.unknowns = e[5].get<std::size_t>();
      n.depth = e[6].get<int>();
      t.nodes_.push_back(n);
    }
    if (t.nodes_.empty()) throw DataError("empty decision tree");
    return t;
  }

private:
  static double value_of(const SparseVector &v, int feature) {
    auto it = std::lower_bound(v.begin(), v.end(), feature,
                               [](const std::pair<int, double> &e, int f) { return e.first < f; });
    return (it != v.end() && it->first == feature) ? it->second : 0.0;
  }

  static double gini(double p, double u) {
    const double n = p + u;
    if (n <= 0.0) return 0.0;
    const double fp = p / n, fu = u / n;
    return 1.0 - fp * fp - fu * fu;
  }

  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double impurity = 0.0; // weighted child impurity
  };

  static Split best_split(std::span<const SparseVector> vectors, std::span<const Label> labels,
                          const std::vector<std::uint32_t> &idx, std::size_t np, std::size_t nu) {
    struct Entry {
      int feature;
      double value;
      bool unknown;
    };
    std::vector<Entry> entries;
    for (auto i : idx) {
      const bool unk = labels[i] == Label::Unknown;
      for (const auto &[f, v] : vectors[i]) entries.push_back({f, v, unk});
    }
    std::sort(entries.begin(), entries.end(), [](const Entry &a, const Entry &b) {
      return a.feature != b.feature ? a.feature < b.feature : a.value < b.value;
    });

    const double n = static_cast<double>(np + nu);
    Split best;
    best.impurity = gini(static_cast<double>(np), static_cast<double>(nu));
    const double parent = best.impurity;

    std::size_t s = 0;
    while (s < entries.size()) {
      std::size_t e = s;
      std::size_t fp = 0, fu = 0;
      while (e < entries.size() && entries[e].feature == entries[s].feature) {
        (entries[e].unknown ? fu : fp)++;
        ++e;
      }
      // Left side starts with every sample whose feature value is zero.
      double lp = static_cast<double>(np - fp), lu = static_cast<double>(nu - fu);
      double prev = 0.0;
      for (std::size_t k = s; k <= e; ++k) {
        const bool boundary = k == e || entries[k].value > prev;
        if (boundary && lp + lu > 0.0 && lp + lu < n) {
          const double rp = static_cast<double>(np) - lp, ru = static_cast<double>(nu) - lu;
          const double imp = ((lp + lu) * gini(lp, lu) + (rp + ru) * gini(rp, ru)) / n;
          if (imp < best.impurity - 1e-12 && k < e) {
            best.feature = entries[s].feature;
            best.threshold = (prev + entries[k].value) / 2.0;
            best.impurity = imp;
          }
        }
        if (k == e) break;
        prev = entries[k].value;
        (entries[k].unknown ? lu : lp) += 1.0;
      }
      s = e;
    }
    if (best.feature >= 0 && !(best.impurity < parent)) best.feature = -1;
    return best;
  }

  int grow(std::span<const SparseVector> vectors, std::span<const Label> labels,
           const std::vector<std::uint32_t> &idx, int depth) {
    Node node;
    node.depth = depth;
    for (auto i : idx) (labels[i] == Label::Unknown ? node.unknowns : node.positives)++;
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(node);
    if (depth >= max_depth_ || node.positives == 0 || node.unknowns == 0) return id;

    const auto split = best_split(vectors, labels, idx, node.positives, node.unknowns);
    if (split.feature < 0) return id;

    std::vector<std::uint32_t> left, right;
    for (auto i : idx) {
      (value_of(vectors[i], split.feature) <= split.threshold ? left : right).push_back(i);
    }
    nodes_[static_cast<std::size_t>(id)].feature = split.feature;
    nodes_[static_cast<std::size_t>(id)].threshold = split.threshold;
    const int l = grow(vectors, labels, left, depth + 1);
    const int r = grow(vectors, labels, right, depth + 1);
    nodes_[static_cast<std::size_t>(id)].left = l;
    nodes_[static_cast<std::size_t>(id)].right = r;
    return id;
  }

  int max_depth_ = kDefaultMaxDepth;
  std::vector<Node> nodes_;
};

/// TF-IDF vectorizer and tree bundled for persistence.
struct TreeBaseline {
  TfIdfModel tfidf;
  DecisionTree tree;

  double score(const TokenSequence &seq) const { return tree.score(tfidf.transform(seq)); }

  void save(const std::string &path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write baseline model " + path);
    out << nlohmann::json{{"version", 1}, {"tfidf", tfidf.to_json()}, {"tree", tree.to_json()}}.dump()
        << '\n';
  }

  static TreeBaseline load(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open baseline model " + path);
    const auto j = nlohmann::json::parse(in);
    return {TfIdfModel::from_json(j.at("tfidf")), DecisionTree::from_json(j.at("tree"))};
  }
};

} // namespace logrca
