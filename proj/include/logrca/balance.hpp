#pragma once

// Root-cause-type estimation and U-class balancing.
//
// Each window is summarized by the services that produced its lines; BIRCH
// groups similar windows into estimated root-cause types; every cluster's
// U lines are then upsampled towards a target size in [max/2, max].

#include "logrca/birch.hpp"
#include "logrca/error.hpp"
#include "logrca/log_model.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

namespace logrca {

using ServiceIndex = std::map<std::string, Eigen::Index>;

/// Dimension per unique service in the corpus, in lexicographic order.
inline ServiceIndex build_service_index(const Corpus &corpus) {
  std::set<std::string> names;
  for (const auto &l : corpus.lines()) names.insert(l.service);
  ServiceIndex idx;
  Eigen::Index i = 0;
  for (const auto &n : names) idx.emplace(n, i++);
  return idx;
}

struct ServiceVector {
  std::size_t window = 0;
  Eigen::VectorXd values;
};

/// Per-service line counts (or presence when `binary`), L2-normalized.
/// Empty windows map to the zero vector.
inline ServiceVector service_vector(const InvestigationWindow &window, const Corpus &corpus,
                                    const ServiceIndex &index, bool binary = false,
                                    std::size_t window_pos = 0) {
  ServiceVector v{window_pos, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(index.size()))};
  for (LineId id : window.lines) {
    const auto &service = corpus.at(id).service;
    auto it = index.find(service);
    if (it == index.end()) {
      throw DataError("service '" + service + "' missing from the service index");
    }
    if (binary) {
      v.values[it->second] = 1.0;
    } else {
      v.values[it->second] += 1.0;
    }
  }
  const double norm = v.values.norm();
  if (norm > 0.0) v.values /= norm;
  return v;
}

struct ClusterAssignment {
  /// Cluster id per window, by window position.
  std::vector<int> window_cluster;
  std::size_t clusters = 0;
  /// Distinct U lines attributed to each cluster.
  std::vector<std::size_t> line_counts;
};

/// Clusters windows by their service vectors. Insertion follows window order.
/// A line shared by several windows is attributed to the earliest window's
/// cluster.
inline ClusterAssignment cluster_windows(const std::vector<InvestigationWindow> &windows,
                                         const Corpus &corpus, const ServiceIndex &index,
                                         int branching, double threshold,
                                         bool binary = false) {
  ClusterAssignment a;
  std::vector<Eigen::VectorXd> vecs;
  vecs.reserve(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    vecs.push_back(service_vector(windows[i], corpus, index, binary, i).values);
  }
  auto r = birch(vecs, branching, threshold);
  a.window_cluster = std::move(r.labels);
  a.clusters = r.clusters;
  a.line_counts.assign(a.clusters, 0);
  std::set<LineId> seen;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    for (LineId id : windows[i].lines) {
      if (seen.insert(id).second) ++a.line_counts[static_cast<std::size_t>(a.window_cluster[i])];
    }
  }
  return a;
}

struct BalancePlan {
  std::vector<std::size_t> counts;
  std::vector<std::size_t> targets;
  std::size_t min_count = 0;
  std::size_t max_count = 0;
};

/// Min-max maps each cluster size into [max/2, max], rounded to the nearest
/// integer. All-equal sizes are returned unchanged.
inline BalancePlan target_sizes(const std::vector<std::size_t> &counts) {
  if (counts.empty()) throw DataError("target_sizes needs at least one cluster");
  BalancePlan plan;
  plan.counts = counts;
  plan.min_count = *std::min_element(counts.begin(), counts.end());
  plan.max_count = *std::max_element(counts.begin(), counts.end());
  plan.targets.reserve(counts.size());
  const double lo = static_cast<double>(plan.min_count);
  const double hi = static_cast<double>(plan.max_count);
  for (std::size_t c : counts) {
    if (plan.max_count == plan.min_count) {
      plan.targets.push_back(c);
      continue;
    }
    const double t = (static_cast<double>(c) - lo) / (hi - lo) * (hi - hi / 2.0) + hi / 2.0;
    plan.targets.push_back(static_cast<std::size_t>(std::llround(t)));
  }
  return plan;
}

/// Overload that skips clusters with zero lines (empty windows); their
/// target stays zero.
inline BalancePlan target_sizes_nonempty(const std::vector<std::size_t> &counts) {
  std::vector<std::size_t> nonzero;
  for (auto c : counts) {
    if (c > 0) nonzero.push_back(c);
  }
  BalancePlan plan;
  plan.counts = counts;
  plan.targets.assign(counts.size(), 0);
  if (nonzero.empty()) return plan;
  auto inner = target_sizes(nonzero);
  plan.min_count = inner.min_count;
  plan.max_count = inner.max_count;
  std::size_t k = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] > 0) plan.targets[i] = inner.targets[k++];
  }
  return plan;
}

struct UnknownSample {
  LineId line = 0;
  int cluster = -1;
  bool resampled = false;
};

/// P untouched, U as a multiset (originals plus seeded resamples).
struct BalancedDataset {
  std::vector<LineId> positives;
  std::vector<UnknownSample> unknowns;

  double q() const {
    return static_cast<double>(positives.size()) /
           static_cast<double>(positives.size() + unknowns.size());
  }

  nlohmann::json to_json() const {
    nlohmann::json u = nlohmann::json::array();
    for (const auto &s : unknowns) u.push_back({s.line, s.cluster, s.resampled});
    return {{"positives", positives}, {"unknowns", u}, {"q", q()}};
  }
};

namespace detail {
// Unbiased bounded draw; fixed across standard libraries.
inline std::size_t draw_index(std::mt19937_64 &rng, std::size_t n) {
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return static_cast<std::size_t>(v % bound);
}
} // namespace detail

/// The unbalanced dataset: every U line exactly once.
inline BalancedDataset unbalanced(const PUDataset &dataset) {
  BalancedDataset out;
  out.positives = dataset.positives();
  for (LineId id : dataset.unknowns()) out.unknowns.push_back({id, -1, false});
  return out;
}

/// Upsamples each cluster's U lines with replacement until it reaches its
/// target. P is copied unchanged.
inline BalancedDataset apply_balance(const PUDataset &dataset,
                                     const std::vector<InvestigationWindow> &windows,
                                     const ClusterAssignment &assignment,
                                     const BalancePlan &plan, std::uint64_t seed) {
  if (plan.targets.size() != assignment.clusters) {
    throw DataError("balance plan does not cover every cluster");
  }
  std::vector<std::vector<LineId>> members(assignment.clusters);
  std::set<LineId> seen;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto c = static_cast<std::size_t>(assignment.window_cluster[i]);
    for (LineId id : windows[i].lines) {
      if (seen.insert(id).second) members[c].push_back(id);
    }
  }

  BalancedDataset out;
  out.positives = dataset.positives();
  for (std::size_t c = 0; c < members.size(); ++c) {
    for (LineId id : members[c]) out.unknowns.push_back({id, static_cast<int>(c), false});
  }
  // U lines not covered by any window would mean the windows and dataset
  // disagree.
  if (out.unknowns.size() != dataset.unknowns().size()) {
    throw DataError("windows do not match the dataset's U class");
  }
  std::sort(out.unknowns.begin(), out.unknowns.end(),
            [](const UnknownSample &a, const UnknownSample &b) { return a.line < b.line; });

  std::mt19937_64 rng(seed);
  for (std::size_t c = 0; c < members.size(); ++c) {
    const auto &m = members[c];
    if (m.empty()) continue;
    for (std::size_t k = m.size(); k < plan.targets[c]; ++k) {
      out.unknowns.push_back({m[detail::draw_index(rng, m.size())], static_cast<int>(c), true});
    }
  }
  return out;
}

inline nlohmann::json balance_report_json(const ClusterAssignment &assignment,
                                          const BalancePlan &plan,
                                          const std::vector<InvestigationWindow> &windows,
                                          int branching, double threshold, bool enabled) {
  nlohmann::json clusters = nlohmann::json::array();
  for (std::size_t c = 0; c < assignment.clusters; ++c) {
    nlohmann::json ws = nlohmann::json::array();
    for (std::size_t i = 0; i < windows.size(); ++i) {
      if (static_cast<std::size_t>(assignment.window_cluster[i]) == c) {
        ws.push_back(windows[i].failure_id);
      }
    }
    clusters.push_back({{"cluster", c},
                        {"lines", plan.counts[c]},
                        {"target", plan.targets[c]},
                        {"windows", std::move(ws)}});
  }
  return {{"enabled", enabled},
          {"birch", {{"branching", branching}, {"threshold", threshold}}},
          {"min_lines", plan.min_count},
          {"max_lines", plan.max_count},
          {"clusters", std::move(clusters)}};
}

} // namespace logrca
