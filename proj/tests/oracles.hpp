#pragma once

// Independent reference implementations used to check the library:
// generators of placeholder tokens with known classes, brute-force
// clustering statistics, exhaustive k-means and a full-sort top-n.

#include "logrca/birch.hpp"
#include "logrca/ranking.hpp"
#include "logrca/tokenizer.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <tuple>
#include <vector>

namespace oracle {

struct LabeledToken {
  std::string text;
  std::string expected; // placeholder, or the literal text itself
};

/// Draws a token of a randomly chosen kind; the expected class follows from
/// how the token was built, not from the tokenizer's predicates.
inline LabeledToken fuzz_token(std::mt19937_64 &rng) {
  auto pick = [&](std::uint64_t n) { return rng() % n; };
  const char *hex_lower = "0123456789abcdef";
  const char *letters = "abcdef";
  switch (pick(9)) {
  case 0: { // valid IPv4
    std::string s;
    for (int i = 0; i < 4; ++i) s += (i ? "." : "") + std::to_string(pick(256));
    return {s, "[IP]"};
  }
  case 1: { // IPv4-like with an octet out of range: stays literal
    std::string s;
    const auto bad = pick(4);
    for (std::uint64_t i = 0; i < 4; ++i) s += (i ? "." : "") + std::to_string(i == bad ? 256 + pick(700) : pick(256));
    return {s, s};
  }
  case 2: { // three octets only: literal
    std::string s;
    for (int i = 0; i < 3; ++i) s += (i ? "." : "") + std::to_string(pick(256));
    return {s, s};
  }
  case 3: { // 0x-prefixed hex
    std::string s = pick(2) ? "0x" : "0X";
    const auto len = 1 + pick(12);
    for (std::uint64_t i = 0; i < len; ++i) s += hex_lower[pick(16)];
    return {s, "[HEX]"};
  }
  case 4: { // bare hex, at least 4 digits, at least one letter
    const auto len = 4 + pick(12);
    std::string s;
    for (std::uint64_t i = 0; i < len; ++i) s += hex_lower[pick(16)];
    s[pick(len)] = letters[pick(6)];
    return {s, "[HEX]"};
  }
  case 5: { // large decimal integer: [NUM]
    const auto v = 10 + pick(1'000'000'000);
    return {std::to_string(v), "[NUM]"};
  }
  case 6: { // small integer below the threshold: literal
    const auto s = std::to_string(pick(10));
    return {s, s};
  }
  case 7: { // address
    std::string s = "@svc" + std::to_string(pick(100)) + ".obj" + std::to_string(pick(100));
    return {s, "[ADDR]"};
  }
  default: { // short word with letters beyond f: literal
    const char *w[] = {"retry", "ok", "gateway", "zone", "kx12", "0xZZ", "12ab3z", "x"};
    std::string s = w[pick(8)];
    return {s, s};
  }
  }
}

/// CF of a set of points computed from scratch.
inline logrca::ClusteringFeature brute_force_cf(const std::vector<Eigen::VectorXd> &points,
                                                const std::vector<int> &labels, int cluster,
                                                Eigen::Index dim) {
  logrca::ClusteringFeature cf(dim);
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (labels[i] != cluster) continue;
    cf.n += 1.0;
    cf.ls += points[i];
    cf.ss += points[i].squaredNorm();
  }
  return cf;
}

/// Minimum within-cluster sum of squares partition over every assignment of
/// points to k labels (k^n candidates, so keep n small).
inline std::vector<int> exhaustive_kmeans(const std::vector<Eigen::VectorXd> &points, int k) {
  const std::size_t n = points.size();
  std::vector<int> assign(n, 0), best;
  double best_cost = std::numeric_limits<double>::infinity();
  std::function<void(std::size_t, int)> rec = [&](std::size_t i, int used) {
    if (i == n) {
      if (used != k) return;
      double cost = 0.0;
      for (int c = 0; c < k; ++c) {
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(points[0].size());
        int cnt = 0;
        for (std::size_t j = 0; j < n; ++j) {
          if (assign[j] == c) {
            mean += points[j];
            ++cnt;
          }
        }
        mean /= cnt;
        for (std::size_t j = 0; j < n; ++j) {
          if (assign[j] == c) cost += (points[j] - mean).squaredNorm();
        }
      }
      if (cost < best_cost) {
        best_cost = cost;
        best = assign;
      }
      return;
    }
    // Canonical labelling: a point may open at most one new label.
    for (int c = 0; c <= std::min(used, k - 1); ++c) {
      assign[i] = c;
      rec(i + 1, std::max(used, c + 1));
    }
  };
  rec(0, 0);
  return best;
}

/// True when two labelings induce the same partition.
inline bool same_partition(const std::vector<int> &a, const std::vector<int> &b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      if ((a[i] == a[j]) != (b[i] == b[j])) return false;
    }
  }
  return true;
}

/// Top-n by sorting the whole list on (-score, timestamp, id), then
/// reordering the kept lines by (timestamp, id).
inline std::vector<logrca::ScoredLine> full_sort_top_n(std::vector<logrca::ScoredLine> lines,
                                                       std::size_t n) {
  std::sort(lines.begin(), lines.end(), [](const auto &a, const auto &b) {
    return std::make_tuple(-a.score, a.timestamp, a.id) < std::make_tuple(-b.score, b.timestamp, b.id);
  });
  if (lines.size() > n) lines.resize(n);
  std::sort(lines.begin(), lines.end(), [](const auto &a, const auto &b) {
    return std::make_tuple(a.timestamp, a.id) < std::make_tuple(b.timestamp, b.id);
  });
  return lines;
}

/// Random scored list with deliberately frequent score and timestamp ties.
inline std::vector<logrca::ScoredLine> random_scored(std::mt19937_64 &rng, std::size_t size) {
  std::vector<logrca::ScoredLine> v;
  for (std::size_t i = 0; i < size; ++i) {
    v.push_back({static_cast<logrca::LineId>(rng() % 100000), static_cast<double>(rng() % 20) / 4.0,
                 static_cast<logrca::Micros>(rng() % 50)});
  }
  // Line ids are unique within a window.
  std::sort(v.begin(), v.end(), [](const auto &a, const auto &b) { return a.id < b.id; });
  v.erase(std::unique(v.begin(), v.end(), [](const auto &a, const auto &b) { return a.id == b.id; }), v.end());
  std::shuffle(v.begin(), v.end(), rng);
  return v;
}

} // namespace oracle
