#pragma once

// Top-n candidate selection and the evaluation metrics built on it.

#include "logrca/error.hpp"
#include "logrca/log_model.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace logrca {

struct ScoredLine {
  LineId id = 0;
  double score = 0.0;
  Micros timestamp = 0;
};

inline void to_json(nlohmann::json &j, const ScoredLine &s) {
  j = {{"id", s.id}, {"score", s.score}, {"ts", s.timestamp}};
}

struct CandidateSet {
  std::size_t window = 0;
  std::size_t n = 0;
  std::vector<ScoredLine> candidates; // ascending (timestamp, id)
};

/// Higher score first; ties go to the earlier line, then the lower id.
inline bool rank_before(const ScoredLine &a, const ScoredLine &b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
  return a.id < b.id;
}

inline bool chronological(const ScoredLine &a, const ScoredLine &b) {
  return a.timestamp != b.timestamp ? a.timestamp < b.timestamp : a.id < b.id;
}

/// The n highest-scoring lines, returned in chronological order.
inline CandidateSet select_top_n(std::span<const ScoredLine> scored, std::size_t n,
                                 std::size_t window = 0) {
  if (n < 1) throw ConfigError("n must be >= 1");
  CandidateSet out;
  out.window = window;
  out.n = n;
  out.candidates.assign(scored.begin(), scored.end());
  const std::size_t k = std::min(n, out.candidates.size());
  std::partial_sort(out.candidates.begin(), out.candidates.begin() + static_cast<std::ptrdiff_t>(k),
                    out.candidates.end(), rank_before);
  out.candidates.resize(k);
  std::sort(out.candidates.begin(), out.candidates.end(), chronological);
  return out;
}

namespace detail {
inline std::size_t hits(const CandidateSet &c, const std::vector<LineId> &truth) {
  std::vector<LineId> sorted = truth;
  std::sort(sorted.begin(), sorted.end());
  std::size_t h = 0;
  for (const auto &s : c.candidates) h += std::binary_search(sorted.begin(), sorted.end(), s.id);
  return h;
}
} // namespace detail

/// |candidates ∩ truth| / |candidates|.
inline double precision_at(const CandidateSet &c, const std::vector<LineId> &truth) {
  if (c.candidates.empty()) return 0.0;
  return static_cast<double>(detail::hits(c, truth)) / static_cast<double>(c.candidates.size());
}

/// |candidates ∩ truth| / |truth|.
inline double recall_at(const CandidateSet &c, const std::vector<LineId> &truth) {
  if (truth.empty()) throw DataError("recall undefined for an empty truth set");
  return static_cast<double>(detail::hits(c, truth)) / static_cast<double>(truth.size());
}

/// Every ground-truth line is among the candidates.
inline bool full_coverage(const CandidateSet &c, const std::vector<LineId> &truth) {
  return detail::hits(c, truth) == truth.size();
}

/// Scores of one window from one scorer.
struct WindowScores {
  FailureId failure_id = 0;
  std::vector<ScoredLine> lines;
  std::optional<std::vector<LineId>> truth;
};

struct EvalRow {
  std::string scorer;
  std::size_t n = 0;
  double avg_precision = 0.0;
  double avg_recall = 0.0;
  std::size_t full_coverage_count = 0;
  std::size_t windows_evaluated = 0;
  struct PerWindow {
    FailureId failure_id;
    std::size_t candidates;
    std::size_t truth;
    double precision;
    double recall;
    bool full_coverage;
  };
  std::vector<PerWindow> windows;
};

/// Averages reported in the original study on its production dataset, kept
/// as annotation only.
struct ReferencePoints {
  static constexpr double kAtN10 = 0.935;
  static constexpr double kAtN20 = 0.866;
  static constexpr double kAtN50 = 0.577;
  static constexpr int kFullCoverage = 65;
  static constexpr int kFullCoverageOf = 80;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::vector<std::string> warnings;

  const EvalRow *find(const std::string &scorer, std::size_t n) const {
    for (const auto &r : rows) {
      if (r.scorer == scorer && r.n == n) return &r;
    }
    return nullptr;
  }

  nlohmann::json to_json() const {
    nlohmann::json rs = nlohmann::json::array();
    for (const auto &r : rows) {
      nlohmann::json ws = nlohmann::json::array();
      for (const auto &w : r.windows) {
        ws.push_back({{"failure_id", w.failure_id},
                      {"candidates", w.candidates},
                      {"truth", w.truth},
                      {"precision", w.precision},
                      {"recall", w.recall},
                      {"full_coverage", w.full_coverage}});
      }
      rs.push_back({{"scorer", r.scorer},
                    {"n", r.n},
                    {"avg_precision", r.avg_precision},
                    {"avg_recall", r.avg_recall},
                    {"full_coverage_count", r.full_coverage_count},
                    {"windows_evaluated", r.windows_evaluated},
                    {"windows", std::move(ws)}});
    }
    return {{"rows", std::move(rs)},
            {"warnings", warnings},
            {"reference",
             {{"note", "averages reported on a proprietary production dataset; not comparable"},
              {"fraction_root_cause_in_candidates", {{"10", ReferencePoints::kAtN10},
                                                     {"20", ReferencePoints::kAtN20},
                                                     {"50", ReferencePoints::kAtN50}}},
              {"full_coverage_at_50", ReferencePoints::kFullCoverage},
              {"full_coverage_of", ReferencePoints::kFullCoverageOf}}}};
  }

  std::string table() const {
    std::ostringstream os;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-10s %5s %14s %11s %14s %8s\n", "scorer", "n",
                  "precision@n", "recall@n", "full-coverage", "windows");
    os << buf;
    for (const auto &r : rows) {
      std::snprintf(buf, sizeof buf, "%-10s %5zu %14.4f %11.4f %14zu %8zu\n", r.scorer.c_str(), r.n,
                    r.avg_precision, r.avg_recall, r.full_coverage_count, r.windows_evaluated);
      os << buf;
    }
    os << "precision@n = fraction of returned candidates that are root-cause lines\n"
       << "recall@n    = fraction of root-cause lines that were returned\n";
    return os.str();
  }
};

/// Averages precision@n and recall@n per scorer and n over the windows that
/// carry a non-empty truth set.
inline EvalReport eval_report(const std::map<std::string, std::vector<WindowScores>> &runs,
                              const std::vector<std::size_t> &ns) {
  EvalReport rep;
  for (const auto &[scorer, windows] : runs) {
    std::size_t usable = 0;
    for (const auto &w : windows) {
      if (w.truth && !w.truth->empty()) {
        ++usable;
      } else if (scorer == runs.begin()->first) {
        rep.warnings.push_back("window of failure " + std::to_string(w.failure_id) +
                               " has no ground truth; excluded from averages");
      }
    }
    if (usable == 0) throw DataError("no window with ground truth to evaluate");
    for (std::size_t n : ns) {
      EvalRow row;
      row.scorer = scorer;
      row.n = n;
      for (std::size_t i = 0; i < windows.size(); ++i) {
        const auto &w = windows[i];
        if (!w.truth || w.truth->empty()) continue;
        const auto cands = select_top_n(w.lines, n, i);
        EvalRow::PerWindow pw{w.failure_id,
                              cands.candidates.size(),
                              w.truth->size(),
                              precision_at(cands, *w.truth),
                              recall_at(cands, *w.truth),
                              full_coverage(cands, *w.truth)};
        row.avg_precision += pw.precision;
        row.avg_recall += pw.recall;
        row.full_coverage_count += pw.full_coverage;
        row.windows.push_back(pw);
      }
      row.windows_evaluated = row.windows.size();
      row.avg_precision /= static_cast<double>(row.windows_evaluated);
      row.avg_recall /= static_cast<double>(row.windows_evaluated);
      rep.rows.push_back(std::move(row));
    }
  }
  return rep;
}

} // namespace logrca
