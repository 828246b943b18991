#pragma once

#include "logrca/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace logrca {

using LineId = std::uint64_t;
using FailureId = std::uint64_t;
/// Microseconds since the Unix epoch.
using Micros = std::int64_t;

inline Micros seconds_to_micros(double s) {
  return static_cast<Micros>(std::llround(s * 1e6));
}

struct LogLine {
  LineId id = 0;
  Micros timestamp = 0;
  std::string service;
  std::string content;
  std::optional<std::string> severity;
};

struct FailureEvent {
  FailureId id = 0;
  Micros timestamp = 0;
  /// Ground-truth cause name. Evaluation only.
  std::optional<std::string> label;
};

/// All lines in [failure - duration, failure), sorted by (timestamp, id).
struct InvestigationWindow {
  FailureId failure_id = 0;
  Micros failure_ts = 0;
  double duration_s = 3.0;
  std::vector<LineId> lines;
  std::optional<std::vector<LineId>> ground_truth;

  Micros begin_ts() const { return failure_ts - seconds_to_micros(duration_s); }
  Micros end_ts() const { return failure_ts; }
};

/// A window stripped of its ground truth, the only view training code sees.
inline InvestigationWindow without_truth(InvestigationWindow w) {
  w.ground_truth.reset();
  return w;
}

inline bool line_order(const LogLine &a, const LogLine &b) {
  return a.timestamp != b.timestamp ? a.timestamp < b.timestamp : a.id < b.id;
}

/// Immutable, time-ordered corpus with id lookup.
class Corpus {
public:
  Corpus() = default;

  explicit Corpus(std::vector<LogLine> lines) : lines_(std::move(lines)) {
    std::sort(lines_.begin(), lines_.end(), line_order);
    index_.reserve(lines_.size());
    for (std::size_t i = 0; i < lines_.size(); ++i) {
      if (!index_.emplace(lines_[i].id, i).second) {
        throw DataError("duplicate log line id " + std::to_string(lines_[i].id));
      }
    }
  }

  const std::vector<LogLine> &lines() const { return lines_; }
  std::size_t size() const { return lines_.size(); }
  bool empty() const { return lines_.empty(); }

  bool contains(LineId id) const { return index_.count(id) != 0; }

  const LogLine &at(LineId id) const {
    auto it = index_.find(id);
    if (it == index_.end()) {
      throw DataError("unknown log line id " + std::to_string(id));
    }
    return lines_[it->second];
  }

  /// Position of a line in time order.
  std::size_t position(LineId id) const {
    auto it = index_.find(id);
    if (it == index_.end()) {
      throw DataError("unknown log line id " + std::to_string(id));
    }
    return it->second;
  }

private:
  std::vector<LogLine> lines_;
  std::unordered_map<LineId, std::size_t> index_;
};

/// One window per failure, in failure order. Windows may overlap; a line
/// shared by two windows is listed in both.
inline std::vector<InvestigationWindow>
extract_windows(const Corpus &corpus, const std::vector<FailureEvent> &failures,
                double duration_s, Diagnostics *diag = nullptr) {
  if (!(duration_s > 0.0)) {
    throw ConfigError("window duration must be positive");
  }
  const auto &lines = corpus.lines();
  const Micros span = seconds_to_micros(duration_s);

  std::vector<InvestigationWindow> windows;
  windows.reserve(failures.size());
  for (const auto &f : failures) {
    InvestigationWindow w;
    w.failure_id = f.id;
    w.failure_ts = f.timestamp;
    w.duration_s = duration_s;
    const Micros lo = f.timestamp - span;
    auto first = std::lower_bound(
        lines.begin(), lines.end(), lo,
        [](const LogLine &l, Micros t) { return l.timestamp < t; });
    auto last = std::lower_bound(
        first, lines.end(), f.timestamp,
        [](const LogLine &l, Micros t) { return l.timestamp < t; });
    w.lines.reserve(static_cast<std::size_t>(last - first));
    for (auto it = first; it != last; ++it) {
      w.lines.push_back(it->id);
    }
    if (w.lines.empty() && diag != nullptr) {
      diag->warn("investigation window for failure " + std::to_string(f.id) +
                 " is empty");
    }
    windows.push_back(std::move(w));
  }
  return windows;
}

enum class Label : int { Positive = 0, Unknown = 1 };

/// Lines outside every window form P (label 0); lines inside any window
/// form U (label 1). q = |P| / (|P| + |U|).
class PUDataset {
public:
  PUDataset(std::vector<LineId> positives, std::vector<LineId> unknowns)
      : positives_(std::move(positives)), unknowns_(std::move(unknowns)) {
    std::sort(positives_.begin(), positives_.end());
    std::sort(unknowns_.begin(), unknowns_.end());
  }

  const std::vector<LineId> &positives() const { return positives_; }
  const std::vector<LineId> &unknowns() const { return unknowns_; }

  std::size_t size() const { return positives_.size() + unknowns_.size(); }

  double q() const {
    return static_cast<double>(positives_.size()) / static_cast<double>(size());
  }

  Label label(LineId id) const {
    if (std::binary_search(unknowns_.begin(), unknowns_.end(), id)) {
      return Label::Unknown;
    }
    if (std::binary_search(positives_.begin(), positives_.end(), id)) {
      return Label::Positive;
    }
    throw DataError("line " + std::to_string(id) + " is not in the dataset");
  }

  nlohmann::json to_json() const {
    nlohmann::json labels = nlohmann::json::array();
    // Merge in id order so the serialization is canonical.
    std::size_t i = 0, j = 0;
    while (i < positives_.size() || j < unknowns_.size()) {
      if (j == unknowns_.size() ||
          (i < positives_.size() && positives_[i] < unknowns_[j])) {
        labels.push_back({positives_[i++], 0});
      } else {
        labels.push_back({unknowns_[j++], 1});
      }
    }
    return {{"positives", positives_.size()},
            {"unknowns", unknowns_.size()},
            {"q", q()},
            {"labels", std::move(labels)}};
  }

private:
  std::vector<LineId> positives_;
  std::vector<LineId> unknowns_;
};

inline PUDataset assign_pu_labels(const Corpus &corpus,
                                  const std::vector<InvestigationWindow> &windows) {
  if (windows.empty()) {
    throw DataError("no investigation windows: class U would be empty");
  }
  std::vector<char> in_window(corpus.size(), 0);
  for (const auto &w : windows) {
    for (LineId id : w.lines) {
      in_window[corpus.position(id)] = 1;
    }
  }
  std::vector<LineId> pos, unk;
  const auto &lines = corpus.lines();
  for (std::size_t i = 0; i < lines.size(); ++i) {
    (in_window[i] ? unk : pos).push_back(lines[i].id);
  }
  if (unk.empty()) {
    throw DataError("all investigation windows are empty: class U is empty");
  }
  if (pos.empty()) {
    throw DataError("every line lies inside an investigation window: class P is empty");
  }
  return PUDataset(std::move(pos), std::move(unk));
}

} // namespace logrca
