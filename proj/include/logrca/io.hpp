#pragma once

// JSON-lines readers and writers for corpora, failure lists and ground truth.

#include "logrca/error.hpp"
#include "logrca/log_model.hpp"

#include <charconv>
#include <chrono>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>

#include <json.hpp>

namespace logrca {

namespace detail {

inline bool parse_int(std::string_view s, std::int64_t &out) {
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

inline std::string_view trim(std::string_view s) {
  const char *ws = " \t\r\n\f\v";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

} // namespace detail

/// Parses an RFC 3339 timestamp ("2024-01-02T03:04:05.123456Z",
/// "...+02:00") into microseconds since the epoch.
inline Micros parse_rfc3339(std::string_view s) {
  auto fail = [&]() -> Micros {
    throw DataError("invalid RFC3339 timestamp '" + std::string(s) + "'");
  };
  auto digits = [&](std::size_t pos, std::size_t n) -> int {
    if (pos + n > s.size()) fail();
    int v = 0;
    for (std::size_t i = pos; i < pos + n; ++i) {
      if (s[i] < '0' || s[i] > '9') fail();
      v = v * 10 + (s[i] - '0');
    }
    return v;
  };
  if (s.size() < 20) fail();
  const int year = digits(0, 4);
  if (s[4] != '-') fail();
  const int month = digits(5, 2);
  if (s[7] != '-') fail();
  const int day = digits(8, 2);
  if (s[10] != 'T' && s[10] != 't' && s[10] != ' ') fail();
  const int hour = digits(11, 2);
  if (s[13] != ':') fail();
  const int minute = digits(14, 2);
  if (s[16] != ':') fail();
  const int second = digits(17, 2);

  std::size_t pos = 19;
  std::int64_t frac_us = 0;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    int n = 0;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
      if (n < 6) frac_us = frac_us * 10 + (s[pos] - '0');
      ++n;
      ++pos;
    }
    if (n == 0) fail();
    for (int k = std::min(n, 6); k < 6; ++k) frac_us *= 10;
  }
  std::int64_t offset_s = 0;
  if (pos >= s.size()) fail();
  if (s[pos] == 'Z' || s[pos] == 'z') {
    ++pos;
  } else if (s[pos] == '+' || s[pos] == '-') {
    const int sign = s[pos] == '+' ? 1 : -1;
    const int oh = digits(pos + 1, 2);
    if (pos + 3 >= s.size() || s[pos + 3] != ':') fail();
    const int om = digits(pos + 4, 2);
    offset_s = sign * (oh * 3600 + om * 60);
    pos += 6;
  } else {
    fail();
  }
  if (pos != s.size()) fail();

  using namespace std::chrono;
  const year_month_day ymd{std::chrono::year{year},
                           std::chrono::month{static_cast<unsigned>(month)},
                           std::chrono::day{static_cast<unsigned>(day)}};
  if (!ymd.ok() || hour > 23 || minute > 59 || second > 60) fail();
  const auto days = sys_days{ymd}.time_since_epoch().count();
  const std::int64_t secs =
      static_cast<std::int64_t>(days) * 86400 + hour * 3600 + minute * 60 + second - offset_s;
  return secs * 1'000'000 + frac_us;
}

/// Accepts integer microseconds, a decimal string of microseconds, or RFC 3339.
inline Micros parse_timestamp(const nlohmann::json &v) {
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_number_unsigned()) return static_cast<Micros>(v.get<std::uint64_t>());
  if (v.is_string()) {
    const auto &s = v.get_ref<const std::string &>();
    std::int64_t out = 0;
    if (detail::parse_int(s, out)) return out;
    return parse_rfc3339(s);
  }
  throw DataError("timestamp must be an integer or an RFC3339 string");
}

struct CorpusLoad {
  Corpus corpus;
  std::size_t dropped_empty = 0;
};

inline CorpusLoad read_corpus(std::istream &in, Diagnostics *diag = nullptr) {
  std::vector<LogLine> lines;
  std::string row;
  std::size_t rowno = 0;
  std::size_t dropped = 0;
  while (std::getline(in, row)) {
    const std::uint64_t index = rowno++;
    if (detail::trim(row).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(row);
    } catch (const nlohmann::json::parse_error &e) {
      throw DataError("corpus row " + std::to_string(index) + ": " + e.what());
    }
    if (!j.contains("ts") || !j.contains("service") || !j.contains("msg")) {
      throw DataError("corpus row " + std::to_string(index) +
                      ": missing ts/service/msg");
    }
    LogLine l;
    l.id = j.contains("id") ? j["id"].get<LineId>() : index;
    l.timestamp = parse_timestamp(j["ts"]);
    l.service = j["service"].get<std::string>();
    l.content = j["msg"].get<std::string>();
    if (j.contains("severity") && j["severity"].is_string()) {
      l.severity = j["severity"].get<std::string>();
    }
    if (detail::trim(l.content).empty()) {
      ++dropped;
      continue;
    }
    lines.push_back(std::move(l));
  }
  if (dropped > 0 && diag != nullptr) {
    diag->warn("dropped " + std::to_string(dropped) + " line(s) with empty content");
  }
  return {Corpus(std::move(lines)), dropped};
}

inline CorpusLoad read_corpus_file(const std::string &path, Diagnostics *diag = nullptr) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file " + path);
  return read_corpus(in, diag);
}

inline nlohmann::json line_to_json(const LogLine &l) {
  nlohmann::json j = {{"id", l.id}, {"ts", l.timestamp}, {"service", l.service}, {"msg", l.content}};
  if (l.severity) j["severity"] = *l.severity;
  return j;
}

inline void write_corpus(std::ostream &out, const std::vector<LogLine> &lines) {
  for (const auto &l : lines) out << line_to_json(l).dump() << '\n';
}

/// Failures sorted by timestamp; duplicate timestamps are rejected.
inline std::vector<FailureEvent> read_failures(std::istream &in) {
  std::vector<FailureEvent> out;
  std::string row;
  std::size_t rowno = 0;
  while (std::getline(in, row)) {
    const std::uint64_t index = rowno++;
    if (detail::trim(row).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(row);
    } catch (const nlohmann::json::parse_error &e) {
      throw DataError("failure row " + std::to_string(index) + ": " + e.what());
    }
    if (!j.contains("ts")) {
      throw DataError("failure row " + std::to_string(index) + ": missing ts");
    }
    FailureEvent f;
    f.id = j.contains("id") ? j["id"].get<FailureId>() : index;
    f.timestamp = parse_timestamp(j["ts"]);
    if (j.contains("label") && j["label"].is_string()) f.label = j["label"].get<std::string>();
    out.push_back(std::move(f));
  }
  std::sort(out.begin(), out.end(), [](const FailureEvent &a, const FailureEvent &b) {
    return a.timestamp < b.timestamp;
  });
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i].timestamp == out[i - 1].timestamp) {
      throw DataError("failures " + std::to_string(out[i - 1].id) + " and " +
                      std::to_string(out[i].id) + " share a timestamp");
    }
  }
  return out;
}

inline std::vector<FailureEvent> read_failures_file(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open failure file " + path);
  return read_failures(in);
}

inline void write_failures(std::ostream &out, const std::vector<FailureEvent> &failures) {
  for (const auto &f : failures) {
    nlohmann::json j = {{"id", f.id}, {"ts", f.timestamp}};
    if (f.label) j["label"] = *f.label;
    out << j.dump() << '\n';
  }
}

using GroundTruth = std::map<FailureId, std::vector<LineId>>;

inline GroundTruth read_ground_truth(std::istream &in) {
  GroundTruth out;
  std::string row;
  std::size_t rowno = 0;
  while (std::getline(in, row)) {
    const std::size_t index = rowno++;
    if (detail::trim(row).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(row);
    } catch (const nlohmann::json::parse_error &e) {
      throw DataError("truth row " + std::to_string(index) + ": " + e.what());
    }
    if (!j.contains("failure_id") || !j.contains("line_ids")) {
      throw DataError("truth row " + std::to_string(index) + ": missing failure_id/line_ids");
    }
    auto &ids = out[j["failure_id"].get<FailureId>()];
    for (const auto &v : j["line_ids"]) ids.push_back(v.get<LineId>());
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  }
  return out;
}

inline GroundTruth read_ground_truth_file(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open ground-truth file " + path);
  return read_ground_truth(in);
}

inline void write_ground_truth(std::ostream &out, const GroundTruth &truth) {
  for (const auto &[fid, ids] : truth) {
    out << nlohmann::json{{"failure_id", fid}, {"line_ids", ids}}.dump() << '\n';
  }
}

/// Attaches ground truth to windows. Truth ids must lie inside their window.
inline void attach_ground_truth(std::vector<InvestigationWindow> &windows,
                                const GroundTruth &truth) {
  for (auto &w : windows) {
    auto it = truth.find(w.failure_id);
    if (it == truth.end()) continue;
    std::vector<LineId> sorted_lines = w.lines;
    std::sort(sorted_lines.begin(), sorted_lines.end());
    for (LineId id : it->second) {
      if (!std::binary_search(sorted_lines.begin(), sorted_lines.end(), id)) {
        throw DataError("ground-truth line " + std::to_string(id) +
                        " lies outside the window of failure " +
                        std::to_string(w.failure_id));
      }
    }
    w.ground_truth = it->second;
  }
}

} // namespace logrca
