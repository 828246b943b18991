#pragma once

// Read-only JSON API over the artifacts of a scored run. ApiService answers
// requests as plain function calls; serve() binds it to an HTTP listener.

#include "logrca/pipeline.hpp"

#include <charconv>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

namespace logrca {

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

inline ApiResponse api_error(int status, const std::string &message) {
  return {status, {{"error", message}, {"status", status}}};
}

/// Parses a non-negative decimal integer, rejecting anything else.
inline std::optional<std::uint64_t> parse_uint(const std::string &s) {
  std::uint64_t v = 0;
  const auto *end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc() || p != end) return std::nullopt;
  return v;
}

class ApiService {
public:
  static constexpr std::size_t kMaxContextLines = 2000;

  /// Loads the run config, corpus, window index and every available score
  /// set once; afterwards the service holds no mutable state.
  explicit ApiService(const std::string &out_dir) : config_(load_run_config(out_dir)), paths_{out_dir} {
    if (!std::filesystem::exists(paths_.windows_index())) {
      throw DataError("no scored windows in " + out_dir + "; run score first");
    }
    corpus_ = read_corpus_file(config_.corpus).corpus;
    index_ = nlohmann::json::parse(read_file(paths_.windows_index()));
    for (const auto &scorer : {"logrca", "tree"}) {
      if (!std::filesystem::exists(paths_.scores_dir(scorer))) continue;
      auto &m = scores_[scorer];
      for (auto &w : load_scores(paths_, scorer)) m.emplace(w.failure_id, std::move(w));
    }
    default_scorer_ = config_.scorers.front();
  }

  const RunConfig &config() const { return config_; }

  ApiResponse windows() const { return {200, index_}; }

  ApiResponse candidates(const std::string &id, const std::optional<std::string> &n,
                         const std::optional<std::string> &scorer) const {
    const auto fid = parse_uint(id);
    if (!fid || !has_window(*fid)) return api_error(404, "unknown window '" + id + "'");
    const auto k = parse_uint(n.value_or(""));
    if (!k || *k < 1) return api_error(400, "n must be an integer >= 1");
    const auto name = scorer.value_or(default_scorer_);
    auto it = scores_.find(name);
    if (it == scores_.end()) return api_error(409, "scores for scorer '" + name + "' are missing");
    const auto &w = it->second.at(*fid);
    const auto cands = select_top_n(w.lines, static_cast<std::size_t>(*k));
    return {200,
            {{"window", *fid},
             {"scorer", name},
             {"n", *k},
             {"candidates", candidates_json(cands, corpus_, w.truth)}}};
  }

  /// Corpus lines between two line ids (inclusive, in time order). Either
  /// bound defaults to the window's first or last line.
  ApiResponse lines(const std::string &id, const std::optional<std::string> &from,
                    const std::optional<std::string> &to) const {
    const auto fid = parse_uint(id);
    if (!fid || !has_window(*fid)) return api_error(404, "unknown window '" + id + "'");
    const auto &w = any_scores(*fid);
    if (!w) return api_error(409, "no scores for window " + id);
    auto position_of = [&](const std::optional<std::string> &s, bool first) -> std::optional<std::size_t> {
      if (!s) {
        if ((*w)->lines.empty()) return std::nullopt;
        return corpus_.position(first ? (*w)->lines.front().id : (*w)->lines.back().id);
      }
      const auto v = parse_uint(*s);
      if (!v || !corpus_.contains(*v)) return std::nullopt;
      return corpus_.position(*v);
    };
    const auto lo = position_of(from, true), hi = position_of(to, false);
    if (!lo || !hi) return api_error(400, "from/to must be known line ids");
    if (*lo > *hi) return api_error(400, "from must not come after to");
    const std::size_t last = std::min(*hi, *lo + kMaxContextLines - 1);
    nlohmann::json out = nlohmann::json::array();
    for (std::size_t p = *lo; p <= last; ++p) out.push_back(line_to_json(corpus_.lines()[p]));
    return {200, {{"window", *fid}, {"lines", out}, {"truncated", last < *hi}}};
  }

  ApiResponse report() const { return file_or_404(paths_.eval_report(), "no eval report; run eval first"); }
  ApiResponse manifest() const { return file_or_404(paths_.manifest(), "no manifest in the run directory"); }

private:
  bool has_window(FailureId id) const {
    for (const auto &w : index_) {
      if (w.at("id").get<FailureId>() == id) return true;
    }
    return false;
  }

  std::optional<const WindowScores *> any_scores(FailureId id) const {
    for (const auto &[name, m] : scores_) {
      auto it = m.find(id);
      if (it != m.end()) return &it->second;
    }
    return std::nullopt;
  }

  static ApiResponse file_or_404(const std::filesystem::path &p, const std::string &message) {
    if (!std::filesystem::exists(p)) return api_error(404, message);
    return {200, nlohmann::json::parse(read_file(p))};
  }

  RunConfig config_;
  RunPaths paths_;
  Corpus corpus_;
  nlohmann::json index_;
  std::map<std::string, std::map<FailureId, WindowScores>> scores_;
  std::string default_scorer_;
};

/// Registers the API routes on an httplib server.
inline void mount_api(httplib::Server &srv, const ApiService &api) {
  auto reply = [](httplib::Response &res, const ApiResponse &r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  auto param = [](const httplib::Request &req, const char *name) -> std::optional<std::string> {
    if (!req.has_param(name)) return std::nullopt;
    return req.get_param_value(name);
  };
  srv.Get("/api/windows", [&api, reply](const httplib::Request &, httplib::Response &res) {
    reply(res, api.windows());
  });
  srv.Get(R"(/api/windows/([^/]+)/candidates)",
          [&api, reply, param](const httplib::Request &req, httplib::Response &res) {
            reply(res, api.candidates(req.matches[1], param(req, "n"), param(req, "scorer")));
          });
  srv.Get(R"(/api/windows/([^/]+)/lines)",
          [&api, reply, param](const httplib::Request &req, httplib::Response &res) {
            reply(res, api.lines(req.matches[1], param(req, "from"), param(req, "to")));
          });
  srv.Get("/api/report", [&api, reply](const httplib::Request &, httplib::Response &res) {
    reply(res, api.report());
  });
  srv.Get("/api/manifest", [&api, reply](const httplib::Request &, httplib::Response &res) {
    reply(res, api.manifest());
  });
  srv.set_error_handler([](const httplib::Request &, httplib::Response &res) {
    if (res.body.empty()) {
      res.set_content(nlohmann::json{{"error", "not found"}, {"status", res.status}}.dump(), "application/json");
    }
  });
  srv.set_exception_handler([](const httplib::Request &, httplib::Response &res, std::exception_ptr ep) {
    std::string what = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception &e) {
      what = e.what();
    } catch (...) {
    }
    res.status = 500;
    res.set_content(nlohmann::json{{"error", what}, {"status", 500}}.dump(), "application/json");
  });
}

} // namespace logrca
