#pragma once

// Deterministic multi-service log corpus with injected failures.
//
// Every service emits background lines from its own normal templates as a
// Poisson process. Each failure picks a cause type by weight and plants that
// cause's template chain inside the window before the failure, in chain
// order, while the cause's services log a burst of ordinary traffic. The
// planted line ids are the ground truth.

#include "logrca/error.hpp"
#include "logrca/io.hpp"
#include "logrca/log_model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

namespace logrca {

struct CauseSpec {
  std::string name;
  double weight = 1.0;
  /// Number of planted root-cause lines, in [3, 50].
  int chain_length = 12;
  /// Services the chain spans, in [1, 5].
  int services = 2;
  /// Fraction of chain templates that are ordinary templates of the service
  /// and therefore also occur in normal traffic.
  double noise_overlap = 0.1;
  /// Failures of this type placed before any weighted draw.
  int min_occurrences = 0;
};

struct GenConfig {
  int services = 50;
  int normal_templates_per_service = 40;
  double duration_s = 2000.0;
  /// Background lines per second per service.
  double base_rate = 2.0;
  int failures = 40;
  /// Extra lines per second from each involved service inside a failure window.
  double burst_rate = 15.0;
  /// Share of normal templates that carry one failure-vocabulary word.
  double background_fault_share = 0.1;
  double window_s = 3.0;
  std::vector<CauseSpec> causes;
  std::uint64_t seed = 7;
  Micros epoch_us = 1'700'000'000'000'000;

  void validate() const {
    if (services < 1) throw ConfigError("services must be >= 1");
    if (normal_templates_per_service < 1) throw ConfigError("need at least one template per service");
    if (!(duration_s > 0.0) || !(base_rate >= 0.0) || !(window_s > 0.0)) {
      throw ConfigError("duration, rate and window must be positive");
    }
    if (!(background_fault_share >= 0.0 && background_fault_share <= 1.0)) {
      throw ConfigError("background_fault_share must be in [0, 1]");
    }
    if (causes.size() < 2) throw ConfigError("at least two cause types are required");
    double top = 0.0;
    for (const auto &c : causes) {
      if (c.chain_length < 3 || c.chain_length > 50) throw ConfigError("chain length must be in [3, 50]");
      if (c.services < 1 || c.services > 5 || c.services > services) {
        throw ConfigError("cause services must be in [1, 5]");
      }
      if (!(c.weight > 0.0)) throw ConfigError("cause weights must be positive");
      if (c.noise_overlap < 0.0 || c.noise_overlap > 1.0) throw ConfigError("noise_overlap must be in [0, 1]");
      top = std::max(top, c.weight);
    }
    const bool rare = std::any_of(causes.begin(), causes.end(),
                                  [&](const CauseSpec &c) { return c.weight <= 0.1 * top; });
    if (!rare) throw ConfigError("at least one cause must be rare (weight <= 10% of the most common)");
    int forced = 0;
    for (const auto &c : causes) forced += c.min_occurrences;
    if (forced > failures) throw ConfigError("min_occurrences exceed the failure count");
    if (failures < 0) throw ConfigError("failures must be >= 0");
    // Failures are spaced by more than one window so windows never overlap.
    if (static_cast<double>(failures) * (window_s + 1.0) * 2.0 > duration_s) {
      throw ConfigError("duration too short for the requested number of failures");
    }
  }
};

/// "small": ~200k lines, 40 failures, 6 cause types with one rare.
/// "medium": ~1M lines, 80 failures.
inline GenConfig gen_profile(const std::string &name, std::uint64_t seed = 7) {
  GenConfig c;
  c.seed = seed;
  c.causes = {
      {"disk-pressure", 10.0, 16, 2, 0.1, 0},   {"auth-outage", 8.0, 22, 3, 0.1, 0},
      {"dns-flap", 8.0, 12, 1, 0.15, 0},        {"queue-backlog", 6.0, 30, 4, 0.1, 0},
      {"cache-stampede", 6.0, 14, 2, 0.1, 0},   {"cert-expiry", 1.0, 13, 2, 0.1, 2},
  };
  if (name == "small") {
    c.services = 50;
    c.duration_s = 2000.0;
    c.failures = 40;
  } else if (name == "medium") {
    c.services = 100;
    c.duration_s = 5000.0;
    c.failures = 80;
  } else {
    throw ConfigError("unknown generator profile '" + name + "'");
  }
  return c;
}

struct GeneratedData {
  std::vector<LogLine> lines; // ids assigned in time order
  std::vector<FailureEvent> failures;
  GroundTruth truth;
  std::size_t background_lines = 0;
};

namespace synth {

/// Seeded generator with distribution code that does not depend on the
/// standard library implementation.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}
  std::uint64_t next() { return eng_(); }
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t below(std::size_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
      v = eng_();
    } while (v >= limit);
    return static_cast<std::size_t>(v % n);
  }
  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }
  std::size_t weighted(const std::vector<double> &w) {
    double total = 0.0;
    for (double x : w) total += x;
    double r = uniform() * total;
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (r < w[i]) return i;
      r -= w[i];
    }
    return w.size() - 1;
  }

private:
  std::mt19937_64 eng_;
};

inline const std::vector<std::string> &words() {
  static const std::vector<std::string> w = {
      "request",   "handler",  "session",   "worker",    "thread",    "pool",      "connection",
      "client",    "server",   "upstream",  "downstream", "cache",    "entry",     "lookup",
      "index",     "shard",    "replica",   "leader",    "follower",  "lease",     "token",
      "user",      "account",  "profile",   "order",     "payment",   "invoice",   "cart",
      "queue",     "topic",    "partition", "offset",    "consumer",  "producer",  "batch",
      "flush",     "commit",   "snapshot",  "segment",   "block",     "chunk",     "buffer",
      "socket",    "port",     "route",     "gateway",   "proxy",     "balancer",  "health",
      "check",     "probe",    "metric",    "counter",   "gauge",     "latency",   "duration",
      "started",   "finished", "completed", "accepted",  "received",  "sent",      "processed",
      "scheduled", "updated",  "created",   "deleted",   "loaded",    "saved",     "opened",
      "closed",    "registered", "resolved", "refreshed", "renewed",  "synced",    "applied",
      "for",       "from",     "to",        "with",      "in",        "on",        "after",
      "before",    "by",       "of",        "at",        "id",        "size",      "count",
      "ms",        "bytes",    "items",     "keys",      "records",   "rows",      "status",
      "ok",        "state",    "mode",      "config",    "version",   "node",      "cluster",
      "region",    "zone",     "host",      "disk",      "memory",    "cpu",       "file",
      "path",      "volume",   "mount",     "certificate", "dns",     "name",      "record",
      "backlog",   "attempt",  "pending",
  };
  return w;
}

/// Failure vocabulary. Root-cause templates draw heavily from it; normal
/// traffic uses it only occasionally, as transient warnings do.
inline const std::vector<std::string> &fault_words() {
  static const std::vector<std::string> w = {
      "error",      "timeout",    "slow",        "evicted",    "expired",     "rejected",
      "dropped",    "degraded",   "stale",       "retry",      "warning",     "refused",
      "unreachable", "exception", "failed",      "denied",     "corrupt",     "exhausted",
      "overflow",   "panic",      "aborted",     "unavailable", "invalid",    "mismatch",
      "throttled",  "lost",       "crashed",     "fatal",      "broken",      "stalled",
      "leak",       "deadlock",   "saturated",   "full",       "missing",     "unhealthy",
  };
  return w;
}

struct Template {
  std::vector<std::string> parts; // words; "{num}" etc. mark slots
};

inline std::string fill(const Template &t, Rng &rng, int service) {
  std::string out;
  for (std::size_t i = 0; i < t.parts.size(); ++i) {
    const auto &p = t.parts[i];
    if (i > 0) out += ' ';
    if (p == "{num}") {
      out += std::to_string(10 + rng.below(65526));
    } else if (p == "{small}") {
      out += std::to_string(rng.below(10));
    } else if (p == "{ip}") {
      out += "10." + std::to_string(rng.below(256)) + "." + std::to_string(rng.below(256)) + "." +
             std::to_string(rng.below(256));
    } else if (p == "{hex}") {
      static const char *digits = "0123456789abcdef";
      out += "0x";
      for (int k = 0; k < 8; ++k) out += digits[rng.below(16)];
    } else if (p == "{addr}") {
      out += "@svc" + std::to_string(service) + ".obj" + std::to_string(rng.below(50));
    } else {
      out += p;
    }
  }
  return out;
}

/// Random template of min_words..max_words words, `faults` of them from the
/// failure vocabulary.
inline Template make_template(Rng &rng, std::size_t min_words, std::size_t max_words,
                              std::size_t faults = 0) {
  static const std::array<std::string, 5> slots = {"{num}", "{small}", "{ip}", "{hex}", "{addr}"};
  const auto &w = words();
  const auto &fw = fault_words();
  Template t;
  const std::size_t n = std::max(faults, min_words + rng.below(max_words - min_words + 1));
  std::vector<char> is_fault(n, 0);
  for (std::size_t i = 0; i < faults; ++i) is_fault[i] = 1;
  for (std::size_t i = n; i > 1; --i) std::swap(is_fault[i - 1], is_fault[rng.below(i)]);
  for (std::size_t i = 0; i < n; ++i) {
    std::string word = is_fault[i] ? fw[rng.below(fw.size())] : w[rng.below(w.size())];
    const auto punct = rng.below(10);
    if (punct == 0) word += ':';
    if (punct == 1) word += ',';
    t.parts.push_back(std::move(word));
  }
  const std::size_t nslots = rng.below(3);
  for (std::size_t s = 0; s < nslots; ++s) {
    const auto pos = 1 + rng.below(t.parts.size());
    t.parts.insert(t.parts.begin() + static_cast<std::ptrdiff_t>(pos), slots[rng.below(slots.size())]);
  }
  return t;
}

struct CausePlan {
  std::vector<int> services;       // chain service per position
  std::vector<Template> templates; // chain template per position
  std::vector<double> offsets_s;   // seconds before the failure, decreasing
  std::vector<int> involved;       // distinct services of the chain
};

} // namespace synth

inline GeneratedData generate(const GenConfig &config) {
  using namespace synth;
  config.validate();
  Rng rng(config.seed);
  const int S = config.services;

  // Normal templates with Zipf-like usage weights.
  std::vector<std::vector<Template>> normal(static_cast<std::size_t>(S));
  std::vector<double> zipf;
  for (int k = 0; k < config.normal_templates_per_service; ++k) zipf.push_back(1.0 / (k + 1.0));
  for (auto &ts : normal) {
    for (int k = 0; k < config.normal_templates_per_service; ++k) ts.push_back(make_template(rng, 4, 9, rng.uniform() < config.background_fault_share ? 1 : 0));
  }

  std::vector<CausePlan> plans;
  for (const auto &cause : config.causes) {
    CausePlan plan;
    std::vector<int> pool(static_cast<std::size_t>(S));
    for (int s = 0; s < S; ++s) pool[static_cast<std::size_t>(s)] = s;
    for (int k = 0; k < cause.services; ++k) {
      const auto j = static_cast<std::size_t>(k) + rng.below(pool.size() - static_cast<std::size_t>(k));
      std::swap(pool[static_cast<std::size_t>(k)], pool[j]);
      plan.involved.push_back(pool[static_cast<std::size_t>(k)]);
    }
    const auto len = static_cast<std::size_t>(cause.chain_length);
    const auto overlaps = static_cast<std::size_t>(std::llround(cause.noise_overlap * static_cast<double>(len)));
    std::vector<char> is_overlap(len, 0);
    for (std::size_t k = 0; k < overlaps; ++k) is_overlap[k] = 1;
    for (std::size_t k = len; k > 1; --k) std::swap(is_overlap[k - 1], is_overlap[rng.below(k)]);
    for (std::size_t k = 0; k < len; ++k) {
      const int svc = plan.involved[rng.below(plan.involved.size())];
      plan.services.push_back(svc);
      if (is_overlap[k]) {
        plan.templates.push_back(normal[static_cast<std::size_t>(svc)][rng.below(normal[static_cast<std::size_t>(svc)].size())]);
      } else {
        plan.templates.push_back(make_template(rng, 4, 9, 2 + rng.below(3)));
      }
    }
    // Fixed relative offsets spread across the window, earliest first.
    std::vector<double> gaps(len);
    double total = 0.0;
    for (auto &g : gaps) total += (g = rng.uniform(0.5, 1.5));
    const double span = config.window_s * 0.9;
    double t = config.window_s * 0.95;
    for (std::size_t k = 0; k < len; ++k) {
      plan.offsets_s.push_back(t);
      t -= gaps[k] / total * span;
    }
    plans.push_back(std::move(plan));
  }

  struct Event {
    Micros ts;
    int service;
    std::string content;
    int truth_of = -1; // failure index when planted
  };
  std::vector<Event> events;
  const auto to_us = [&](double s) { return config.epoch_us + seconds_to_micros(s); };

  std::size_t background = 0;
  for (int s = 0; s < S && config.base_rate > 0.0; ++s) {
    double t = rng.exponential(config.base_rate);
    while (t < config.duration_s) {
      const auto &ts = normal[static_cast<std::size_t>(s)];
      events.push_back({to_us(t), s, fill(ts[rng.weighted(zipf)], rng, s)});
      ++background;
      t += rng.exponential(config.base_rate);
    }
  }

  // Cause type per failure: forced occurrences first, then weighted draws,
  // then a seeded shuffle.
  std::vector<std::size_t> kinds;
  for (std::size_t c = 0; c < config.causes.size(); ++c) {
    for (int k = 0; k < config.causes[c].min_occurrences; ++k) kinds.push_back(c);
  }
  std::vector<double> weights;
  for (const auto &c : config.causes) weights.push_back(c.weight);
  while (kinds.size() < static_cast<std::size_t>(config.failures)) kinds.push_back(rng.weighted(weights));
  for (std::size_t k = kinds.size(); k > 1; --k) std::swap(kinds[k - 1], kinds[rng.below(k)]);

  // Failure times spaced more than a window apart.
  std::vector<double> times;
  const double gap = config.window_s + 1.0;
  for (int attempt = 0; times.size() < kinds.size(); ++attempt) {
    if (attempt > 100000) throw ConfigError("could not place failures; increase duration");
    const double t = rng.uniform(gap, config.duration_s - 1.0);
    bool ok = true;
    for (double o : times) ok &= std::abs(o - t) > gap;
    if (ok) times.push_back(t);
  }
  std::sort(times.begin(), times.end());

  GeneratedData out;
  out.background_lines = background;
  for (std::size_t f = 0; f < kinds.size(); ++f) {
    const auto &plan = plans[kinds[f]];
    const double tf = times[f];
    double min_gap = config.window_s;
    for (std::size_t k = 1; k < plan.offsets_s.size(); ++k) {
      min_gap = std::min(min_gap, plan.offsets_s[k - 1] - plan.offsets_s[k]);
    }
    for (std::size_t k = 0; k < plan.templates.size(); ++k) {
      const double jitter = rng.uniform(-0.3, 0.3) * min_gap;
      events.push_back({to_us(tf - plan.offsets_s[k] + jitter), plan.services[k],
                        fill(plan.templates[k], rng, plan.services[k]), static_cast<int>(f)});
    }
    for (int svc : plan.involved) {
      double t = tf - config.window_s + rng.exponential(config.burst_rate);
      while (t < tf) {
        const auto &ts = normal[static_cast<std::size_t>(svc)];
        events.push_back({to_us(t), svc, fill(ts[rng.weighted(zipf)], rng, svc)});
        t += rng.exponential(config.burst_rate);
      }
    }
    const int marker = plan.involved.back();
    events.push_back({to_us(tf), marker,
                      "watchdog detected unrecoverable failure in svc" + std::to_string(marker) +
                          " restarting"});
    FailureEvent fe;
    fe.id = f;
    fe.timestamp = to_us(tf);
    fe.label = config.causes[kinds[f]].name;
    out.failures.push_back(fe);
  }

  std::stable_sort(events.begin(), events.end(),
                   [](const Event &a, const Event &b) { return a.ts < b.ts; });
  out.lines.reserve(events.size());
  for (std::size_t i = 0; i < events.size(); ++i) {
    auto &e = events[i];
    LogLine l;
    l.id = i;
    l.timestamp = e.ts;
    l.service = "svc" + std::to_string(e.service);
    l.content = std::move(e.content);
    if (e.truth_of >= 0) out.truth[static_cast<FailureId>(e.truth_of)].push_back(i);
    out.lines.push_back(std::move(l));
  }
  return out;
}

inline nlohmann::json gen_config_json(const GenConfig &c) {
  nlohmann::json causes = nlohmann::json::array();
  for (const auto &k : c.causes) {
    causes.push_back({{"name", k.name},
                      {"weight", k.weight},
                      {"chain_length", k.chain_length},
                      {"services", k.services},
                      {"noise_overlap", k.noise_overlap},
                      {"min_occurrences", k.min_occurrences}});
  }
  return {{"services", c.services},     {"normal_templates_per_service", c.normal_templates_per_service},
          {"duration_s", c.duration_s}, {"base_rate", c.base_rate},
          {"failures", c.failures},     {"burst_rate", c.burst_rate},
          {"background_fault_share", c.background_fault_share},
          {"window_s", c.window_s},     {"seed", c.seed},
          {"causes", causes}};
}

struct GeneratedPaths {
  std::string corpus, failures, truth;
};

/// Writes corpus.jsonl, failures.jsonl and truth.jsonl into `dir`.
inline GeneratedPaths write_generated(const GeneratedData &data, const std::string &dir) {
  std::filesystem::create_directories(dir);
  GeneratedPaths p{dir + "/corpus.jsonl", dir + "/failures.jsonl", dir + "/truth.jsonl"};
  {
    std::ofstream out(p.corpus);
    if (!out) throw DataError("cannot write " + p.corpus);
    write_corpus(out, data.lines);
  }
  {
    std::ofstream out(p.failures);
    write_failures(out, data.failures);
  }
  {
    std::ofstream out(p.truth);
    write_ground_truth(out, data.truth);
  }
  return p;
}

} // namespace logrca
