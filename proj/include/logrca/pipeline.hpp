#pragma once

// Run configuration and the train / score / eval stages shared by the CLI,
// the HTTP server and the acceptance suite. Every stage reads and writes
// artifacts under RunConfig::out_dir.

#include "logrca/balance.hpp"
#include "logrca/baseline.hpp"
#include "logrca/error.hpp"
#include "logrca/io.hpp"
#include "logrca/log_model.hpp"
#include "logrca/ranking.hpp"
#include "logrca/scorer.hpp"
#include "logrca/tokenizer.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace logrca {

inline constexpr const char *kToolVersion = "logrca 1.0.0";

struct RunConfig {
  std::string corpus;
  std::string failures;
  std::string truth;
  std::string out_dir = "run";
  double window_s = 3.0;
  TokenizerConfig tokenizer;
  ModelConfig model;
  std::size_t vocab_min_count = 1;
  bool balance = true;
  int birch_branching = 50;
  double birch_threshold = 0.5;
  bool binary_service_vector = false;
  int tree_max_depth = DecisionTree::kDefaultMaxDepth;
  std::vector<std::string> scorers = {"logrca"};
  std::vector<std::size_t> eval_n = {10, 20, 50};
  std::uint64_t seed = 7;

  void validate() const {
    if (corpus.empty() || failures.empty()) throw ConfigError("corpus and failures paths are required");
    if (!(window_s > 0.0)) throw ConfigError("window duration must be positive");
    tokenizer.validate();
    model.validate();
    if (model.max_len != tokenizer.max_len) throw ConfigError("model and tokenizer max_len differ");
    if (birch_branching < 2 || !(birch_threshold > 0.0)) throw ConfigError("invalid BIRCH parameters");
    if (scorers.empty()) throw ConfigError("at least one scorer is required");
    for (const auto &s : scorers) {
      if (s != "logrca" && s != "tree") throw ConfigError("unknown scorer '" + s + "'");
    }
    for (auto n : eval_n) {
      if (n < 1) throw ConfigError("eval n must be >= 1");
    }
  }
};

inline void to_json(nlohmann::json &j, const RunConfig &c) {
  j = {{"corpus", c.corpus},
       {"failures", c.failures},
       {"truth", c.truth},
       {"out_dir", c.out_dir},
       {"window_s", c.window_s},
       {"tokenizer", c.tokenizer},
       {"model", c.model},
       {"vocab_min_count", c.vocab_min_count},
       {"balance", c.balance},
       {"birch_branching", c.birch_branching},
       {"birch_threshold", c.birch_threshold},
       {"binary_service_vector", c.binary_service_vector},
       {"tree_max_depth", c.tree_max_depth},
       {"scorers", c.scorers},
       {"eval_n", c.eval_n},
       {"seed", c.seed}};
}

inline void from_json(const nlohmann::json &j, RunConfig &c) {
  c.corpus = j.value("corpus", c.corpus);
  c.failures = j.value("failures", c.failures);
  c.truth = j.value("truth", c.truth);
  c.out_dir = j.value("out_dir", c.out_dir);
  c.window_s = j.value("window_s", c.window_s);
  if (j.contains("tokenizer")) c.tokenizer = j["tokenizer"].get<TokenizerConfig>();
  if (j.contains("model")) c.model = j["model"].get<ModelConfig>();
  c.vocab_min_count = j.value("vocab_min_count", c.vocab_min_count);
  c.balance = j.value("balance", c.balance);
  c.birch_branching = j.value("birch_branching", c.birch_branching);
  c.birch_threshold = j.value("birch_threshold", c.birch_threshold);
  c.binary_service_vector = j.value("binary_service_vector", c.binary_service_vector);
  c.tree_max_depth = j.value("tree_max_depth", c.tree_max_depth);
  c.scorers = j.value("scorers", c.scorers);
  c.eval_n = j.value("eval_n", c.eval_n);
  c.seed = j.value("seed", c.seed);
}

/// FNV-1a 64-bit, rendered as 16 hex digits.
inline std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string read_file(const std::filesystem::path &p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path &p, std::string_view text) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError("cannot write " + p.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

/// Artifact locations inside an output directory.
struct RunPaths {
  std::filesystem::path root;

  std::filesystem::path config() const { return root / "run_config.json"; }
  std::filesystem::path vocab() const { return root / "vocab.json"; }
  std::filesystem::path checkpoint() const { return root / "model.lrca"; }
  std::filesystem::path tree() const { return root / "baseline_tree.json"; }
  std::filesystem::path balance_report() const { return root / "balance_report.json"; }
  std::filesystem::path training_log() const { return root / "training_log.jsonl"; }
  std::filesystem::path scores_dir(const std::string &scorer) const { return root / "scores" / scorer; }
  std::filesystem::path window_scores(const std::string &scorer, FailureId id) const {
    return scores_dir(scorer) / ("window_" + std::to_string(id) + ".json");
  }
  std::filesystem::path windows_index() const { return root / "windows.json"; }
  std::filesystem::path eval_report() const { return root / "eval_report.json"; }
  std::filesystem::path manifest() const { return root / "manifest.json"; }
};

/// Everything derived from the raw inputs before any model is trained.
struct PreparedData {
  Corpus corpus;
  std::vector<FailureEvent> failures;
  std::vector<InvestigationWindow> windows; // ground truth attached when available
  Diagnostics diag;
  std::vector<TokenSequence> sequences; // by corpus position
};

inline PreparedData prepare(const RunConfig &config) {
  PreparedData d;
  d.corpus = read_corpus_file(config.corpus, &d.diag).corpus;
  d.failures = read_failures_file(config.failures);
  d.windows = extract_windows(d.corpus, d.failures, config.window_s, &d.diag);
  if (!config.truth.empty() && std::filesystem::exists(config.truth)) {
    attach_ground_truth(d.windows, read_ground_truth_file(config.truth));
  }
  Tokenizer tokenizer(config.tokenizer);
  d.sequences.reserve(d.corpus.size());
  for (const auto &l : d.corpus.lines()) d.sequences.push_back(tokenizer.tokenize(l.content, l.id));
  return d;
}

inline std::vector<InvestigationWindow> training_view(const std::vector<InvestigationWindow> &windows) {
  std::vector<InvestigationWindow> out;
  out.reserve(windows.size());
  for (const auto &w : windows) out.push_back(without_truth(w));
  return out;
}

struct BalanceOutcome {
  BalancedDataset data;
  nlohmann::json report;
};

inline BalanceOutcome balance_stage(const RunConfig &config, const PreparedData &d,
                                    const PUDataset &pu) {
  const auto windows = training_view(d.windows);
  const auto index = build_service_index(d.corpus);
  const auto assignment = cluster_windows(windows, d.corpus, index, config.birch_branching,
                                          config.birch_threshold, config.binary_service_vector);
  const auto plan = target_sizes_nonempty(assignment.line_counts);
  BalanceOutcome out;
  out.data = config.balance ? apply_balance(pu, windows, assignment, plan, config.seed) : unbalanced(pu);
  out.report = balance_report_json(assignment, plan, windows, config.birch_branching,
                                   config.birch_threshold, config.balance);
  out.report["q"] = out.data.q();
  out.report["positives"] = out.data.positives.size();
  out.report["unknowns"] = out.data.unknowns.size();
  return out;
}

/// Encodes every line once; training samples reference the cache.
struct EncodedCorpus {
  std::vector<EncodedSequence> by_position;

  EncodedCorpus(const PreparedData &d, const Vocabulary &vocab, const TokenizerConfig &cfg) {
    by_position.reserve(d.sequences.size());
    for (const auto &s : d.sequences) by_position.push_back(encode(s, vocab, cfg));
  }
};

inline TrainingSet make_training_set(const BalancedDataset &data, const Corpus &corpus,
                                     const EncodedCorpus &enc) {
  TrainingSet t;
  t.q = data.q();
  t.sequences.reserve(data.positives.size() + data.unknowns.size());
  for (LineId id : data.positives) {
    t.sequences.push_back(enc.by_position[corpus.position(id)]);
    t.labels.push_back(Label::Positive);
  }
  for (const auto &u : data.unknowns) {
    t.sequences.push_back(enc.by_position[corpus.position(u.line)]);
    t.labels.push_back(Label::Unknown);
  }
  return t;
}

inline TreeBaseline train_tree(const BalancedDataset &data, const PreparedData &d, int max_depth) {
  TreeBaseline b;
  b.tfidf = TfIdfModel::fit(d.sequences);
  std::vector<SparseVector> by_pos;
  by_pos.reserve(d.sequences.size());
  for (const auto &s : d.sequences) by_pos.push_back(b.tfidf.transform(s));
  std::vector<SparseVector> xs;
  std::vector<Label> ys;
  xs.reserve(data.positives.size() + data.unknowns.size());
  for (LineId id : data.positives) {
    xs.push_back(by_pos[d.corpus.position(id)]);
    ys.push_back(Label::Positive);
  }
  for (const auto &u : data.unknowns) {
    xs.push_back(by_pos[d.corpus.position(u.line)]);
    ys.push_back(Label::Unknown);
  }
  b.tree = DecisionTree::train(xs, ys, max_depth);
  return b;
}

struct TrainSummary {
  std::vector<EpochLog> log;
  double q = 0.0;
  std::size_t clusters = 0;
  double seconds = 0.0;
};

inline void write_json(const std::filesystem::path &p, const nlohmann::json &j) {
  write_file(p, j.dump(2) + "\n");
}

/// tokenize -> label -> balance -> train -> persist.
inline TrainSummary run_train(const RunConfig &config, std::ostream *log = nullptr) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const RunPaths paths{config.out_dir};
  std::filesystem::create_directories(paths.root);
  write_json(paths.config(), config);

  auto d = prepare(config);
  for (const auto &w : d.diag.warnings) {
    if (log) *log << "warning: " << w << "\n";
  }
  const auto pu = assign_pu_labels(d.corpus, training_view(d.windows));
  auto vocab = build_vocab(d.sequences, config.vocab_min_count);
  vocab.save(paths.vocab().string());

  auto bal = balance_stage(config, d, pu);
  write_json(paths.balance_report(), bal.report);

  TrainSummary summary;
  summary.q = bal.data.q();
  summary.clusters = bal.report["clusters"].size();

  for (const auto &scorer : config.scorers) {
    if (scorer == "logrca") {
      const EncodedCorpus enc(d, vocab, config.tokenizer);
      const auto ts = make_training_set(bal.data, d.corpus, enc);
      std::ofstream tlog(paths.training_log());
      auto result = train(ts, vocab.size(), config.model, [&](const ScorerModel &, const EpochLog &e) {
        tlog << nlohmann::json{{"epoch", e.epoch}, {"mean_loss", e.mean_loss}, {"wallclock_ms", e.wallclock_ms}}.dump()
             << "\n";
        tlog.flush();
        if (log) *log << "epoch " << e.epoch << " mean_loss " << e.mean_loss << " (" << e.wallclock_ms << " ms)\n";
      });
      result.model.save(paths.checkpoint().string());
      summary.log = result.log;
    } else {
      train_tree(bal.data, d, config.tree_max_depth).save(paths.tree().string());
    }
  }
  summary.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return summary;
}

/// Candidate rows as served to the UI: id, score, ts, service, msg, and a
/// truth flag when the window has ground truth.
inline nlohmann::json candidates_json(const CandidateSet &c, const Corpus &corpus,
                                      const std::optional<std::vector<LineId>> &truth) {
  std::vector<LineId> sorted;
  if (truth) {
    sorted = *truth;
    std::sort(sorted.begin(), sorted.end());
  }
  nlohmann::json items = nlohmann::json::array();
  for (const auto &s : c.candidates) {
    nlohmann::json item = s;
    const auto &l = corpus.at(s.id);
    item["service"] = l.service;
    item["msg"] = l.content;
    if (truth) item["truth"] = std::binary_search(sorted.begin(), sorted.end(), s.id);
    items.push_back(std::move(item));
  }
  return items;
}

/// Scores every window with each trained scorer and writes one file per
/// window, including the top-n candidates for each configured n.
inline void run_score(const RunConfig &config) {
  config.validate();
  const RunPaths paths{config.out_dir};
  auto d = prepare(config);
  const auto vocab = Vocabulary::load(paths.vocab().string());

  nlohmann::json index = nlohmann::json::array();
  for (const auto &w : d.windows) {
    index.push_back({{"id", w.failure_id},
                     {"failure_ts", w.failure_ts},
                     {"begin_ts", w.begin_ts()},
                     {"size", w.lines.size()},
                     {"truth_available", w.ground_truth.has_value()}});
  }
  write_json(paths.windows_index(), index);

  for (const auto &scorer : config.scorers) {
    std::vector<double> scores_by_pos(d.corpus.size(), -1.0);
    auto score_lines = [&](const std::vector<LineId> &ids) -> std::vector<ScoredLine> {
      std::vector<ScoredLine> out;
      out.reserve(ids.size());
      for (LineId id : ids) out.push_back({id, scores_by_pos[d.corpus.position(id)], d.corpus.at(id).timestamp});
      return out;
    };
    // Score each distinct window line once.
    std::vector<std::size_t> todo;
    for (const auto &w : d.windows) {
      for (LineId id : w.lines) {
        const auto p = d.corpus.position(id);
        if (scores_by_pos[p] < 0.0) {
          scores_by_pos[p] = 0.0;
          todo.push_back(p);
        }
      }
    }
    if (scorer == "logrca") {
      if (!std::filesystem::exists(paths.checkpoint())) throw DataError("no LogRCA checkpoint in " + config.out_dir);
      const auto model = ScorerModel::load(paths.checkpoint().string());
      std::vector<EncodedSequence> batch;
      batch.reserve(todo.size());
      for (auto p : todo) batch.push_back(encode(d.sequences[p], vocab, config.tokenizer));
      const auto s = model.score(batch);
      for (std::size_t i = 0; i < todo.size(); ++i) scores_by_pos[todo[i]] = s[i];
    } else {
      if (!std::filesystem::exists(paths.tree())) throw DataError("no tree baseline in " + config.out_dir);
      const auto tree = TreeBaseline::load(paths.tree().string());
      for (auto p : todo) scores_by_pos[p] = tree.score(d.sequences[p]);
    }
    std::filesystem::remove_all(paths.scores_dir(scorer));
    for (std::size_t wi = 0; wi < d.windows.size(); ++wi) {
      const auto &w = d.windows[wi];
      const auto lines = score_lines(w.lines);
      nlohmann::json cands = nlohmann::json::object();
      for (auto n : config.eval_n) {
        cands[std::to_string(n)] = candidates_json(select_top_n(lines, n, wi), d.corpus, w.ground_truth);
      }
      nlohmann::json j = {{"failure_id", w.failure_id},
                          {"scorer", scorer},
                          {"failure_ts", w.failure_ts},
                          {"lines", lines},
                          {"candidates", cands}};
      if (w.ground_truth) j["truth"] = *w.ground_truth;
      write_json(paths.window_scores(scorer, w.failure_id), j);
    }
  }
}

inline WindowScores load_window_scores(const std::filesystem::path &p) {
  const auto j = nlohmann::json::parse(read_file(p));
  WindowScores w;
  w.failure_id = j.at("failure_id").get<FailureId>();
  for (const auto &e : j.at("lines")) {
    w.lines.push_back({e.at("id").get<LineId>(), e.at("score").get<double>(), e.at("ts").get<Micros>()});
  }
  if (j.contains("truth")) w.truth = j["truth"].get<std::vector<LineId>>();
  return w;
}

inline std::vector<WindowScores> load_scores(const RunPaths &paths, const std::string &scorer) {
  const auto index = nlohmann::json::parse(read_file(paths.windows_index()));
  std::vector<WindowScores> out;
  for (const auto &w : index) {
    const auto p = paths.window_scores(scorer, w.at("id").get<FailureId>());
    if (!std::filesystem::exists(p)) throw DataError("scores for scorer '" + scorer + "' are missing");
    out.push_back(load_window_scores(p));
  }
  return out;
}

inline EvalReport run_eval(const RunConfig &config, const std::vector<std::string> &scorers) {
  const RunPaths paths{config.out_dir};
  std::map<std::string, std::vector<WindowScores>> runs;
  for (const auto &s : scorers) runs[s] = load_scores(paths, s);
  auto report = eval_report(runs, config.eval_n);
  write_json(paths.eval_report(), report.to_json());
  return report;
}

/// Artifacts whose bytes are fully determined by the run config and inputs.
/// The training log carries wall-clock times and is listed without a hash.
inline nlohmann::json artifact_hashes(const RunPaths &paths) {
  nlohmann::json out = nlohmann::json::object();
  auto add = [&](const std::filesystem::path &p) {
    if (std::filesystem::exists(p)) {
      out[std::filesystem::relative(p, paths.root).generic_string()] = fnv1a_hex(read_file(p));
    }
  };
  add(paths.vocab());
  add(paths.checkpoint());
  add(paths.tree());
  add(paths.balance_report());
  add(paths.windows_index());
  add(paths.eval_report());
  if (std::filesystem::exists(paths.root / "scores")) {
    std::vector<std::filesystem::path> files;
    for (const auto &e : std::filesystem::recursive_directory_iterator(paths.root / "scores")) {
      if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto &f : files) add(f);
  }
  return out;
}

inline nlohmann::json write_manifest(const RunConfig &config) {
  const RunPaths paths{config.out_dir};
  nlohmann::json cfg = config;
  // The output location does not influence any artifact byte.
  cfg.erase("out_dir");
  nlohmann::json m = {{"tool_version", kToolVersion},
                      {"config", cfg},
                      {"config_hash", fnv1a_hex(cfg.dump())},
                      {"artifacts", artifact_hashes(paths)}};
  if (std::filesystem::exists(paths.training_log())) m["unhashed"] = {"training_log.jsonl"};
  write_json(paths.manifest(), m);
  return m;
}

inline RunConfig load_run_config(const std::string &out_dir) {
  const RunPaths paths{out_dir};
  if (!std::filesystem::exists(paths.config())) throw ConfigError("no run_config.json in " + out_dir);
  auto c = nlohmann::json::parse(read_file(paths.config())).get<RunConfig>();
  c.out_dir = out_dir;
  return c;
}

} // namespace logrca
