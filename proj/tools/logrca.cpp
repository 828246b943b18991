// Command-line front end: gen, train, score, eval, serve, inspect.

#include "logrca/pipeline.hpp"
#include "logrca/server.hpp"
#include "logrca/synthgen.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <iostream>

using namespace logrca;

namespace {

struct TrainFlags {
  std::string config_file;
  std::string corpus, failures, truth, out = "run";
  std::vector<std::string> scorers;
  bool no_balance = false;
  std::optional<int> epochs;
  std::optional<double> window;
  std::optional<std::uint64_t> seed;
};

RunConfig effective_config(const TrainFlags &f) {
  RunConfig c;
  if (!f.config_file.empty()) {
    try {
      c = nlohmann::json::parse(read_file(f.config_file)).get<RunConfig>();
    } catch (const nlohmann::json::exception &e) {
      throw ConfigError("bad config file " + f.config_file + ": " + e.what());
    }
  }
  if (!f.corpus.empty()) c.corpus = f.corpus;
  if (!f.failures.empty()) c.failures = f.failures;
  if (!f.truth.empty()) c.truth = f.truth;
  if (f.config_file.empty() || f.out != "run") c.out_dir = f.out;
  if (!f.scorers.empty()) c.scorers = f.scorers;
  if (f.no_balance) c.balance = false;
  if (f.epochs) c.model.epochs = *f.epochs;
  if (f.window) c.window_s = *f.window;
  if (f.seed) {
    c.seed = *f.seed;
    c.model.seed = *f.seed;
  }
  c.validate();
  return c;
}

void print_json_file(const std::filesystem::path &p) {
  if (!std::filesystem::exists(p)) throw DataError("missing " + p.string());
  std::cout << read_file(p);
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Root-cause candidate ranking for failure investigation windows"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  std::string gen_profile_name = "small", gen_out = "data";
  std::uint64_t gen_seed = 7;
  std::optional<int> gen_failures;
  auto *gen = app.add_subcommand("gen", "Generate a synthetic corpus with injected failures");
  gen->add_option("--profile", gen_profile_name, "small or medium")->capture_default_str();
  gen->add_option("--seed", gen_seed)->capture_default_str();
  gen->add_option("--failures", gen_failures, "Override the profile's failure count");
  gen->add_option("--out", gen_out, "Output directory")->capture_default_str();

  TrainFlags tf;
  auto *train_cmd = app.add_subcommand("train", "Tokenize, label, balance, train and checkpoint");
  train_cmd->add_option("--config", tf.config_file, "RunConfig JSON; flags override it");
  train_cmd->add_option("--corpus", tf.corpus);
  train_cmd->add_option("--failures", tf.failures);
  train_cmd->add_option("--truth", tf.truth);
  train_cmd->add_option("--out", tf.out, "Run directory")->capture_default_str();
  train_cmd->add_option("--scorer", tf.scorers, "logrca and/or tree (repeatable)");
  train_cmd->add_flag("--no-balance", tf.no_balance, "Skip cluster-based balancing");
  train_cmd->add_option("--epochs", tf.epochs);
  train_cmd->add_option("--window", tf.window, "Investigation window in seconds");
  train_cmd->add_option("--seed", tf.seed);

  std::string run_dir = "run";
  auto *score_cmd = app.add_subcommand("score", "Score every window with the trained scorers");
  score_cmd->add_option("--out", run_dir, "Run directory")->capture_default_str();

  std::vector<std::string> eval_scorers;
  auto *eval_cmd = app.add_subcommand("eval", "Compute precision@n, recall@n and full coverage");
  eval_cmd->add_option("--out", run_dir, "Run directory")->capture_default_str();
  eval_cmd->add_option("--scorer", eval_scorers, "Scorers to compare (repeatable)");

  std::string host = "127.0.0.1";
  int port = 8080;
  auto *serve_cmd = app.add_subcommand("serve", "Serve scored windows over HTTP");
  serve_cmd->add_option("--out", run_dir, "Run directory")->capture_default_str();
  serve_cmd->add_option("--host", host)->capture_default_str();
  serve_cmd->add_option("--port", port)->capture_default_str()->check(CLI::Range(1, 65535));

  std::string what = "balance";
  auto *inspect_cmd = app.add_subcommand("inspect", "Print the balance report, training log or manifest");
  inspect_cmd->add_option("--out", run_dir, "Run directory")->capture_default_str();
  inspect_cmd->add_option("what", what, "balance, log or manifest")
      ->check(CLI::IsMember({"balance", "log", "manifest"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*gen) {
      auto cfg = logrca::gen_profile(gen_profile_name, gen_seed);
      if (gen_failures) cfg.failures = *gen_failures;
      const auto data = generate(cfg);
      const auto p = write_generated(data, gen_out);
      write_file(std::filesystem::path(gen_out) / "gen_config.json", gen_config_json(cfg).dump(2) + "\n");
      std::cout << "wrote " << data.lines.size() << " lines and " << data.failures.size() << " failures to "
                << gen_out << "\n"
                << "  " << p.corpus << "\n  " << p.failures << "\n  " << p.truth << "\n";
    } else if (*train_cmd) {
      const auto c = effective_config(tf);
      const auto s = run_train(c, &std::cout);
      write_manifest(c);
      std::cout << "q=" << s.q << " clusters=" << s.clusters << " (" << s.seconds << " s), artifacts in "
                << c.out_dir << "\n";
    } else if (*score_cmd) {
      const auto c = load_run_config(run_dir);
      run_score(c);
      write_manifest(c);
      std::cout << "scored windows written to " << RunPaths{run_dir}.root / "scores" << "\n";
    } else if (*eval_cmd) {
      const auto c = load_run_config(run_dir);
      const auto r = run_eval(c, eval_scorers.empty() ? c.scorers : eval_scorers);
      write_manifest(c);
      for (const auto &w : r.warnings) std::cerr << "warning: " << w << "\n";
      std::cout << r.table();
    } else if (*serve_cmd) {
      const ApiService api(run_dir);
      httplib::Server srv;
      mount_api(srv, api);
      static httplib::Server *running = &srv;
      std::signal(SIGINT, [](int) { running->stop(); });
      std::signal(SIGTERM, [](int) { running->stop(); });
      std::cout << "serving " << run_dir << " on http://" << host << ":" << port << std::endl;
      if (!srv.listen(host, port)) throw ConfigError("cannot listen on " + host + ":" + std::to_string(port));
    } else if (*inspect_cmd) {
      const RunPaths paths{run_dir};
      if (what == "balance") print_json_file(paths.balance_report());
      if (what == "log") print_json_file(paths.training_log());
      if (what == "manifest") print_json_file(paths.manifest());
    }
  } catch (const ConfigError &e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const DataError &e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const TrainingError &e) {
    std::cerr << "training diverged: " << e.what() << "\n";
    return 3;
  } catch (const nlohmann::json::exception &e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
