#include "btpredict/cli.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "btpredict/evaluation.hpp"
#include "btpredict/inference.hpp"
#include "btpredict/learning.hpp"
#include "btpredict/replay.hpp"
#include "btpredict/techtree.hpp"

namespace btp {

namespace {

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

TechDag load_dag_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dag file '" + path + "'");
  return load_tech_dag(in);
}

Model load_model_file(const std::string& path, const TechDag& dag) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open model file '" + path + "'");
  return Model::load(in, dag);
}

std::vector<Replay> load_replays(const std::vector<std::string>& paths, const TechDag& dag,
                                 std::ostream& err, ParseStats* stats_out = nullptr) {
  std::vector<Replay> all;
  for (const std::string& path : paths) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open replay log '" + path + "'");
    ParseResult result = parse_replay_log(in, dag);
    if (result.stats.repaired_events || result.stats.reordered_events ||
        result.stats.capped_events) {
      err << path << ": " << result.stats.repaired_events << " prerequisite repairs, "
          << result.stats.reordered_events << " reordered events, "
          << result.stats.capped_events << " events over cap dropped\n";
    }
    if (stats_out) {
      stats_out->repaired_events += result.stats.repaired_events;
      stats_out->reordered_events += result.stats.reordered_events;
      stats_out->capped_events += result.stats.capped_events;
    }
    all.insert(all.end(), std::make_move_iterator(result.replays.begin()),
               std::make_move_iterator(result.replays.end()));
  }
  return all;
}

std::string file_stem(const std::string& path) {
  std::size_t slash = path.find_last_of("/\\");
  std::string name = slash == std::string::npos ? path : path.substr(slash + 1);
  std::size_t dot = name.find_last_of('.');
  return dot == std::string::npos || dot == 0 ? name : name.substr(0, dot);
}

struct CliConfig {
  std::string dag_path;
  std::string model_path;
  std::vector<std::string> replay_paths;
  std::string out_path;
  std::uint32_t t_max = 3600;
  double sigma_min = 5.0;
  double n0 = 1.0;
  double sigma0 = 120.0;
  std::string prior = "uniform";
  double noise = 0.0;
  std::vector<double> levels;
  std::uint64_t seed = 0;
  int folds = 10;
  int jobs = 1;
  std::string matchup;
  bool table1 = false;
  bool duplicates = false;
  std::uint32_t time_s = 0;
  std::string obs_text;
  std::size_t top = 0;
  std::string format = "csv";
  std::size_t count = 100;
};

ModelConfig model_config(const CliConfig& c) {
  ModelConfig cfg;
  cfg.t_max_s = c.t_max;
  cfg.sigma_min_s = c.sigma_min;
  cfg.n0 = c.n0;
  cfg.sigma0_s = c.sigma0;
  if (c.prior == "histogram")
    cfg.prior_mode = PriorMode::histogram;
  else if (c.prior == "uniform")
    cfg.prior_mode = PriorMode::uniform;
  else
    throw Error("unknown prior mode '" + c.prior + "' (uniform|histogram)");
  return cfg;
}

void add_learn_options(CLI::App* cmd, CliConfig& c) {
  cmd->add_option("--t-max", c.t_max, "Time horizon in seconds")->capture_default_str();
  cmd->add_option("--sigma-min", c.sigma_min, "Standard deviation floor in seconds")
      ->capture_default_str();
  cmd->add_option("--n0", c.n0, "Prior pseudo-count")->capture_default_str();
  cmd->add_option("--sigma0", c.sigma0, "Prior standard deviation in seconds")
      ->capture_default_str();
  cmd->add_option("--prior", c.prior, "Tree prior: uniform or histogram")
      ->capture_default_str();
}

// Writes to the path or stdout when path is empty/"-".
void with_output(const std::string& path, std::ostream& fallback,
                 const std::function<void(std::ostream&)>& fn) {
  if (path.empty() || path == "-") {
    fn(fallback);
    return;
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot open output file '" + path + "'");
  fn(out);
}

int cmd_dag_stats(const CliConfig& c, std::ostream& out) {
  TechDag dag = load_dag_file(c.dag_path);
  auto no_dup = enumerate_build_trees(dag, false);
  out << "race " << to_string(dag.race()) << '\n';
  out << "buildings " << dag.size() << '\n';
  out << "roots " << dag.roots().size() << '\n';
  out << "trees_no_dup " << no_dup.size() << '\n';
  if (c.duplicates) {
    auto dup = enumerate_build_trees(dag, true);
    out << "trees_dup " << dup.size() << '\n';
  }
  return 0;
}

int cmd_learn(const CliConfig& c, std::ostream& out, std::ostream& err) {
  TechDag dag = load_dag_file(c.dag_path);
  std::vector<Replay> replays = load_replays(c.replay_paths, dag, err);
  Model model = Model::fit(replays, dag, model_config(c));
  err << "fitted " << model.replays_fitted() << " replays into " << model.size()
      << " build trees (" << model.clamped_observations() << " clamped observations)\n";
  with_output(c.out_path, out, [&](std::ostream& o) { model.save(o); });
  return 0;
}

int cmd_predict(const CliConfig& c, std::ostream& out) {
  TechDag dag = load_dag_file(c.dag_path);
  Model model = load_model_file(c.model_path, dag);
  ObservationVector obs = parse_counts(c.obs_text, dag);
  Posterior post = posterior(model, c.time_s, obs);
  std::size_t limit = c.top == 0 ? post.entries.size() : std::min(c.top, post.entries.size());
  if (c.format == "csv") {
    out << "rank,probability,tree\n";
    for (std::size_t i = 0; i < limit; ++i)
      out << (i + 1) << ',' << format_double(post.entries[i].probability) << ",\""
          << to_string(post.entries[i].tree, dag) << "\"\n";
  } else if (c.format == "lines") {
    for (std::size_t i = 0; i < limit; ++i)
      out << format_double(post.entries[i].probability) << ' '
          << to_string(post.entries[i].tree, dag) << '\n';
  } else {
    throw Error("unknown format '" + c.format + "' (csv|lines)");
  }
  return 0;
}

int cmd_evaluate(const CliConfig& c, std::ostream& out, std::ostream& err) {
  TechDag dag = load_dag_file(c.dag_path);
  ModelConfig cfg = model_config(c);
  std::vector<double> levels = c.levels.empty() ? std::vector<double>{c.noise} : c.levels;

  MetricsReport report;
  report.seed = c.seed;
  report.folds = c.folds;
  for (const std::string& path : c.replay_paths) {
    std::vector<Replay> corpus = load_replays({path}, dag, err);
    std::string label = c.matchup.empty() ? file_stem(path) : c.matchup;
    for (double level : levels) {
      // one seed for the whole sweep: fold splits stay identical across
      // levels and per-point noise draws are coupled, so level-to-level
      // differences reflect the noise, not resampling
      NoiseSpec noise{level, c.seed};
      MetricsReport part = cross_validate(corpus, dag, cfg, c.folds, noise, label, c.jobs);
      report.rows.insert(report.rows.end(), part.rows.begin(), part.rows.end());
    }
  }
  with_output(c.out_path, out, [&](std::ostream& o) {
    if (c.table1)
      write_table1(o, report);
    else
      write_report_csv(o, report);
  });
  return 0;
}

int cmd_generate(const CliConfig& c, std::ostream& out) {
  TechDag dag = load_dag_file(c.dag_path);
  Model model = load_model_file(c.model_path, dag);
  std::vector<Replay> replays = generate_synthetic_replays(model, c.count, c.seed);
  with_output(c.out_path, out, [&](std::ostream& o) { write_replay_log(o, replays, dag); });
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CliConfig c;
  CLI::App app{"Build tree prediction from replay logs"};
  app.require_subcommand(1);

  CLI::App* dag_cmd = app.add_subcommand("dag", "Tech dag inspection");
  dag_cmd->require_subcommand(1);
  CLI::App* stats_cmd = dag_cmd->add_subcommand("stats", "Building and tree domain counts");
  stats_cmd->add_option("--dag", c.dag_path, "Tech dag file")->required();
  stats_cmd->add_flag("--duplicates", c.duplicates, "Also count the duplicate-enabled domain");

  CLI::App* learn_cmd = app.add_subcommand("learn", "Fit a model from replay logs");
  learn_cmd->add_option("--dag", c.dag_path, "Tech dag file")->required();
  learn_cmd->add_option("--replays", c.replay_paths, "Replay log file(s)")->required();
  learn_cmd->add_option("--out", c.out_path, "Model output file (default stdout)");
  add_learn_options(learn_cmd, c);

  CLI::App* predict_cmd = app.add_subcommand("predict", "Posterior over build trees");
  predict_cmd->add_option("--dag", c.dag_path, "Tech dag file")->required();
  predict_cmd->add_option("--model", c.model_path, "Model file")->required();
  predict_cmd->add_option("--time", c.time_s, "Game time in seconds")->required();
  predict_cmd->add_option("--obs", c.obs_text, "Observed buildings, name[:count],... or '-'")
      ->required();
  predict_cmd->add_option("--top", c.top, "Print only the top k entries (0 = all)")
      ->capture_default_str();
  predict_cmd->add_option("--format", c.format, "Output format: csv or lines")
      ->capture_default_str();

  CLI::App* eval_cmd = app.add_subcommand("evaluate", "Cross-validated metrics report");
  eval_cmd->add_option("--dag", c.dag_path, "Tech dag file")->required();
  eval_cmd->add_option("--replays", c.replay_paths, "Replay log file(s), one matchup each")
      ->required();
  eval_cmd->add_option("--folds", c.folds, "Cross-validation folds")->capture_default_str();
  eval_cmd->add_option("--noise", c.noise, "Missing-observation probability")
      ->capture_default_str();
  eval_cmd->add_option("--levels", c.levels, "Noise sweep levels (overrides --noise)")
      ->delimiter(',');
  eval_cmd->add_option("--seed", c.seed, "Random seed")->envname("BTPREDICT_SEED");
  eval_cmd->add_option("--matchup", c.matchup, "Matchup label (default: file stem)");
  eval_cmd->add_option("--jobs", c.jobs, "Worker threads for evaluation")
      ->capture_default_str();
  eval_cmd->add_flag("--table1", c.table1, "Aggregate layout grouped by noise level");
  eval_cmd->add_option("--out", c.out_path, "Report output file (default stdout)");
  add_learn_options(eval_cmd, c);

  CLI::App* gen_cmd = app.add_subcommand("generate", "Sample synthetic replays from a model");
  gen_cmd->add_option("--dag", c.dag_path, "Tech dag file")->required();
  gen_cmd->add_option("--model", c.model_path, "Model file")->required();
  gen_cmd->add_option("--n", c.count, "Number of replays")->capture_default_str();
  gen_cmd->add_option("--seed", c.seed, "Random seed")->envname("BTPREDICT_SEED");
  gen_cmd->add_option("--out", c.out_path, "Replay log output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (stats_cmd->parsed()) return cmd_dag_stats(c, out);
    if (learn_cmd->parsed()) return cmd_learn(c, out, err);
    if (predict_cmd->parsed()) return cmd_predict(c, out);
    if (eval_cmd->parsed()) return cmd_evaluate(c, out, err);
    if (gen_cmd->parsed()) return cmd_generate(c, out);
    err << "error: no subcommand\n";
    return 1;
  } catch (const NoCompatibleTreeError& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace btp
