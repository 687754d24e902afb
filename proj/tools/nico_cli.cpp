#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nico/checkpoint.hpp"
#include "nico/error.hpp"
#include "nico/harness.hpp"
#include "nico/io.hpp"
#include "nico/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitCheckpoint = 4;

struct RunFlags {
  std::string method = "greedy2opt";
  std::string dataset;
  std::string checkpoint;
  std::size_t budget = 0;
  double budget_factor = 10.0;
  std::size_t restarts = 1;
  std::string decode = "sample";
  std::uint64_t seed = 0;
  std::uint64_t init_seed = 0;
  std::string initial_tours;
  double time_limit = 0.0;
  std::size_t threads = 1;
  std::size_t tabu_tenure = 8;
  bool no_aspiration = false;
  std::string label;
  std::string out;
};

void add_run_flags(CLI::App* cmd, RunFlags& f, bool refine) {
  cmd->add_option("--method", f.method, "nico|greedy2opt|greedy3opt|tabu|random_policy")
      ->capture_default_str();
  cmd->add_option("--dataset", f.dataset, "JSONL or TSPLIB dataset")->required();
  cmd->add_option("--checkpoint", f.checkpoint, "policy checkpoint (method nico)");
  cmd->add_option("--budget", f.budget, "fixed step budget per restart (default factor * n)");
  cmd->add_option("--budget-factor", f.budget_factor, "steps per city")->capture_default_str();
  cmd->add_option("--restarts", f.restarts, "independent restarts")->capture_default_str();
  cmd->add_option("--decode", f.decode, "sample|greedy")->capture_default_str();
  cmd->add_option("--seed", f.seed, "search seed")->capture_default_str();
  cmd->add_option("--init-seed", f.init_seed, "start tour seed")->capture_default_str();
  auto* tours = cmd->add_option("--initial-tours", f.initial_tours, "tour JSONL for refinement");
  if (refine) tours->required();
  cmd->add_option("--time-limit", f.time_limit, "wall-clock cap per restart in seconds");
  cmd->add_option("--threads", f.threads, "worker threads")->capture_default_str();
  cmd->add_option("--tabu-tenure", f.tabu_tenure, "tabu tenure")->capture_default_str();
  cmd->add_flag("--no-aspiration", f.no_aspiration, "disable the tabu aspiration criterion");
  cmd->add_option("--label", f.label, "row label in reports");
  cmd->add_option("--out", f.out, "output directory")->required();
}

nico::RunSpec to_spec(const RunFlags& f) {
  nico::RunSpec spec;
  spec.method = nico::parse_method(f.method);
  spec.dataset = f.dataset;
  spec.checkpoint = f.checkpoint;
  spec.budget = f.budget;
  spec.budget_factor = f.budget_factor;
  spec.restarts = f.restarts;
  spec.decode = nico::parse_decode(f.decode);
  spec.seed = f.seed;
  spec.init_seed = f.init_seed;
  spec.initial_tours = f.initial_tours;
  if (f.time_limit > 0.0) spec.time_limit_seconds = f.time_limit;
  spec.threads = f.threads;
  spec.tabu.tenure = f.tabu_tenure;
  spec.tabu.aspiration = !f.no_aspiration;
  spec.label = f.label;
  return spec;
}

void print_report(const nico::Report& report) {
  std::cout << report.label << ": " << report.instances.size() << " instances, mean cost "
            << report.mean_cost();
  if (const auto gap = report.mean_gap()) std::cout << ", mean gap " << *gap << "%";
  std::cout << ", mean time " << report.mean_seconds() << " s\n";
}

int run_improve(const RunFlags& f) {
  const nico::RunSpec spec = to_spec(f);
  const nico::Report report = nico::run_spec(spec);
  nico::write_run(f.out, report);
  print_report(report);
  return kExitOk;
}

struct TrainFlags {
  std::vector<std::string> configs;
  std::string stage;
  std::optional<std::size_t> epochs;
  std::string from;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> model_seed;
  std::optional<std::size_t> threads;
  std::vector<std::string> overrides;
  std::string out;
  bool quiet = false;
};

int run_train(const TrainFlags& f) {
  std::string text;
  // Later files override earlier ones key by key.
  for (const auto& path : f.configs) text += nico::read_file(path) + "\n";
  if (!f.stage.empty()) text += "\nstage = " + f.stage;
  if (f.epochs) text += "\nepochs = " + std::to_string(*f.epochs);
  if (f.seed) text += "\nseed = " + std::to_string(*f.seed);
  if (f.model_seed) text += "\nmodel_seed = " + std::to_string(*f.model_seed);
  if (f.threads) text += "\nthreads = " + std::to_string(*f.threads);
  for (const auto& kv : f.overrides) text += "\n" + kv;
  const nico::TrainConfig config = nico::parse_train_config(text);

  std::optional<nico::Checkpoint> start;
  if (!f.from.empty()) start = nico::load_checkpoint(f.from);
  fs::create_directories(f.out);
  nico::write_file(fs::path(f.out) / "config.cfg", nico::to_config_text(config));
  nico::Trainer::Logger logger;
  if (!f.quiet) logger = [](const std::string& line) { std::cerr << line << "\n"; };
  const nico::Checkpoint final_ckpt = nico::train(config, start, f.out, logger);
  std::cout << "trained " << nico::to_string(config.stage) << " to epoch " << final_ckpt.epoch
            << "; checkpoint " << (fs::path(f.out) / "last.ckpt").string() << "\n";
  return kExitOk;
}

json policy_info(const nico::Policy& policy) {
  json blocks = json::array();
  for (const auto* p : policy.parameters()) {
    blocks.push_back({{"name", p->name}, {"rows", p->value.rows}, {"cols", p->value.cols}});
  }
  return json{{"model_config", nico::to_json(policy.config())},
              {"parameter_count", policy.parameter_count()},
              {"blocks", blocks}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural 2-opt improvement toolkit for Euclidean TSP"};
  app.require_subcommand(1);

  // generate
  std::size_t gen_n = 50, gen_count = 100, gen_threads = 1;
  std::uint64_t gen_seed = 0;
  bool gen_opt = false;
  std::string gen_out, gen_format = "jsonl";
  auto* generate = app.add_subcommand("generate", "write a uniform random dataset");
  generate->add_option("--n", gen_n, "cities per instance")->capture_default_str();
  generate->add_option("--count", gen_count, "number of instances")->capture_default_str();
  generate->add_option("--seed", gen_seed, "dataset seed")->capture_default_str();
  generate->add_flag("--with-optimum", gen_opt, "annotate Held-Karp optima (n <= 14)");
  generate->add_option("--format", gen_format, "jsonl|tsplib (tsplib needs --count 1)")
      ->capture_default_str();
  generate->add_option("--threads", gen_threads, "worker threads")->capture_default_str();
  generate->add_option("--out", gen_out, "output file")->required();

  // train
  TrainFlags train_flags;
  auto* train = app.add_subcommand("train", "imitation or group RL training");
  train->add_option("--config", train_flags.configs, "key = value config file; repeat to layer presets");
  train->add_option("--stage", train_flags.stage, "IL|RL (overrides the config)");
  train->add_option("--epochs", train_flags.epochs, "epochs for this stage");
  train->add_option("--from", train_flags.from, "checkpoint to resume or continue from");
  train->add_option("--seed", train_flags.seed, "data seed");
  train->add_option("--model-seed", train_flags.model_seed, "initialization seed");
  train->add_option("--threads", train_flags.threads, "rollout worker threads");
  train->add_option("--set", train_flags.overrides, "extra key=value overrides")->take_all();
  train->add_flag("--quiet", train_flags.quiet, "no per-epoch log lines");
  train->add_option("--out", train_flags.out, "output directory")->required();

  RunFlags improve_flags;
  auto* improve = app.add_subcommand("improve", "run a search method from random tours");
  add_run_flags(improve, improve_flags, false);

  RunFlags refine_flags;
  auto* refine = app.add_subcommand("refine", "run a search method from supplied tours");
  add_run_flags(refine, refine_flags, true);

  RunFlags var_flags;
  std::vector<std::string> var_checkpoints;
  std::size_t var_seeds = 20;
  auto* variability = app.add_subcommand("variability", "training and inference variability");
  add_run_flags(variability, var_flags, false);
  variability->remove_option(variability->get_option("--checkpoint"));
  variability->add_option("--checkpoint", var_checkpoints, "one checkpoint per training seed")
      ->take_all();
  variability->add_option("--inference-seeds", var_seeds, "seeds on the first checkpoint")
      ->capture_default_str();

  std::vector<std::string> report_dirs;
  std::string report_out;
  std::uint64_t report_seed = 0;
  std::size_t report_threads = 1;
  auto* report = app.add_subcommand("report", "merge run directories into tables and curves");
  report->add_option("runs", report_dirs, "run directories")->required();
  report->add_option("--out", report_out, "output directory")->required();
  report->add_option("--seed", report_seed, "unused; accepted for uniformity");
  report->add_option("--threads", report_threads, "unused; accepted for uniformity");

  std::string info_ckpt, info_config, info_out;
  std::uint64_t info_seed = 0;
  std::size_t info_threads = 1;
  auto* info = app.add_subcommand("policy-info", "print a model configuration and size");
  info->add_option("--checkpoint", info_ckpt, "checkpoint to inspect");
  info->add_option("--config", info_config, "training config to instantiate");
  info->add_option("--seed", info_seed, "initialization seed with --config");
  info->add_option("--threads", info_threads, "unused; accepted for uniformity");
  info->add_option("--out", info_out, "write the JSON here as well");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*generate) {
      const auto instances = nico::generate_dataset(gen_n, gen_count, gen_seed, gen_opt, gen_threads);
      if (gen_format == "tsplib") {
        if (instances.size() != 1) throw nico::ConfigError("--format tsplib writes exactly one instance");
        nico::write_file(gen_out, nico::to_tsplib(instances.front()));
      } else if (gen_format == "jsonl") {
        nico::write_dataset(gen_out, instances);
      } else {
        throw nico::ConfigError("unknown format '" + gen_format + "'");
      }
      std::cout << "wrote " << instances.size() << " instances to " << gen_out << "\n";
      return kExitOk;
    }
    if (*train) return run_train(train_flags);
    if (*improve) return run_improve(improve_flags);
    if (*refine) return run_improve(refine_flags);
    if (*variability) {
      const nico::RunSpec spec = to_spec(var_flags);
      std::vector<fs::path> paths(var_checkpoints.begin(), var_checkpoints.end());
      if (spec.method == nico::Method::kNico && paths.empty()) {
        throw nico::ConfigError("variability with method nico needs --checkpoint");
      }
      nico::RunSpec base = spec;
      if (!paths.empty()) base.checkpoint = paths.front();
      const auto result = nico::run_variability(base, paths, var_seeds);
      fs::create_directories(var_flags.out);
      nico::write_file(fs::path(var_flags.out) / "variability.json", result.to_json().dump(2) + "\n");
      nico::write_file(fs::path(var_flags.out) / "variability.md", result.markdown());
      std::cout << result.markdown();
      return kExitOk;
    }
    if (*report) {
      std::vector<fs::path> dirs(report_dirs.begin(), report_dirs.end());
      const auto rows = nico::merge_reports(dirs);
      nico::write_summary(report_out, rows);
      std::cout << nico::markdown_table(rows);
      return kExitOk;
    }
    if (*info) {
      nico::Policy policy;
      if (!info_ckpt.empty()) {
        policy = nico::policy_from_checkpoint(nico::load_checkpoint(info_ckpt));
      } else {
        const nico::TrainConfig config =
            info_config.empty() ? nico::TrainConfig::defaults(nico::Stage::kIL)
                                : nico::load_train_config(info_config);
        policy = nico::Policy(config.model, info_seed);
      }
      const json out = policy_info(policy);
      std::cout << out.dump(2) << "\n";
      if (!info_out.empty()) nico::write_file(info_out, out.dump(2) + "\n");
      return kExitOk;
    }
  } catch (const nico::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const nico::CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return kExitCheckpoint;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
