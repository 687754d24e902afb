#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nico/baselines.hpp"
#include "nico/io.hpp"
#include "nico/policy.hpp"
#include "nico/tsp.hpp"

namespace nico {

class Rng;

enum class Method { kNico, kGreedy2Opt, kGreedy3Opt, kTabu, kRandomPolicy };
std::string to_string(Method method);
Method parse_method(const std::string& text);

enum class Decode { kSample, kGreedy };
std::string to_string(Decode decode);
Decode parse_decode(const std::string& text);

inline constexpr std::size_t kRandomPolicyRecency = 8;

// Policy-driven improvement: every step executes the chosen move, improving or
// not, and the trace tracks the best tour so far. A null policy samples
// uniformly over the live cells.
SearchResult run_policy_search(const Policy* policy, const Instance& instance,
                               std::span<const int> start, const SearchLimits& limits, Rng& rng,
                               bool greedy, std::size_t recency_length,
                               std::size_t history_capacity = HistoryBuffer::kDefaultCapacity);

struct RunSpec {
  Method method = Method::kGreedy2Opt;
  std::filesystem::path dataset;
  std::filesystem::path checkpoint;     // neural runs only
  std::size_t budget = 0;               // fixed step budget; 0 means budget_factor * n
  double budget_factor = 10.0;
  std::size_t restarts = 1;
  Decode decode = Decode::kSample;
  std::uint64_t seed = 0;               // search randomness
  std::uint64_t init_seed = 0;          // random start tours
  std::filesystem::path initial_tours;  // refinement mode when non-empty
  double time_limit_seconds = std::numeric_limits<double>::infinity();
  std::size_t threads = 1;
  TabuOptions tabu;
  std::string label;                    // table row name; derived when empty

  std::size_t budget_for(std::size_t n) const;
  std::string display_label() const;
  bool refinement() const { return !initial_tours.empty(); }
  void validate() const;
};

struct RestartRun {
  double start_cost = 0.0;
  double best_cost = 0.0;
  double seconds = 0.0;
  Tour best_tour;
  AnytimeTrace trace;
};

struct InstanceReport {
  std::string id;
  std::size_t n = 0;
  double start_cost = 0.0;  // best start cost over restarts
  double best_cost = 0.0;   // min over restarts
  Tour best_tour;
  std::optional<double> opt_cost;
  std::optional<double> gap;  // percent
  double seconds = 0.0;       // search only, summed over restarts
  std::vector<RestartRun> restarts;
};

struct Report {
  std::string method;
  std::string label;
  std::string dataset;
  std::string dataset_digest;
  nlohmann::json spec;
  std::vector<InstanceReport> instances;

  double mean_cost() const;
  double std_cost() const;  // sample standard deviation over instances
  std::optional<double> mean_gap() const;
  double mean_seconds() const;

  nlohmann::json to_json() const;
  // Long-format traces: instance,restart,step,cost,best,seconds.
  std::string traces_csv() const;
};

double optimality_gap(double cost, double opt);

// FNV-1a over the canonical JSONL serialization of every instance.
std::string dataset_digest(const std::vector<Instance>& instances);

// Tours grouped by instance id, in file order.
std::vector<std::vector<Tour>> match_initial_tours(const std::vector<Instance>& instances,
                                                   const std::vector<TourRecord>& tours,
                                                   std::size_t restarts);

// Runs the spec on already loaded data. `policy` is required for kNico.
Report run_improvement(const RunSpec& spec, const std::vector<Instance>& instances,
                       const Policy* policy,
                       const std::vector<std::vector<Tour>>* initial_tours = nullptr);

// Loads the dataset, checkpoint and tours named in the spec and runs it.
Report run_spec(const RunSpec& spec);

// Writes report.json, traces.csv and tours.jsonl into `dir`.
void write_run(const std::filesystem::path& dir, const Report& report);

// Mean gap (or cost when optima are unknown) against cumulative steps and
// seconds, restarts laid end to end in execution order.
struct AnytimePoint {
  double x = 0.0;
  double mean_best_cost = 0.0;
  std::optional<double> mean_gap;
};

struct ReportSummary {
  std::string label;
  std::size_t runs = 0;
  std::size_t instances = 0;
  double mean_cost = 0.0;
  std::optional<double> mean_gap;
  double mean_seconds = 0.0;
  std::vector<AnytimePoint> by_step;
  std::vector<AnytimePoint> by_seconds;
};

// Merges run directories (grouped by label, in first-seen order) and writes
// anytime_steps.csv, anytime_seconds.csv and table.md into `out`.
std::vector<ReportSummary> merge_reports(const std::vector<std::filesystem::path>& run_dirs);
std::string anytime_csv(const std::vector<ReportSummary>& rows, bool by_seconds);
std::string markdown_table(const std::vector<ReportSummary>& rows);
void write_summary(const std::filesystem::path& out, const std::vector<ReportSummary>& rows);

struct VariabilityResult {
  std::string label;
  std::vector<double> checkpoint_means;  // one per checkpoint (training runs)
  std::vector<double> seed_means;        // one per inference seed, first checkpoint
  double mean_cost = 0.0;
  double training_std = 0.0;
  double inference_std = 0.0;

  nlohmann::json to_json() const;
  std::string markdown() const;
};

// Training variability across checkpoints and inference variability across
// `inference_seeds` seeds (seed, seed+1, ...) with fixed start tours.
VariabilityResult run_variability(const RunSpec& base,
                                  const std::vector<std::filesystem::path>& checkpoints,
                                  std::size_t inference_seeds);

double sample_std(const std::vector<double>& values);

// `count` uniform instances; optional Held-Karp optima for n <= 14.
inline constexpr std::size_t kAnnotateOptimumMaxN = 14;
std::vector<Instance> generate_dataset(std::size_t n, std::size_t count, std::uint64_t seed,
                                       bool with_optimum, std::size_t threads = 1);

}  // namespace nico
