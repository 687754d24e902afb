#include "nico/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

#include "nico/checkpoint.hpp"
#include "nico/error.hpp"
#include "nico/parallel.hpp"
#include "nico/rng.hpp"
#include "nico/state.hpp"

namespace nico {

using nlohmann::json;

namespace {

constexpr std::uint64_t kStartStream = 0x1a17;
constexpr std::uint64_t kSearchStream = 0x5ea4;
constexpr std::size_t kSecondsGridPoints = 101;

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::string format_fixed(double value, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, value);
  return buf;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

SearchResult run_method(const RunSpec& spec, const Policy* policy, const Instance& instance,
                        std::span<const int> start, const SearchLimits& limits, Rng& rng) {
  switch (spec.method) {
    case Method::kNico:
      return run_policy_search(policy, instance, start, limits, rng,
                               spec.decode == Decode::kGreedy,
                               policy->config().active_recency_mask(),
                               policy->config().history_capacity);
    case Method::kRandomPolicy:
      return run_policy_search(nullptr, instance, start, limits, rng, false, kRandomPolicyRecency);
    case Method::kGreedy2Opt:
      return greedy_two_opt(instance, start, limits);
    case Method::kGreedy3Opt:
      return greedy_three_opt(instance, start, limits);
    case Method::kTabu:
      return tabu_search(instance, start, limits, spec.tabu);
  }
  throw ConfigError("unknown method");
}

}  // namespace

std::string to_string(Method method) {
  switch (method) {
    case Method::kNico:
      return "nico";
    case Method::kGreedy2Opt:
      return "greedy2opt";
    case Method::kGreedy3Opt:
      return "greedy3opt";
    case Method::kTabu:
      return "tabu";
    case Method::kRandomPolicy:
      return "random_policy";
  }
  return "unknown";
}

Method parse_method(const std::string& text) {
  for (Method m : {Method::kNico, Method::kGreedy2Opt, Method::kGreedy3Opt, Method::kTabu,
                   Method::kRandomPolicy}) {
    if (text == to_string(m)) return m;
  }
  throw ConfigError("unknown method '" + text +
                    "' (expected nico|greedy2opt|greedy3opt|tabu|random_policy)");
}

std::string to_string(Decode decode) { return decode == Decode::kGreedy ? "greedy" : "sample"; }

Decode parse_decode(const std::string& text) {
  if (text == "sample") return Decode::kSample;
  if (text == "greedy") return Decode::kGreedy;
  throw ConfigError("unknown decode '" + text + "' (expected sample|greedy)");
}

SearchResult run_policy_search(const Policy* policy, const Instance& instance,
                               std::span<const int> start, const SearchLimits& limits, Rng& rng,
                               bool greedy, std::size_t recency_length,
                               std::size_t history_capacity) {
  SearchState state(instance, Tour(start.begin(), start.end()), history_capacity);
  TraceRecorder recorder(state.tour, state.cost);
  const std::size_t n = instance.size();
  while (!recorder.exhausted(limits)) {
    TwoOptMove move;
    if (policy) {
      PolicyOutput out;
      try {
        out = evaluate_policy(*policy, instance, state.tour, state.history, recency_length);
      } catch (const NoActionError&) {
        return recorder.finish(state.tour, TerminalReason::kLocalOptimum);
      }
      move = sample_action(out, rng, greedy).move;
    } else {
      const auto mask = action_mask(n, state.history, recency_length);
      const auto live = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
      if (live == 0) return recorder.finish(state.tour, TerminalReason::kLocalOptimum);
      std::size_t pick = rng.below(live);
      for (std::size_t cell = 0; cell < mask.size(); ++cell) {
        if (mask[cell] && pick-- == 0) {
          move = {static_cast<int>(cell / n), static_cast<int>(cell % n)};
          break;
        }
      }
    }
    state.apply(move);
    recorder.record(state.tour, state.cost);
  }
  const bool out_of_steps = recorder.steps_taken() >= limits.step_budget;
  return recorder.finish(state.tour,
                         out_of_steps ? TerminalReason::kBudget : TerminalReason::kTimeLimit);
}

std::size_t RunSpec::budget_for(std::size_t n) const {
  if (budget > 0) return budget;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(budget_factor * n)));
}

std::string RunSpec::display_label() const {
  if (!label.empty()) return label;
  std::string out = to_string(method);
  if (method == Method::kNico && decode == Decode::kGreedy) out += " greedy";
  if (refinement()) out += " refine";
  if (restarts > 1) out += " (x" + std::to_string(restarts) + ")";
  return out;
}

void RunSpec::validate() const {
  if (restarts < 1) throw ConfigError("restarts must be >= 1");
  if (budget == 0 && !(budget_factor > 0.0)) throw ConfigError("step budget must be >= 1");
  if (method == Method::kNico && checkpoint.empty()) {
    throw ConfigError("method nico needs --checkpoint");
  }
  if (!(time_limit_seconds > 0.0)) throw ConfigError("time limit must be positive");
}

double optimality_gap(double cost, double opt) { return (cost - opt) / opt * 100.0; }

std::string dataset_digest(const std::vector<Instance>& instances) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& inst : instances) {
    for (unsigned char c : to_jsonl_line(inst)) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<std::vector<Tour>> match_initial_tours(const std::vector<Instance>& instances,
                                                   const std::vector<TourRecord>& tours,
                                                   std::size_t restarts) {
  std::map<std::string, std::size_t> index;
  for (std::size_t k = 0; k < instances.size(); ++k) index.emplace(instances[k].id(), k);
  std::vector<std::vector<Tour>> out(instances.size());
  for (const auto& rec : tours) {
    const auto it = index.find(rec.id);
    if (it == index.end()) {
      throw InvalidInput("initial tour id '" + rec.id + "' does not match any instance id");
    }
    validate_tour(instances[it->second], rec.order);
    out[it->second].push_back(rec.order);
  }
  for (std::size_t k = 0; k < instances.size(); ++k) {
    if (out[k].size() < restarts) {
      throw InvalidInput("instance '" + instances[k].id() + "' has " +
                         std::to_string(out[k].size()) + " initial tours, " +
                         std::to_string(restarts) + " needed");
    }
  }
  return out;
}

Report run_improvement(const RunSpec& spec, const std::vector<Instance>& instances,
                       const Policy* policy, const std::vector<std::vector<Tour>>* initial_tours) {
  spec.validate();
  if (spec.method == Method::kNico && !policy) throw ConfigError("method nico needs a policy");
  if (initial_tours && initial_tours->size() != instances.size()) {
    throw InvalidInput("initial tours do not cover the dataset");
  }

  Report report;
  report.method = to_string(spec.method);
  report.label = spec.display_label();
  report.dataset = spec.dataset.filename().string();
  report.dataset_digest = dataset_digest(instances);
  report.spec = json{{"method", report.method},
                     {"restarts", spec.restarts},
                     {"budget", spec.budget},
                     {"budget_factor", spec.budget_factor},
                     {"decode", to_string(spec.decode)},
                     {"seed", spec.seed},
                     {"init_seed", spec.init_seed},
                     {"refinement", initial_tours != nullptr}};
  if (spec.method == Method::kNico) report.spec["checkpoint"] = spec.checkpoint.filename().string();
  if (spec.method == Method::kTabu) {
    report.spec["tabu_tenure"] = spec.tabu.tenure;
    report.spec["tabu_aspiration"] = spec.tabu.aspiration;
  }
  report.instances.resize(instances.size());

  parallel_for(instances.size(), spec.threads, [&](std::size_t k) {
    const Instance& inst = instances[k];
    const std::size_t n = inst.size();
    InstanceReport& out = report.instances[k];
    out.id = inst.id();
    out.n = n;
    out.opt_cost = inst.opt_cost();
    const SearchLimits limits{spec.budget_for(n), spec.time_limit_seconds};
    for (std::size_t r = 0; r < spec.restarts; ++r) {
      Tour start;
      if (initial_tours) {
        start = (*initial_tours)[k][r];
      } else {
        Rng start_rng = Rng::keyed(spec.init_seed, {kStartStream, k, r});
        start = random_tour(n, start_rng);
      }
      Rng rng = Rng::keyed(spec.seed, {kSearchStream, k, r});
      SearchResult result = run_method(spec, policy, inst, start, limits, rng);
      RestartRun run;
      run.start_cost = result.trace.steps.front().cost;
      run.best_cost = result.best_cost;
      run.seconds = result.trace.steps.back().seconds;
      run.best_tour = std::move(result.best_tour);
      run.trace = std::move(result.trace);
      out.restarts.push_back(std::move(run));
    }
    std::size_t best = 0;
    out.start_cost = out.restarts.front().start_cost;
    for (std::size_t r = 0; r < out.restarts.size(); ++r) {
      if (out.restarts[r].best_cost < out.restarts[best].best_cost) best = r;
      out.start_cost = std::min(out.start_cost, out.restarts[r].start_cost);
      out.seconds += out.restarts[r].seconds;
    }
    out.best_cost = out.restarts[best].best_cost;
    out.best_tour = out.restarts[best].best_tour;
    if (out.opt_cost) out.gap = optimality_gap(out.best_cost, *out.opt_cost);
  });
  return report;
}

Report run_spec(const RunSpec& spec) {
  spec.validate();
  const std::vector<Instance> instances = load_dataset(spec.dataset);
  if (instances.empty()) throw InvalidInput("dataset '" + spec.dataset.string() + "' is empty");
  Policy policy;
  const bool neural = spec.method == Method::kNico;
  if (neural) policy = policy_from_checkpoint(load_checkpoint(spec.checkpoint));
  std::vector<std::vector<Tour>> tours;
  if (spec.refinement()) {
    tours = match_initial_tours(instances, load_tours(spec.initial_tours), spec.restarts);
  }
  return run_improvement(spec, instances, neural ? &policy : nullptr,
                         spec.refinement() ? &tours : nullptr);
}

double Report::mean_cost() const {
  std::vector<double> v;
  for (const auto& i : instances) v.push_back(i.best_cost);
  return mean_of(v);
}

double Report::std_cost() const {
  std::vector<double> v;
  for (const auto& i : instances) v.push_back(i.best_cost);
  return sample_std(v);
}

std::optional<double> Report::mean_gap() const {
  std::vector<double> v;
  for (const auto& i : instances) {
    if (!i.gap) return std::nullopt;
    v.push_back(*i.gap);
  }
  if (v.empty()) return std::nullopt;
  return mean_of(v);
}

double Report::mean_seconds() const {
  std::vector<double> v;
  for (const auto& i : instances) v.push_back(i.seconds);
  return mean_of(v);
}

json Report::to_json() const {
  json rows = json::array();
  for (const auto& i : instances) {
    json restart_best = json::array();
    json restart_start = json::array();
    json restart_steps = json::array();
    json restart_reason = json::array();
    for (const auto& r : i.restarts) {
      restart_best.push_back(r.best_cost);
      restart_start.push_back(r.start_cost);
      restart_steps.push_back(r.trace.steps.size() - 1);
      restart_reason.push_back(to_string(r.trace.reason));
    }
    rows.push_back(json{{"id", i.id},
                        {"n", i.n},
                        {"start_cost", i.start_cost},
                        {"best_cost", i.best_cost},
                        {"opt_cost", optional_json(i.opt_cost)},
                        {"gap", optional_json(i.gap)},
                        {"restart_start_cost", restart_start},
                        {"restart_best_cost", restart_best},
                        {"restart_steps", restart_steps},
                        {"restart_reason", restart_reason},
                        {"seconds", i.seconds}});
  }
  return json{{"format", "nico-report/1"},
              {"method", method},
              {"label", label},
              {"dataset", {{"name", dataset}, {"digest", dataset_digest}, {"instances", instances.size()}}},
              {"spec", spec},
              {"instances", rows},
              {"aggregate",
               {{"mean_cost", mean_cost()},
                {"std_cost", std_cost()},
                {"mean_gap", optional_json(mean_gap())},
                {"mean_seconds", mean_seconds()}}}};
}

std::string Report::traces_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "instance,restart,step,cost,best,seconds\n";
  for (const auto& i : instances) {
    for (std::size_t r = 0; r < i.restarts.size(); ++r) {
      for (const auto& s : i.restarts[r].trace.steps) {
        out << i.id << ',' << r << ',' << s.step << ',' << s.cost << ',' << s.best << ','
            << s.seconds << '\n';
      }
    }
  }
  return out.str();
}

void write_run(const std::filesystem::path& dir, const Report& report) {
  std::filesystem::create_directories(dir);
  write_file(dir / "report.json", report.to_json().dump(2) + "\n");
  write_file(dir / "traces.csv", report.traces_csv());
  std::vector<TourRecord> tours;
  for (const auto& i : report.instances) tours.push_back({i.id, i.best_tour, i.best_cost});
  write_tours(dir / "tours.jsonl", tours);
}

namespace {

struct LoadedRun {
  json report;
  // instance id -> restarts -> trace rows
  std::map<std::string, std::vector<std::vector<TraceStep>>> traces;
};

LoadedRun load_run(const std::filesystem::path& dir) {
  LoadedRun run;
  try {
    run.report = json::parse(read_file(dir / "report.json"));
  } catch (const json::exception& e) {
    throw ParseError(dir.string() + "/report.json: " + e.what());
  }
  std::istringstream in(read_file(dir / "traces.csv"));
  std::string line;
  std::getline(in, line);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    // id may contain commas only in pathological cases; the numeric fields are the last five.
    std::vector<std::string> fields;
    std::size_t pos = line.size();
    for (int f = 0; f < 5; ++f) {
      const auto comma = line.rfind(',', pos - 1);
      if (comma == std::string::npos) {
        throw ParseError(dir.string() + "/traces.csv line " + std::to_string(line_no) +
                         ": expected 6 fields");
      }
      fields.push_back(line.substr(comma + 1, pos - comma - 1));
      pos = comma;
    }
    const std::string id = line.substr(0, pos);
    try {
      const auto restart = static_cast<std::size_t>(std::stoull(fields[4]));
      TraceStep s{static_cast<std::size_t>(std::stoull(fields[3])), std::stod(fields[2]),
                  std::stod(fields[1]), std::stod(fields[0])};
      auto& per = run.traces[id];
      if (per.size() <= restart) per.resize(restart + 1);
      per[restart].push_back(s);
    } catch (const std::exception&) {
      throw ParseError(dir.string() + "/traces.csv line " + std::to_string(line_no) +
                       ": malformed number");
    }
  }
  return run;
}

// Restarts laid end to end: cumulative (step, seconds, best) samples.
std::vector<TraceStep> concatenate(const std::vector<std::vector<TraceStep>>& restarts) {
  std::vector<TraceStep> out;
  std::size_t step_offset = 0;
  double time_offset = 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& trace : restarts) {
    for (const auto& s : trace) {
      best = std::min(best, s.best);
      out.push_back({step_offset + s.step, s.cost, best, time_offset + s.seconds});
    }
    if (!trace.empty()) {
      step_offset += trace.back().step + 1;
      time_offset += trace.back().seconds;
    }
  }
  return out;
}

double best_at_step(const std::vector<TraceStep>& t, double step) {
  double best = t.front().best;
  for (const auto& s : t) {
    if (static_cast<double>(s.step) > step) break;
    best = s.best;
  }
  return best;
}

double best_at_time(const std::vector<TraceStep>& t, double seconds) {
  double best = t.front().best;
  for (const auto& s : t) {
    if (s.seconds > seconds) break;
    best = s.best;
  }
  return best;
}

}  // namespace

std::vector<ReportSummary> merge_reports(const std::vector<std::filesystem::path>& run_dirs) {
  if (run_dirs.empty()) throw ConfigError("report needs at least one run directory");
  std::vector<LoadedRun> runs;
  for (const auto& dir : run_dirs) runs.push_back(load_run(dir));
  const std::string digest = runs.front().report.at("dataset").at("digest").get<std::string>();
  for (std::size_t k = 1; k < runs.size(); ++k) {
    const std::string other = runs[k].report.at("dataset").at("digest").get<std::string>();
    if (other != digest) {
      throw InvalidInput("refusing to merge runs over different datasets: " +
                         run_dirs.front().string() + " (" + digest + ") vs " +
                         run_dirs[k].string() + " (" + other + ")");
    }
  }

  std::vector<std::string> order;
  std::map<std::string, std::vector<const LoadedRun*>> groups;
  for (const auto& run : runs) {
    const std::string label = run.report.at("label").get<std::string>();
    if (!groups.count(label)) order.push_back(label);
    groups[label].push_back(&run);
  }

  std::vector<ReportSummary> rows;
  for (const auto& label : order) {
    ReportSummary row;
    row.label = label;
    std::vector<double> costs, gaps, seconds;
    bool all_gaps = true;
    struct Curve {
      std::vector<TraceStep> trace;
      std::optional<double> opt;
    };
    std::vector<Curve> curves;
    for (const LoadedRun* run : groups[label]) {
      ++row.runs;
      for (const auto& inst : run->report.at("instances")) {
        const std::string id = inst.at("id").get<std::string>();
        costs.push_back(inst.at("best_cost").get<double>());
        seconds.push_back(inst.at("seconds").get<double>());
        const auto gap = optional_from(inst, "gap");
        if (gap) gaps.push_back(*gap);
        else all_gaps = false;
        const auto it = run->traces.find(id);
        if (it != run->traces.end()) {
          Curve c{concatenate(it->second), optional_from(inst, "opt_cost")};
          if (!c.trace.empty()) curves.push_back(std::move(c));
        }
      }
    }
    row.instances = costs.size();
    row.mean_cost = mean_of(costs);
    if (all_gaps && !gaps.empty()) row.mean_gap = mean_of(gaps);
    row.mean_seconds = mean_of(seconds);

    const bool curve_gaps =
        !curves.empty() && std::all_of(curves.begin(), curves.end(), [](const Curve& c) { return c.opt.has_value(); });
    std::size_t max_step = 0;
    double max_seconds = 0.0;
    for (const auto& c : curves) {
      max_step = std::max(max_step, c.trace.back().step);
      max_seconds = std::max(max_seconds, c.trace.back().seconds);
    }
    const auto sample = [&](double x, bool by_time) {
      AnytimePoint p;
      p.x = x;
      double cost_sum = 0.0, gap_sum = 0.0;
      for (const auto& c : curves) {
        const double best = by_time ? best_at_time(c.trace, x) : best_at_step(c.trace, x);
        cost_sum += best;
        if (curve_gaps) gap_sum += optimality_gap(best, *c.opt);
      }
      const auto count = static_cast<double>(curves.size());
      p.mean_best_cost = cost_sum / count;
      if (curve_gaps) p.mean_gap = gap_sum / count;
      return p;
    };
    if (!curves.empty()) {
      for (std::size_t s = 0; s <= max_step; ++s) row.by_step.push_back(sample(static_cast<double>(s), false));
      for (std::size_t k = 0; k < kSecondsGridPoints; ++k) {
        const double t = max_seconds * static_cast<double>(k) / static_cast<double>(kSecondsGridPoints - 1);
        row.by_seconds.push_back(sample(t, true));
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string anytime_csv(const std::vector<ReportSummary>& rows, bool by_seconds) {
  std::ostringstream out;
  out.precision(12);
  out << "label," << (by_seconds ? "seconds" : "step") << ",mean_best_cost,mean_gap\n";
  for (const auto& row : rows) {
    for (const auto& p : by_seconds ? row.by_seconds : row.by_step) {
      out << '"' << row.label << "\"," << p.x << ',' << p.mean_best_cost << ',';
      if (p.mean_gap) out << *p.mean_gap;
      out << '\n';
    }
  }
  return out.str();
}

std::string markdown_table(const std::vector<ReportSummary>& rows) {
  std::ostringstream out;
  out << "| Method | Runs | Instances | Cost | Gap | Time (s) |\n"
      << "|---|---:|---:|---:|---:|---:|\n";
  for (const auto& row : rows) {
    out << "| " << row.label << " | " << row.runs << " | " << row.instances << " | "
        << format_fixed(row.mean_cost, 4) << " | "
        << (row.mean_gap ? format_fixed(*row.mean_gap, 3) + "%" : std::string("-")) << " | "
        << format_fixed(row.mean_seconds, 4) << " |\n";
  }
  return out.str();
}

void write_summary(const std::filesystem::path& out, const std::vector<ReportSummary>& rows) {
  std::filesystem::create_directories(out);
  write_file(out / "anytime_steps.csv", anytime_csv(rows, false));
  write_file(out / "anytime_seconds.csv", anytime_csv(rows, true));
  write_file(out / "table.md", markdown_table(rows));
}

double sample_std(const std::vector<double>& values) {
  if (values.size() < 2) return 0.0;
  const double m = mean_of(values);
  double sq = 0.0;
  for (double v : values) sq += (v - m) * (v - m);
  return std::sqrt(sq / static_cast<double>(values.size() - 1));
}

json VariabilityResult::to_json() const {
  return json{{"label", label},
              {"checkpoint_means", checkpoint_means},
              {"seed_means", seed_means},
              {"mean_cost", mean_cost},
              {"training_std", training_std},
              {"inference_std", inference_std}};
}

std::string VariabilityResult::markdown() const {
  std::ostringstream out;
  out << "| Method | Mean cost | Training std | Inference std |\n"
      << "|---|---:|---:|---:|\n"
      << "| " << label << " | " << format_fixed(mean_cost, 4) << " | "
      << format_fixed(training_std, 6) << " | " << format_fixed(inference_std, 6) << " |\n";
  return out.str();
}

VariabilityResult run_variability(const RunSpec& base,
                                  const std::vector<std::filesystem::path>& checkpoints,
                                  std::size_t inference_seeds) {
  const bool neural = base.method == Method::kNico;
  if (neural && checkpoints.empty()) throw ConfigError("variability needs at least one checkpoint");
  if (inference_seeds < 1) throw ConfigError("variability needs at least one inference seed");
  const std::vector<Instance> instances = load_dataset(base.dataset);
  if (instances.empty()) throw InvalidInput("dataset '" + base.dataset.string() + "' is empty");
  std::vector<std::vector<Tour>> tours;
  if (base.refinement()) {
    tours = match_initial_tours(instances, load_tours(base.initial_tours), base.restarts);
  }
  const auto* initial = base.refinement() ? &tours : nullptr;

  VariabilityResult result;
  result.label = base.display_label();
  std::vector<Policy> policies;
  if (neural) {
    for (const auto& path : checkpoints) policies.push_back(policy_from_checkpoint(load_checkpoint(path)));
  }
  const std::size_t models = neural ? policies.size() : 1;
  for (std::size_t c = 0; c < models; ++c) {
    RunSpec spec = base;
    if (neural) spec.checkpoint = checkpoints[c];
    result.checkpoint_means.push_back(
        run_improvement(spec, instances, neural ? &policies[c] : nullptr, initial).mean_cost());
  }
  for (std::size_t s = 0; s < inference_seeds; ++s) {
    RunSpec spec = base;
    spec.seed = base.seed + s;
    if (neural) spec.checkpoint = checkpoints.front();
    if (s == 0) {
      result.seed_means.push_back(result.checkpoint_means.front());
      continue;
    }
    result.seed_means.push_back(
        run_improvement(spec, instances, neural ? &policies.front() : nullptr, initial).mean_cost());
  }
  result.mean_cost = mean_of(result.checkpoint_means);
  result.training_std = sample_std(result.checkpoint_means);
  result.inference_std = sample_std(result.seed_means);
  return result;
}

std::vector<Instance> generate_dataset(std::size_t n, std::size_t count, std::uint64_t seed,
                                       bool with_optimum, std::size_t threads) {
  if (n < 3) throw ConfigError("n must be >= 3");
  if (with_optimum && n > kAnnotateOptimumMaxN) {
    throw ConfigError("--with-optimum supports n <= " + std::to_string(kAnnotateOptimumMaxN));
  }
  std::vector<Instance> out(count);
  parallel_for(count, threads, [&](std::size_t k) {
    Instance inst = generate_uniform(n, seed, k);
    if (with_optimum) inst = inst.with_opt_cost(exact_optimum(inst).cost);
    out[k] = std::move(inst);
  });
  return out;
}

}  // namespace nico
