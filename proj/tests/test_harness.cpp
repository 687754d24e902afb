#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "nico/error.hpp"
#include "nico/harness.hpp"
#include "nico/io.hpp"
#include "nico/rng.hpp"

using namespace nico;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("nico_harness_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

double brute_force(const Instance& inst) {
  const int n = static_cast<int>(inst.size());
  std::vector<int> perm(n - 1);
  std::iota(perm.begin(), perm.end(), 1);
  double best = INFINITY;
  do {
    double c = inst.distance(0, perm.front()) + inst.distance(perm.back(), 0);
    for (int k = 0; k + 1 < n - 1; ++k) c += inst.distance(perm[k], perm[k + 1]);
    best = std::min(best, c);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

RunSpec spec_for(Method method, std::size_t restarts = 1) {
  RunSpec s;
  s.method = method;
  s.restarts = restarts;
  s.seed = 3;
  s.init_seed = 4;
  return s;
}

}  // namespace

TEST_CASE("dataset generation is deterministic and optima are exact") {
  const auto a = generate_dataset(9, 3, 11, true);
  const auto b = generate_dataset(9, 3, 11, true, 2);
  REQUIRE(a.size() == 3);
  CHECK(dataset_digest(a) == dataset_digest(b));
  CHECK(dataset_digest(a) != dataset_digest(generate_dataset(9, 3, 12, true)));
  for (const auto& inst : a) {
    REQUIRE(inst.opt_cost().has_value());
    CHECK(std::abs(*inst.opt_cost() - brute_force(inst)) < 1e-9);
  }
  CHECK_THROWS_AS(generate_dataset(20, 1, 0, true), ConfigError);
  CHECK_THROWS_AS(generate_dataset(2, 1, 0, false), ConfigError);
}

TEST_CASE("more restarts never hurt") {
  const auto data = generate_dataset(30, 6, 21, false);
  for (Method m : {Method::kGreedy2Opt, Method::kRandomPolicy}) {
    const Report one = run_improvement(spec_for(m, 1), data, nullptr);
    const Report eight = run_improvement(spec_for(m, 8), data, nullptr);
    for (std::size_t k = 0; k < data.size(); ++k) {
      CHECK(eight.instances[k].restarts.front().best_cost == one.instances[k].best_cost);
      CHECK(eight.instances[k].best_cost <= one.instances[k].best_cost);
      CHECK(eight.instances[k].start_cost <= one.instances[k].start_cost);
    }
  }
}

TEST_CASE("random policy traces") {
  const auto data = generate_dataset(15, 2, 5, false);
  RunSpec s = spec_for(Method::kRandomPolicy);
  s.budget = 40;
  const Report r = run_improvement(s, data, nullptr);
  for (std::size_t k = 0; k < data.size(); ++k) {
    const auto& trace = r.instances[k].restarts.front().trace;
    REQUIRE(trace.steps.size() == 41);
    double best = trace.steps.front().cost;
    for (std::size_t t = 0; t < trace.steps.size(); ++t) {
      CHECK(trace.steps[t].step == t);
      best = std::min(best, trace.steps[t].cost);
      CHECK(trace.steps[t].best == best);
    }
    CHECK(r.instances[k].best_cost == best);
    CHECK(std::abs(tour_cost(data[k], r.instances[k].best_tour) - best) < 1e-9);
    CHECK(is_permutation_tour(r.instances[k].best_tour, 15));
  }
}

TEST_CASE("refinement starts from the given tours") {
  const auto data = generate_dataset(40, 5, 8, false);
  const Report greedy = run_improvement(spec_for(Method::kGreedy2Opt), data, nullptr);
  std::vector<std::vector<Tour>> tours;
  for (const auto& i : greedy.instances) tours.push_back({i.best_tour});

  const Report refined = run_improvement(spec_for(Method::kTabu), data, nullptr, &tours);
  const Report cold = run_improvement(spec_for(Method::kRandomPolicy), data, nullptr);
  const Report warm = run_improvement(spec_for(Method::kRandomPolicy), data, nullptr, &tours);
  for (std::size_t k = 0; k < data.size(); ++k) {
    CHECK(refined.instances[k].start_cost == doctest::Approx(greedy.instances[k].best_cost));
    CHECK(refined.instances[k].best_cost <= greedy.instances[k].best_cost + 1e-12);
    CHECK(warm.instances[k].best_cost <= greedy.instances[k].best_cost + 1e-12);
  }
  CHECK(warm.mean_cost() < cold.mean_cost());
  CHECK(refined.spec["refinement"].get<bool>());

  // Tour files are matched by id.
  std::vector<TourRecord> records;
  for (std::size_t k = 0; k < data.size(); ++k) records.push_back({data[k].id(), tours[k][0], 0.0});
  std::reverse(records.begin(), records.end());
  const auto matched = match_initial_tours(data, records, 1);
  for (std::size_t k = 0; k < data.size(); ++k) CHECK(matched[k][0] == tours[k][0]);
  records.pop_back();
  CHECK_THROWS_AS(match_initial_tours(data, records, 1), InvalidInput);
}

TEST_CASE("variability of deterministic methods") {
  const auto dir = temp_dir("variability");
  const auto data = generate_dataset(20, 3, 2, false);
  write_dataset(dir / "d.jsonl", data);
  RunSpec s = spec_for(Method::kGreedy2Opt);
  s.dataset = dir / "d.jsonl";
  const VariabilityResult v = run_variability(s, {}, 4);
  CHECK(v.seed_means.size() == 4);
  CHECK(v.checkpoint_means.size() == 1);
  CHECK(v.training_std == 0.0);
  CHECK(v.inference_std == 0.0);

  RunSpec r = spec_for(Method::kRandomPolicy);
  r.dataset = s.dataset;
  const VariabilityResult rv = run_variability(r, {}, 3);
  CHECK(rv.inference_std > 0.0);
  CHECK(sample_std({1.0, 3.0}) == doctest::Approx(std::sqrt(2.0)));
  CHECK(sample_std({5.0}) == 0.0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("report merging") {
  const auto dir = temp_dir("report");
  const auto data = generate_dataset(10, 4, 6, true);
  RunSpec s = spec_for(Method::kGreedy2Opt);
  s.dataset = dir / "d.jsonl";
  const Report g = run_improvement(s, data, nullptr);
  write_run(dir / "g", g);

  const auto rows = merge_reports({dir / "g"});
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].label == "greedy2opt");
  CHECK(rows[0].instances == 4);
  CHECK(rows[0].mean_cost == doctest::Approx(g.mean_cost()).epsilon(1e-12));
  REQUIRE(rows[0].mean_gap.has_value());
  CHECK(*rows[0].mean_gap == doctest::Approx(*g.mean_gap()).epsilon(1e-12));
  CHECK(rows[0].by_seconds.size() == 101);
  CHECK(rows[0].by_step.back().mean_best_cost == doctest::Approx(g.mean_cost()).epsilon(1e-12));

  // Two runs under one label average over both.
  RunSpec s2 = s;
  s2.init_seed = 99;
  const Report g2 = run_improvement(s2, data, nullptr);
  write_run(dir / "g2", g2);
  const auto merged = merge_reports({dir / "g", dir / "g2"});
  REQUIRE(merged.size() == 1);
  CHECK(merged[0].runs == 2);
  CHECK(merged[0].mean_cost == doctest::Approx((g.mean_cost() + g2.mean_cost()) / 2).epsilon(1e-12));

  // Gap is zero at the optimum.
  CHECK(optimality_gap(5.0, 5.0) == 0.0);
  CHECK(optimality_gap(5.5, 5.0) == doctest::Approx(10.0));

  // Different datasets are refused.
  const Report other = run_improvement(s, generate_dataset(10, 4, 7, false), nullptr);
  write_run(dir / "o", other);
  CHECK_THROWS_AS(merge_reports({dir / "g", dir / "o"}), InvalidInput);

  write_summary(dir / "summary", merged);
  CHECK(std::filesystem::exists(dir / "summary" / "table.md"));
  CHECK(std::filesystem::exists(dir / "summary" / "anytime_steps.csv"));
  CHECK(read_file(dir / "summary" / "table.md").find("greedy2opt") != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("runs are deterministic apart from timing") {
  const auto data = generate_dataset(25, 3, 9, false);
  for (Method m : {Method::kGreedy3Opt, Method::kTabu, Method::kRandomPolicy}) {
    RunSpec s = spec_for(m, 2);
    s.threads = 1;
    const Report a = run_improvement(s, data, nullptr);
    s.threads = 3;
    const Report b = run_improvement(s, data, nullptr);
    for (std::size_t k = 0; k < data.size(); ++k) {
      CHECK(a.instances[k].best_tour == b.instances[k].best_tour);
      for (std::size_t r = 0; r < 2; ++r) {
        const auto& ta = a.instances[k].restarts[r].trace.steps;
        const auto& tb = b.instances[k].restarts[r].trace.steps;
        REQUIRE(ta.size() == tb.size());
        for (std::size_t t = 0; t < ta.size(); ++t) CHECK(ta[t].cost == tb[t].cost);
      }
    }
  }
}

TEST_CASE("run settings validation") {
  RunSpec s;
  s.restarts = 0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  CHECK_THROWS_AS(parse_method("simulated-annealing"), ConfigError);
  CHECK(parse_method("tabu") == Method::kTabu);
  CHECK(spec_for(Method::kGreedy2Opt).budget_for(50) == 500);
  const auto data = generate_dataset(10, 1, 0, false);
  CHECK_THROWS_AS(run_improvement(spec_for(Method::kNico), data, nullptr), ConfigError);
}
