#pragma once

#include <chrono>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "nico/tsp.hpp"

namespace nico {

enum class TerminalReason { kBudget, kLocalOptimum, kTimeLimit };
std::string to_string(TerminalReason reason);

struct TraceStep {
  std::size_t step = 0;
  double cost = 0.0;
  double best = 0.0;
  double seconds = 0.0;
};

// Step 0 is the start tour; one row per executed move afterwards.
struct AnytimeTrace {
  std::vector<TraceStep> steps;
  TerminalReason reason = TerminalReason::kBudget;

  std::string to_csv() const;  // header: step,cost,best,seconds
};

struct SearchLimits {
  std::size_t step_budget = 1;
  double time_limit_seconds = std::numeric_limits<double>::infinity();
};

struct SearchResult {
  Tour best_tour;
  double best_cost = 0.0;
  Tour final_tour;
  AnytimeTrace trace;
};

// Records the anytime trace against a monotonic clock started at construction.
class TraceRecorder {
 public:
  TraceRecorder(std::span<const int> start, double start_cost);

  void record(std::span<const int> tour, double cost);
  double elapsed() const;
  std::size_t steps_taken() const { return result_.trace.steps.size() - 1; }
  bool exhausted(const SearchLimits& limits) const;
  SearchResult finish(std::span<const int> final_tour, TerminalReason reason);
  double best_cost() const { return result_.best_cost; }

 private:
  std::chrono::steady_clock::time_point start_;
  SearchResult result_;
};

// Best-improvement 2-opt descent with lexicographic (i, j) tie-break.
SearchResult greedy_two_opt(const Instance& instance, std::span<const int> start,
                            const SearchLimits& limits);

// One 3-opt reconnection: cut positions i < j < k and reconnection type 1..7.
struct ThreeOptMove {
  int i = -1;
  int j = -1;
  int k = -1;
  int type = 0;
  auto operator<=>(const ThreeOptMove&) const = default;
};

double three_opt_delta(const Instance& instance, std::span<const int> tour, ThreeOptMove move);
Tour apply_three_opt(std::span<const int> tour, ThreeOptMove move);

inline constexpr std::size_t kThreeOptDefaultMaxN = 500;

// Best-improvement 3-opt descent over all cut triples and the 7 reconnections.
SearchResult greedy_three_opt(const Instance& instance, std::span<const int> start,
                              const SearchLimits& limits,
                              std::size_t max_n = kThreeOptDefaultMaxN);

struct TabuOptions {
  std::size_t tenure = 8;
  bool aspiration = true;
};

// Best admissible 2-opt move each step, improving or not. Executed moves
// stay tabu for `tenure` steps (undirected position pair).
SearchResult tabu_search(const Instance& instance, std::span<const int> start,
                         const SearchLimits& limits, const TabuOptions& options = {});

}  // namespace nico
