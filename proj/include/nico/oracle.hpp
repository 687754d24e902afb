#pragma once

#include <cstddef>
#include <vector>

#include "nico/state.hpp"
#include "nico/tsp.hpp"

namespace nico {

inline constexpr double kOracleTieTolerance = 1e-9;
inline constexpr double kOracleEnumerationBudget = 1e7;

struct OracleResult {
  std::vector<TwoOptMove> optimal_actions;  // sorted, deduplicated
  double best_final_cost = 0.0;
  std::vector<TwoOptMove> witness;  // lexicographically first optimal sequence
};

// Exhaustive search over every feasible K-move sequence, scored by the final
// tour cost. Sequences need not improve at intermediate steps.
OracleResult k_step_lookahead(const Instance& instance, std::span<const int> tour,
                              std::size_t depth);

struct OracleStep {
  Tour tour;
  HistoryBuffer history;
  std::vector<TwoOptMove> optimal_actions;
};

// Records (state, optimal set) pairs while following the witness's first move.
std::vector<OracleStep> oracle_rollout(const SearchState& start, std::size_t depth,
                                       std::size_t steps);

}  // namespace nico
