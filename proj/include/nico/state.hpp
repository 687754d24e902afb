#pragma once

#include "nico/features.hpp"
#include "nico/tsp.hpp"

namespace nico {

// Instance + current tour + action history. The instance must outlive the state.
struct SearchState {
  const Instance* instance = nullptr;
  Tour tour;
  HistoryBuffer history;
  double cost = 0.0;

  SearchState() = default;
  SearchState(const Instance& inst, Tour start,
              std::size_t history_capacity = HistoryBuffer::kDefaultCapacity)
      : instance(&inst), tour(std::move(start)), history(history_capacity) {
    cost = tour_cost(inst, tour);
  }

  // Applies the move, records it in the history and updates the cost.
  void apply(TwoOptMove move) {
    cost += two_opt_delta(*instance, tour, move);
    apply_two_opt_inplace(tour, move);
    history.push(move);
  }
};

}  // namespace nico
