#include "nico/oracle.hpp"

#include <cmath>
#include <limits>

#include "nico/error.hpp"

namespace nico {

namespace {

class Enumerator {
 public:
  Enumerator(const Instance& instance, Tour tour, std::size_t depth)
      : instance_(instance), tour_(std::move(tour)), depth_(depth),
        moves_(feasible_moves(tour_.size())) {}

  const std::vector<TwoOptMove>& moves() const { return moves_; }

  // Minimum final cost over all continuations of length `remaining`.
  double best_from(double cost, std::size_t remaining) {
    if (remaining == 0) return cost;
    double best = std::numeric_limits<double>::infinity();
    for (const TwoOptMove& m : moves_) {
      const double next = cost + two_opt_delta_unchecked(instance_, tour_, m.i, m.j);
      apply_two_opt_inplace(tour_, m);
      best = std::min(best, best_from(next, remaining - 1));
      apply_two_opt_inplace(tour_, m);
    }
    return best;
  }

  // First sequence in lexicographic order whose final cost is within `bound`.
  bool find_first(double cost, std::size_t remaining, double bound,
                  std::vector<TwoOptMove>& path) {
    if (remaining == 0) return cost <= bound;
    for (const TwoOptMove& m : moves_) {
      const double next = cost + two_opt_delta_unchecked(instance_, tour_, m.i, m.j);
      apply_two_opt_inplace(tour_, m);
      path.push_back(m);
      const bool found = find_first(next, remaining - 1, bound, path);
      apply_two_opt_inplace(tour_, m);
      if (found) return true;
      path.pop_back();
    }
    return false;
  }

  Tour& tour() { return tour_; }
  std::size_t depth() const { return depth_; }

 private:
  const Instance& instance_;
  Tour tour_;
  std::size_t depth_;
  std::vector<TwoOptMove> moves_;
};

}  // namespace

OracleResult k_step_lookahead(const Instance& instance, std::span<const int> tour,
                              std::size_t depth) {
  if (depth == 0) throw InvalidInput("lookahead depth must be >= 1");
  const std::size_t n = tour.size();
  if (n < 4) throw InvalidInput("lookahead needs n >= 4");
  const double per_step = static_cast<double>(n * (n - 3) / 2);
  const double sequences = std::pow(per_step, static_cast<double>(depth));
  if (sequences > kOracleEnumerationBudget) {
    throw SizeLimitError("lookahead would enumerate " + std::to_string(sequences) +
                         " sequences; bound is (n(n-3)/2)^K <= 1e7 (n = " + std::to_string(n) +
                         ", K = " + std::to_string(depth) + ")");
  }

  const double start_cost = tour_cost(instance, tour);
  Enumerator search(instance, Tour(tour.begin(), tour.end()), depth);

  std::vector<double> best_after;
  best_after.reserve(search.moves().size());
  double best = std::numeric_limits<double>::infinity();
  for (const TwoOptMove& m : search.moves()) {
    const double next =
        start_cost + two_opt_delta_unchecked(instance, search.tour(), m.i, m.j);
    apply_two_opt_inplace(search.tour(), m);
    const double value = search.best_from(next, depth - 1);
    apply_two_opt_inplace(search.tour(), m);
    best_after.push_back(value);
    best = std::min(best, value);
  }

  OracleResult result;
  result.best_final_cost = best;
  const double bound = best + kOracleTieTolerance;
  for (std::size_t k = 0; k < best_after.size(); ++k) {
    if (best_after[k] <= bound) result.optimal_actions.push_back(search.moves()[k]);
  }
  search.find_first(start_cost, depth, bound, result.witness);
  return result;
}

std::vector<OracleStep> oracle_rollout(const SearchState& start, std::size_t depth,
                                       std::size_t steps) {
  std::vector<OracleStep> out;
  out.reserve(steps);
  SearchState state = start;
  for (std::size_t t = 0; t < steps; ++t) {
    OracleResult result = k_step_lookahead(*state.instance, state.tour, depth);
    out.push_back({state.tour, state.history, result.optimal_actions});
    state.apply(result.witness.front());
  }
  return out;
}

}  // namespace nico
