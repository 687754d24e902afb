#include "nico/tsp.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "nico/error.hpp"
#include "nico/rng.hpp"

namespace nico {

Instance::Instance(std::vector<Point> coords, std::string id, std::optional<double> opt_cost)
    : coords_(std::move(coords)), id_(std::move(id)), opt_cost_(opt_cost) {
  const std::size_t n = coords_.size();
  if (n > kDistanceCacheThreshold) {
    auto matrix = std::make_shared<std::vector<double>>(n * n);
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = 0; b < n; ++b) {
        const double dx = coords_[a].x - coords_[b].x;
        const double dy = coords_[a].y - coords_[b].y;
        (*matrix)[a * n + b] = std::sqrt(dx * dx + dy * dy);
      }
    }
    cache_ = std::move(matrix);
  }
}

Instance Instance::with_opt_cost(double cost) const {
  Instance copy = *this;
  copy.opt_cost_ = cost;
  return copy;
}

bool is_feasible(TwoOptMove move, std::size_t n) {
  const auto i = static_cast<long>(move.i);
  const auto j = static_cast<long>(move.j);
  const auto sn = static_cast<long>(n);
  if (n < 4 || i < 0 || j >= sn || j < i + 2) return false;
  return !(i == 0 && j == sn - 1);
}

bool is_permutation_tour(std::span<const int> tour, std::size_t n) {
  if (tour.size() != n) return false;
  std::vector<char> seen(n, 0);
  for (int city : tour) {
    if (city < 0 || static_cast<std::size_t>(city) >= n || seen[city]) return false;
    seen[city] = 1;
  }
  return true;
}

void validate_tour(const Instance& instance, std::span<const int> tour) {
  if (instance.size() < 3) {
    throw InvalidInput("instance needs at least 3 cities, got " +
                       std::to_string(instance.size()));
  }
  if (tour.size() != instance.size()) {
    throw InvalidInput("tour length " + std::to_string(tour.size()) +
                       " does not match instance size " + std::to_string(instance.size()));
  }
  if (!is_permutation_tour(tour, instance.size())) {
    throw InvalidInput("tour is not a permutation of the instance cities");
  }
}

double tour_cost(const Instance& instance, std::span<const int> tour) {
  validate_tour(instance, tour);
  const std::size_t n = tour.size();
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) total += instance.distance(tour[k], tour[(k + 1) % n]);
  return total;
}

std::vector<TwoOptMove> feasible_moves(std::size_t n) {
  std::vector<TwoOptMove> moves;
  if (n < 4) return moves;
  moves.reserve(n * (n - 3) / 2);
  const int sn = static_cast<int>(n);
  for (int i = 0; i < sn; ++i) {
    for (int j = i + 2; j < sn; ++j) {
      if (i == 0 && j == sn - 1) continue;
      moves.push_back({i, j});
    }
  }
  return moves;
}

namespace {

void require_feasible(TwoOptMove move, std::size_t n) {
  if (!is_feasible(move, n)) {
    throw InvalidMove("infeasible 2-opt move (" + std::to_string(move.i) + ", " +
                      std::to_string(move.j) + ") for tour of length " + std::to_string(n));
  }
}

}  // namespace

void apply_two_opt_inplace(Tour& tour, TwoOptMove move) {
  require_feasible(move, tour.size());
  std::reverse(tour.begin() + move.i + 1, tour.begin() + move.j + 1);
}

Tour apply_two_opt(std::span<const int> tour, TwoOptMove move) {
  Tour out(tour.begin(), tour.end());
  apply_two_opt_inplace(out, move);
  return out;
}

double two_opt_delta(const Instance& instance, std::span<const int> tour, TwoOptMove move) {
  require_feasible(move, tour.size());
  if (tour.size() != instance.size()) {
    throw InvalidInput("tour length does not match instance size");
  }
  return two_opt_delta_unchecked(instance, tour, move.i, move.j);
}

Instance generate_uniform(std::size_t n, std::uint64_t seed, std::uint64_t index) {
  Rng rng = Rng::keyed(seed, {0x1157ULL, index});
  std::vector<Point> coords(n);
  for (auto& p : coords) {
    p.x = rng.uniform();
    p.y = rng.uniform();
  }
  return Instance(std::move(coords), "unif" + std::to_string(n) + "_s" + std::to_string(seed) +
                                         "_" + std::to_string(index));
}

Tour random_tour(std::size_t n, Rng& rng) {
  Tour tour(n);
  std::iota(tour.begin(), tour.end(), 0);
  for (std::size_t k = n; k > 1; --k) {
    std::swap(tour[k - 1], tour[rng.below(k)]);
  }
  return tour;
}

Tour random_tour(std::size_t n, std::uint64_t seed, std::uint64_t index) {
  Rng rng = Rng::keyed(seed, {0x7041ULL, index});
  return random_tour(n, rng);
}

ExactSolution exact_optimum(const Instance& instance) {
  const std::size_t n = instance.size();
  if (n > kExactOptimumMaxN) {
    throw SizeLimitError("exact_optimum supports n <= " + std::to_string(kExactOptimumMaxN) +
                         ", got n = " + std::to_string(n));
  }
  if (n < 3) throw InvalidInput("exact_optimum needs at least 3 cities");

  // City 0 is the fixed start; subsets range over cities 1..n-1.
  const std::size_t m = n - 1;
  const std::size_t full = (std::size_t{1} << m) - 1;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> best((full + 1) * m, kInf);
  std::vector<std::uint8_t> parent((full + 1) * m, 0xff);

  for (std::size_t last = 0; last < m; ++last) {
    best[(std::size_t{1} << last) * m + last] = instance.distance(0, last + 1);
  }
  for (std::size_t subset = 1; subset <= full; ++subset) {
    for (std::size_t last = 0; last < m; ++last) {
      if (!(subset & (std::size_t{1} << last))) continue;
      const double here = best[subset * m + last];
      if (here == kInf) continue;
      for (std::size_t next = 0; next < m; ++next) {
        if (subset & (std::size_t{1} << next)) continue;
        const std::size_t grown = subset | (std::size_t{1} << next);
        const double candidate = here + instance.distance(last + 1, next + 1);
        if (candidate < best[grown * m + next]) {
          best[grown * m + next] = candidate;
          parent[grown * m + next] = static_cast<std::uint8_t>(last);
        }
      }
    }
  }

  double best_cost = kInf;
  std::size_t best_last = 0;
  for (std::size_t last = 0; last < m; ++last) {
    const double candidate = best[full * m + last] + instance.distance(last + 1, 0);
    if (candidate < best_cost) {
      best_cost = candidate;
      best_last = last;
    }
  }

  Tour reversed;
  std::size_t subset = full;
  std::size_t last = best_last;
  while (true) {
    reversed.push_back(static_cast<int>(last + 1));
    const std::uint8_t prev = parent[subset * m + last];
    subset &= ~(std::size_t{1} << last);
    if (prev == 0xff) break;
    last = prev;
  }
  Tour tour{0};
  tour.insert(tour.end(), reversed.rbegin(), reversed.rend());
  // Recompute in canonical summation order so the cost matches tour_cost bit-for-bit.
  return {tour_cost(instance, tour), std::move(tour)};
}

}  // namespace nico
