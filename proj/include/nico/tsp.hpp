#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace nico {

struct Point {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point&) const = default;
};

// Euclidean TSP instance. Immutable after construction. Distances are
// computed from coordinates on demand; instances above kDistanceCacheThreshold
// cities precompute the full matrix once.
class Instance {
 public:
  static constexpr std::size_t kDistanceCacheThreshold = 512;

  Instance() = default;
  explicit Instance(std::vector<Point> coords, std::string id = {},
                    std::optional<double> opt_cost = std::nullopt);

  std::size_t size() const { return coords_.size(); }
  const std::string& id() const { return id_; }
  const std::vector<Point>& coords() const { return coords_; }
  const Point& coord(std::size_t city) const { return coords_[city]; }
  std::optional<double> opt_cost() const { return opt_cost_; }

  double distance(std::size_t a, std::size_t b) const {
    if (cache_) return (*cache_)[a * coords_.size() + b];
    const double dx = coords_[a].x - coords_[b].x;
    const double dy = coords_[a].y - coords_[b].y;
    return std::sqrt(dx * dx + dy * dy);
  }

  Instance with_opt_cost(double cost) const;

 private:
  std::vector<Point> coords_;
  std::string id_;
  std::optional<double> opt_cost_;
  std::shared_ptr<const std::vector<double>> cache_;
};

// City order of a Hamiltonian cycle, 0-based city indices.
using Tour = std::vector<int>;

// 2-opt move over 0-based tour positions: removes edges (t[i], t[i+1]) and
// (t[j], t[j+1 mod n]) and reverses positions i+1..j.
struct TwoOptMove {
  int i = -1;
  int j = -1;
  bool valid() const { return i >= 0 && j >= 0; }
  auto operator<=>(const TwoOptMove&) const = default;
};

bool is_feasible(TwoOptMove move, std::size_t n);
bool is_permutation_tour(std::span<const int> tour, std::size_t n);
void validate_tour(const Instance& instance, std::span<const int> tour);

double tour_cost(const Instance& instance, std::span<const int> tour);

// All feasible moves for an n-city tour in lexicographic (i, j) order.
std::vector<TwoOptMove> feasible_moves(std::size_t n);

Tour apply_two_opt(std::span<const int> tour, TwoOptMove move);
void apply_two_opt_inplace(Tour& tour, TwoOptMove move);

double two_opt_delta(const Instance& instance, std::span<const int> tour, TwoOptMove move);

// Same as two_opt_delta without feasibility checks; callers guarantee it.
inline double two_opt_delta_unchecked(const Instance& instance, std::span<const int> tour,
                                      int i, int j) {
  const std::size_t n = tour.size();
  const int a = tour[i];
  const int b = tour[i + 1];
  const int c = tour[j];
  const int d = tour[(static_cast<std::size_t>(j) + 1) % n];
  return instance.distance(a, c) + instance.distance(b, d) - instance.distance(a, b) -
         instance.distance(c, d);
}

// Uniform instance on the unit square. `index` selects an independent stream
// so batches can be generated in any order.
Instance generate_uniform(std::size_t n, std::uint64_t seed, std::uint64_t index = 0);

Tour random_tour(std::size_t n, std::uint64_t seed, std::uint64_t index = 0);

class Rng;
Tour random_tour(std::size_t n, Rng& rng);

struct ExactSolution {
  double cost = 0.0;
  Tour tour;
};

inline constexpr std::size_t kExactOptimumMaxN = 16;

// Held-Karp dynamic programming. Throws SizeLimitError above kExactOptimumMaxN.
ExactSolution exact_optimum(const Instance& instance);

}  // namespace nico
