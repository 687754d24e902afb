#include "nico/features.hpp"

#include <algorithm>
#include <cmath>

#include "nico/error.hpp"

namespace nico {

void HistoryBuffer::push(TwoOptMove move) {
  if (slots_.empty()) return;
  std::rotate(slots_.begin(), slots_.begin() + 1, slots_.end());
  slots_.back() = move;
  count_ = std::min(count_ + 1, slots_.size());
}

void HistoryBuffer::clear() {
  std::fill(slots_.begin(), slots_.end(), TwoOptMove{});
  count_ = 0;
}

std::vector<TwoOptMove> HistoryBuffer::entries() const {
  return {slots_.end() - static_cast<std::ptrdiff_t>(count_), slots_.end()};
}

std::vector<TwoOptMove> HistoryBuffer::recent(std::size_t m) const {
  const std::size_t take = std::min(m, count_);
  return {slots_.end() - static_cast<std::ptrdiff_t>(take), slots_.end()};
}

std::vector<std::pair<int, int>> edge_sequence(std::span<const int> tour) {
  const std::size_t n = tour.size();
  std::vector<std::pair<int, int>> edges(n);
  for (std::size_t k = 0; k < n; ++k) edges[k] = {tour[k], tour[(k + 1) % n]};
  return edges;
}

std::vector<double> history_frequency(const HistoryBuffer& history, std::size_t n) {
  std::vector<double> freq(n, 0.0);
  std::size_t endpoints = 0;
  for (const TwoOptMove& move : history.entries()) {
    for (int p : {move.i, move.j}) {
      if (p < 0 || static_cast<std::size_t>(p) >= n) continue;
      freq[p] += 1.0;
      ++endpoints;
    }
  }
  if (endpoints == 0) return freq;
  for (double& f : freq) f /= static_cast<double>(endpoints);
  return freq;
}

nn::Matrix compute_features(const Instance& instance, std::span<const int> tour,
                            const HistoryBuffer& history) {
  const std::size_t n = tour.size();
  if (n < 4) throw InvalidInput("compute_features needs n >= 4");
  if (n != instance.size()) throw InvalidInput("tour length does not match instance size");

  namespace col = feature_col;
  constexpr double eps = kFeatureEps;
  nn::Matrix f(n, col::kCount);

  // Displacement of edge k: x[t[k+1]] - x[t[k]].
  std::vector<double> dx(n), dy(n), len(n);
  for (std::size_t k = 0; k < n; ++k) {
    const Point& u = instance.coord(tour[k]);
    const Point& v = instance.coord(tour[(k + 1) % n]);
    dx[k] = v.x - u.x;
    dy[k] = v.y - u.y;
    len[k] = std::sqrt(dx[k] * dx[k] + dy[k] * dy[k]);
  }

  double mean = 0.0;
  for (double d : len) mean += d;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double d : len) var += (d - mean) * (d - mean);
  const double sigma = std::sqrt(var / static_cast<double>(n));

  const auto hist = history_frequency(history, n);

  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t prev = (k + n - 1) % n;
    const std::size_t next = (k + 1) % n;
    const Point& u = instance.coord(tour[k]);
    const Point& v = instance.coord(tour[next]);

    // a = incoming edge at u, b = this edge, c = outgoing edge at v.
    const double ax = dx[prev], ay = dy[prev], al = len[prev];
    const double bx = dx[k], by = dy[k], bl = len[k];
    const double cx = dx[next], cy = dy[next], cl = len[next];

    const double denom_u = std::max(al * bl, eps);
    const double denom_v = std::max(bl * cl, eps);
    const double inv_len = 1.0 / std::max(bl, eps);

    f(k, col::kUx) = u.x;
    f(k, col::kUy) = u.y;
    f(k, col::kVx) = v.x;
    f(k, col::kVy) = v.y;
    f(k, col::kLength) = bl;
    f(k, col::kDirX) = bx * inv_len;
    f(k, col::kDirY) = by * inv_len;
    f(k, col::kCosU) = (ax * bx + ay * by) / denom_u;
    f(k, col::kSinU) = (ax * by - ay * bx) / denom_u;
    f(k, col::kCosV) = (bx * cx + by * cy) / denom_v;
    f(k, col::kSinV) = (bx * cy - by * cx) / denom_v;
    f(k, col::kRelLen) = bl / std::max(0.5 * (al + cl), eps);
    f(k, col::kZScore) = (bl - mean) / std::max(sigma, eps);
    f(k, col::kHistory) = hist[k];
  }
  return f;
}

}  // namespace nico
