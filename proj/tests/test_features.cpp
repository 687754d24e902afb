#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "nico/features.hpp"
#include "nico/rng.hpp"

using namespace nico;
namespace col = feature_col;

TEST_CASE("edge sequence wraps around") {
  const auto e = edge_sequence(Tour{0, 1, 2});
  CHECK(e == std::vector<std::pair<int, int>>{{0, 1}, {1, 2}, {2, 0}});
  const Tour t = random_tour(15, 3);
  const auto edges = edge_sequence(t);
  Tour rotated = t;
  std::rotate(rotated.begin(), rotated.begin() + 1, rotated.end());
  for (std::size_t k = 0; k < t.size(); ++k) {
    CHECK(edges[k].first == t[k]);
    CHECK(edges[k].second == rotated[k]);
  }
}

TEST_CASE("history buffer is a FIFO of fixed capacity") {
  HistoryBuffer h(3);
  CHECK(h.empty());
  CHECK(h.slots().size() == 3);
  for (const auto& s : h.slots()) CHECK_FALSE(s.valid());
  for (int k = 0; k < 5; ++k) h.push({k, k + 2});
  CHECK(h.valid_count() == 3);
  CHECK(h.entries() == std::vector<TwoOptMove>{{2, 4}, {3, 5}, {4, 6}});
  CHECK(h.recent(2) == std::vector<TwoOptMove>{{3, 5}, {4, 6}});
  h.clear();
  CHECK(h.entries().empty());
}

TEST_CASE("history frequency counts endpoints") {
  HistoryBuffer h;
  CHECK(history_frequency(h, 10) == std::vector<double>(10, 0.0));
  h.push({2, 6});
  h.push({2, 8});
  const auto f = history_frequency(h, 10);
  for (std::size_t k = 0; k < 10; ++k) {
    const double expected = k == 2 ? 0.5 : (k == 6 || k == 8) ? 0.25 : 0.0;
    CHECK(f[k] == expected);
  }
}

TEST_CASE("straight and left turns") {
  // Collinear equally spaced 0 -> 1 -> 2, then back around.
  const Instance line({{0, 0}, {1, 0}, {2, 0}, {1, 1}});
  const auto f = compute_features(line, Tour{0, 1, 2, 3}, HistoryBuffer{});
  CHECK(f(1, col::kCosU) == doctest::Approx(1.0));
  CHECK(f(1, col::kSinU) == doctest::Approx(0.0));
  // Edge 0 -> 1 along x then 1 -> (1,1) along y: left turn at v of edge 0.
  const Instance corner({{0, 0}, {1, 0}, {1, 1}, {0, 1}});
  const auto g = compute_features(corner, Tour{0, 1, 2, 3}, HistoryBuffer{});
  CHECK(g(0, col::kCosV) == doctest::Approx(0.0));
  CHECK(g(0, col::kSinV) == doctest::Approx(1.0));
  CHECK(g(1, col::kCosU) == doctest::Approx(0.0));
  CHECK(g(1, col::kSinU) == doctest::Approx(1.0));
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(g(k, col::kRelLen) == doctest::Approx(1.0));
    CHECK(g(k, col::kZScore) == doctest::Approx(0.0));
    CHECK(g(k, col::kLength) == doctest::Approx(1.0));
  }
}

TEST_CASE("feature ranges on random states") {
  Rng rng(1);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Instance inst = generate_uniform(25, s);
    const Tour t = random_tour(25, rng);
    HistoryBuffer h;
    for (int k = 0; k < 5; ++k) h.push({static_cast<int>(rng.below(10)), static_cast<int>(10 + rng.below(14))});
    const auto f = compute_features(inst, t, h);
    double hist_sum = 0.0;
    for (std::size_t k = 0; k < 25; ++k) {
      const double cu = f(k, col::kCosU), su = f(k, col::kSinU);
      const double cv = f(k, col::kCosV), sv = f(k, col::kSinV);
      CHECK(std::abs(cu * cu + su * su - 1.0) < 1e-6);
      CHECK(std::abs(cv * cv + sv * sv - 1.0) < 1e-6);
      const double dn = std::hypot(f(k, col::kDirX), f(k, col::kDirY));
      CHECK(std::abs(dn - 1.0) < 1e-6);
      CHECK(f(k, col::kRelLen) > 0.0);
      CHECK(std::isfinite(f(k, col::kZScore)));
      CHECK(f(k, col::kHistory) >= 0.0);
      CHECK(f(k, col::kHistory) <= 1.0);
      hist_sum += f(k, col::kHistory);
    }
    CHECK(hist_sum == doctest::Approx(1.0));
  }
}

TEST_CASE("coincident cities stay finite") {
  const Instance pile({{0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}});
  const auto f = compute_features(pile, Tour{0, 1, 2, 3}, HistoryBuffer{});
  for (double v : f.data) CHECK(std::isfinite(v));
  CHECK(f(0, col::kDirX) == 0.0);
}

TEST_CASE("cyclic shift of the tour shifts the feature rows") {
  const Instance inst = generate_uniform(12, 4);
  const Tour t = random_tour(12, 4);
  const auto base = compute_features(inst, t, HistoryBuffer{});
  for (std::size_t r = 1; r < 12; ++r) {
    Tour shifted = t;
    std::rotate(shifted.begin(), shifted.begin() + static_cast<std::ptrdiff_t>(r), shifted.end());
    const auto f = compute_features(inst, shifted, HistoryBuffer{});
    for (std::size_t k = 0; k < 12; ++k)
      for (std::size_t c = 0; c < col::kCount; ++c)
        CHECK(std::abs(f(k, c) - base((k + r) % 12, c)) < 1e-12);
  }
}

TEST_CASE("translation and rotation invariance") {
  const Instance inst = generate_uniform(15, 8);
  const Tour t = random_tour(15, 8);
  const auto base = compute_features(inst, t, HistoryBuffer{});
  std::vector<Point> moved, turned;
  const double ang = 0.7;
  for (const auto& p : inst.coords()) {
    moved.push_back({p.x + 3.5, p.y - 1.25});
    turned.push_back({std::cos(ang) * p.x - std::sin(ang) * p.y, std::sin(ang) * p.x + std::cos(ang) * p.y});
  }
  const auto ft = compute_features(Instance(moved), t, HistoryBuffer{});
  const auto fr = compute_features(Instance(turned), t, HistoryBuffer{});
  for (std::size_t k = 0; k < 15; ++k) {
    for (std::size_t c = col::kLength; c < col::kCount; ++c) CHECK(std::abs(ft(k, c) - base(k, c)) < 1e-9);
    for (std::size_t c : {col::kLength, col::kCosU, col::kSinU, col::kCosV, col::kSinV, col::kRelLen, col::kZScore})
      CHECK(std::abs(fr(k, c) - base(k, c)) < 1e-9);
  }
}

TEST_CASE("features need four cities") {
  const Instance tri({{0, 0}, {1, 0}, {0, 1}});
  CHECK_THROWS(compute_features(tri, Tour{0, 1, 2}, HistoryBuffer{}));
}
