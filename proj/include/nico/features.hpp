#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "nico/nn.hpp"
#include "nico/tsp.hpp"

namespace nico {

// FIFO buffer of executed moves in tour-position space. Unused slots hold
// the invalid sentinel {-1, -1}. Positions are not remapped after a move
// reorders the tour.
class HistoryBuffer {
 public:
  static constexpr std::size_t kDefaultCapacity = 16;

  explicit HistoryBuffer(std::size_t capacity = kDefaultCapacity)
      : slots_(capacity, TwoOptMove{}) {}

  std::size_t capacity() const { return slots_.size(); }
  std::size_t valid_count() const { return count_; }
  bool empty() const { return count_ == 0; }

  void push(TwoOptMove move);
  void clear();

  // Valid entries, oldest first.
  std::vector<TwoOptMove> entries() const;
  // The most recent `m` valid entries, oldest first.
  std::vector<TwoOptMove> recent(std::size_t m) const;

  // Raw slots including sentinels, oldest slot first.
  const std::vector<TwoOptMove>& slots() const { return slots_; }

 private:
  std::vector<TwoOptMove> slots_;
  std::size_t count_ = 0;
};

// Column layout of the raw edge-token feature matrix.
namespace feature_col {
inline constexpr std::size_t kUx = 0;
inline constexpr std::size_t kUy = 1;
inline constexpr std::size_t kVx = 2;
inline constexpr std::size_t kVy = 3;
inline constexpr std::size_t kLength = 4;
inline constexpr std::size_t kDirX = 5;
inline constexpr std::size_t kDirY = 6;
inline constexpr std::size_t kCosU = 7;
inline constexpr std::size_t kSinU = 8;
inline constexpr std::size_t kCosV = 9;
inline constexpr std::size_t kSinV = 10;
inline constexpr std::size_t kRelLen = 11;
inline constexpr std::size_t kZScore = 12;
inline constexpr std::size_t kHistory = 13;
inline constexpr std::size_t kCount = 14;
}  // namespace feature_col

inline constexpr double kFeatureEps = 1e-6;

// Directed tour edges (t[k], t[k+1 mod n]).
std::vector<std::pair<int, int>> edge_sequence(std::span<const int> tour);

// Per-position frequency of history endpoints, normalized by the number of
// valid endpoints; all zeros for an empty buffer.
std::vector<double> history_frequency(const HistoryBuffer& history, std::size_t n);

// n x 14 raw edge-token features, one row per directed tour edge.
nn::Matrix compute_features(const Instance& instance, std::span<const int> tour,
                            const HistoryBuffer& history);

}  // namespace nico
