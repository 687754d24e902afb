#include "nico/baselines.hpp"

#include <algorithm>
#include <deque>
#include <sstream>

#include "nico/error.hpp"

namespace nico {

namespace {

constexpr double kImproveEps = 1e-12;

}  // namespace

std::string to_string(TerminalReason reason) {
  switch (reason) {
    case TerminalReason::kBudget:
      return "budget";
    case TerminalReason::kLocalOptimum:
      return "local_optimum";
    case TerminalReason::kTimeLimit:
      return "time_limit";
  }
  return "unknown";
}

std::string AnytimeTrace::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "step,cost,best,seconds\n";
  for (const auto& s : steps) out << s.step << ',' << s.cost << ',' << s.best << ',' << s.seconds << '\n';
  return out.str();
}

TraceRecorder::TraceRecorder(std::span<const int> start, double start_cost)
    : start_(std::chrono::steady_clock::now()) {
  result_.best_tour.assign(start.begin(), start.end());
  result_.best_cost = start_cost;
  result_.trace.steps.push_back({0, start_cost, start_cost, 0.0});
}

double TraceRecorder::elapsed() const {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
}

void TraceRecorder::record(std::span<const int> tour, double cost) {
  if (cost < result_.best_cost) {
    result_.best_cost = cost;
    result_.best_tour.assign(tour.begin(), tour.end());
  }
  result_.trace.steps.push_back(
      {result_.trace.steps.size(), cost, result_.best_cost, elapsed()});
}

bool TraceRecorder::exhausted(const SearchLimits& limits) const {
  return steps_taken() >= limits.step_budget || elapsed() >= limits.time_limit_seconds;
}

SearchResult TraceRecorder::finish(std::span<const int> final_tour, TerminalReason reason) {
  result_.final_tour.assign(final_tour.begin(), final_tour.end());
  result_.trace.reason = reason;
  return std::move(result_);
}

SearchResult greedy_two_opt(const Instance& instance, std::span<const int> start,
                            const SearchLimits& limits) {
  Tour tour(start.begin(), start.end());
  double cost = tour_cost(instance, tour);
  TraceRecorder recorder(tour, cost);
  const auto moves = feasible_moves(tour.size());
  while (!recorder.exhausted(limits)) {
    double best_delta = -kImproveEps;
    const TwoOptMove* chosen = nullptr;
    for (const TwoOptMove& m : moves) {
      const double delta = two_opt_delta_unchecked(instance, tour, m.i, m.j);
      if (delta < best_delta - (chosen ? kImproveEps : 0.0)) {
        best_delta = delta;
        chosen = &m;
      }
    }
    if (!chosen) return recorder.finish(tour, TerminalReason::kLocalOptimum);
    cost += best_delta;
    apply_two_opt_inplace(tour, *chosen);
    recorder.record(tour, cost);
  }
  const bool out_of_steps = recorder.steps_taken() >= limits.step_budget;
  return recorder.finish(tour, out_of_steps ? TerminalReason::kBudget : TerminalReason::kTimeLimit);
}

// Positions i < j < k cut edges (a,b), (c,d), (e,f) with
//   a = t[i], b = t[i+1], c = t[j], d = t[j+1], e = t[k], f = t[k+1 mod n].
// Writing the tour as A=[..a] B=[b..c] C=[d..e] D=[f..], the reconnections are
//   1: A B' C  D   (a,c)(b,d)      2-opt on B
//   2: A B  C' D   (c,e)(d,f)      2-opt on C
//   3: A C' B' D   (a,e)(b,f)      2-opt on B+C
//   4: A B' C' D   (a,c)(b,e)(d,f)
//   5: A C  B  D   (a,d)(e,b)(c,f)
//   6: A C  B' D   (a,d)(e,c)(b,f)
//   7: A C' B  D   (a,e)(d,b)(c,f)
double three_opt_delta(const Instance& inst, std::span<const int> t, ThreeOptMove m) {
  const std::size_t n = t.size();
  const int a = t[m.i], b = t[m.i + 1], c = t[m.j], d = t[m.j + 1], e = t[m.k];
  const int f = t[(static_cast<std::size_t>(m.k) + 1) % n];
  const auto dist = [&](int x, int y) { return inst.distance(x, y); };
  const double ab = dist(a, b), cd = dist(c, d), ef = dist(e, f);
  switch (m.type) {
    case 1:
      return dist(a, c) + dist(b, d) - ab - cd;
    case 2:
      return dist(c, e) + dist(d, f) - cd - ef;
    case 3:
      return dist(a, e) + dist(b, f) - ab - ef;
    case 4:
      return dist(a, c) + dist(b, e) + dist(d, f) - ab - cd - ef;
    case 5:
      return dist(a, d) + dist(e, b) + dist(c, f) - ab - cd - ef;
    case 6:
      return dist(a, d) + dist(e, c) + dist(b, f) - ab - cd - ef;
    case 7:
      return dist(a, e) + dist(d, b) + dist(c, f) - ab - cd - ef;
    default:
      throw InvalidMove("3-opt reconnection type must be 1..7");
  }
}

Tour apply_three_opt(std::span<const int> t, ThreeOptMove m) {
  const auto n = static_cast<int>(t.size());
  if (!(0 <= m.i && m.i < m.j && m.j < m.k && m.k < n)) {
    throw InvalidMove("3-opt cut positions must satisfy 0 <= i < j < k < n");
  }
  Tour out(t.begin(), t.begin() + m.i + 1);
  out.reserve(t.size());
  const auto fwd = [&](int from, int to) {
    for (int p = from; p <= to; ++p) out.push_back(t[p]);
  };
  const auto rev = [&](int from, int to) {
    for (int p = to; p >= from; --p) out.push_back(t[p]);
  };
  const int b0 = m.i + 1, b1 = m.j, c0 = m.j + 1, c1 = m.k;
  switch (m.type) {
    case 1: rev(b0, b1); fwd(c0, c1); break;
    case 2: fwd(b0, b1); rev(c0, c1); break;
    case 3: rev(c0, c1); rev(b0, b1); break;
    case 4: rev(b0, b1); rev(c0, c1); break;
    case 5: fwd(c0, c1); fwd(b0, b1); break;
    case 6: fwd(c0, c1); rev(b0, b1); break;
    case 7: rev(c0, c1); fwd(b0, b1); break;
    default: throw InvalidMove("3-opt reconnection type must be 1..7");
  }
  fwd(m.k + 1, n - 1);
  return out;
}

SearchResult greedy_three_opt(const Instance& instance, std::span<const int> start,
                              const SearchLimits& limits, std::size_t max_n) {
  const std::size_t n = start.size();
  if (n < 6) throw InvalidInput("greedy 3-opt needs n >= 6");
  if (n > max_n) {
    throw SizeLimitError("greedy 3-opt is limited to n <= " + std::to_string(max_n) +
                         " (got " + std::to_string(n) + "); raise the limit explicitly");
  }
  Tour tour(start.begin(), start.end());
  double cost = tour_cost(instance, tour);
  TraceRecorder recorder(tour, cost);
  const int sn = static_cast<int>(n);
  while (!recorder.exhausted(limits)) {
    double best_delta = -kImproveEps;
    ThreeOptMove chosen;
    bool found = false;
    for (int i = 0; i < sn - 2; ++i) {
      for (int j = i + 1; j < sn - 1; ++j) {
        for (int k = j + 1; k < sn; ++k) {
          for (int type = 1; type <= 7; ++type) {
            const ThreeOptMove m{i, j, k, type};
            const double delta = three_opt_delta(instance, tour, m);
            if (delta < best_delta - (found ? kImproveEps : 0.0)) {
              best_delta = delta;
              chosen = m;
              found = true;
            }
          }
        }
      }
    }
    if (!found) return recorder.finish(tour, TerminalReason::kLocalOptimum);
    tour = apply_three_opt(tour, chosen);
    cost += best_delta;
    recorder.record(tour, cost);
  }
  const bool out_of_steps = recorder.steps_taken() >= limits.step_budget;
  return recorder.finish(tour, out_of_steps ? TerminalReason::kBudget : TerminalReason::kTimeLimit);
}

SearchResult tabu_search(const Instance& instance, std::span<const int> start,
                         const SearchLimits& limits, const TabuOptions& options) {
  Tour tour(start.begin(), start.end());
  double cost = tour_cost(instance, tour);
  TraceRecorder recorder(tour, cost);
  const auto moves = feasible_moves(tour.size());
  if (moves.empty()) return recorder.finish(tour, TerminalReason::kLocalOptimum);
  std::deque<TwoOptMove> tabu;

  while (!recorder.exhausted(limits)) {
    const TwoOptMove* chosen = nullptr;
    double chosen_delta = 0.0;
    while (!chosen) {
      for (const TwoOptMove& m : moves) {
        const double delta = two_opt_delta_unchecked(instance, tour, m.i, m.j);
        const bool is_tabu = std::find(tabu.begin(), tabu.end(), m) != tabu.end();
        const bool aspires =
            options.aspiration && cost + delta < recorder.best_cost() - kImproveEps;
        if (is_tabu && !aspires) continue;
        if (!chosen || delta < chosen_delta - kImproveEps) {
          chosen = &m;
          chosen_delta = delta;
        }
      }
      if (!chosen) tabu.pop_front();  // everything tabu: free the oldest entry
    }
    cost += chosen_delta;
    apply_two_opt_inplace(tour, *chosen);
    if (options.tenure > 0) {
      tabu.push_back(*chosen);
      while (tabu.size() > options.tenure) tabu.pop_front();
    }
    recorder.record(tour, cost);
  }
  const bool out_of_steps = recorder.steps_taken() >= limits.step_budget;
  return recorder.finish(tour, out_of_steps ? TerminalReason::kBudget : TerminalReason::kTimeLimit);
}

}  // namespace nico
