#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "nico/baselines.hpp"
#include "nico/checkpoint.hpp"
#include "nico/error.hpp"
#include "nico/features.hpp"
#include "nico/harness.hpp"
#include "nico/oracle.hpp"
#include "nico/policy.hpp"
#include "nico/rng.hpp"

namespace py = pybind11;
using namespace nico;

namespace {

py::array_t<double> to_numpy(const nn::Matrix& m) {
  py::array_t<double> out({m.rows, m.cols});
  std::copy(m.data.begin(), m.data.end(), out.mutable_data());
  return out;
}

HistoryBuffer history_from(const std::vector<std::pair<int, int>>& moves, std::size_t capacity) {
  HistoryBuffer h(capacity);
  for (const auto& [i, j] : moves) h.push({i, j});
  return h;
}

TwoOptMove move_from(const std::pair<int, int>& m) { return {m.first, m.second}; }

std::vector<std::pair<int, int>> as_pairs(const std::vector<TwoOptMove>& moves) {
  std::vector<std::pair<int, int>> out;
  for (const auto& m : moves) out.emplace_back(m.i, m.j);
  return out;
}

py::dict search_dict(const SearchResult& r) {
  py::list trace;
  for (const auto& s : r.trace.steps) trace.append(py::make_tuple(s.step, s.cost, s.best));
  py::dict d;
  d["best_cost"] = r.best_cost;
  d["best_tour"] = r.best_tour;
  d["final_tour"] = r.final_tour;
  d["trace"] = trace;
  d["reason"] = to_string(r.trace.reason);
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "C++ core of nico_tsp";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<InvalidInput>(m, "InvalidInput", base.ptr());
  py::register_exception<InvalidMove>(m, "InvalidMove", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<CheckpointError>(m, "CheckpointError", base.ptr());

  py::class_<Instance>(m, "Instance")
      .def(py::init([](const std::vector<std::pair<double, double>>& coords, const std::string& id,
                       std::optional<double> opt_cost) {
             std::vector<Point> pts;
             for (const auto& [x, y] : coords) pts.push_back({x, y});
             return Instance(std::move(pts), id, opt_cost);
           }),
           py::arg("coords"), py::arg("id") = "", py::arg("opt_cost") = py::none())
      .def_property_readonly("n", &Instance::size)
      .def_property_readonly("id", &Instance::id)
      .def_property_readonly("opt_cost", &Instance::opt_cost)
      .def_property_readonly("coords",
                             [](const Instance& inst) {
                               std::vector<std::pair<double, double>> out;
                               for (const auto& p : inst.coords()) out.emplace_back(p.x, p.y);
                               return out;
                             })
      .def("distance", [](const Instance& inst, std::size_t a, std::size_t b) {
        if (a >= inst.size() || b >= inst.size()) throw py::index_error("city index out of range");
        return inst.distance(a, b);
      })
      .def("__len__", &Instance::size)
      .def("__repr__", [](const Instance& inst) {
        return "<Instance '" + inst.id() + "' n=" + std::to_string(inst.size()) + ">";
      });

  m.def("generate_uniform", &generate_uniform, py::arg("n"), py::arg("seed"), py::arg("index") = 0);
  m.def("random_tour", py::overload_cast<std::size_t, std::uint64_t, std::uint64_t>(&random_tour),
        py::arg("n"), py::arg("seed"), py::arg("index") = 0);
  m.def("tour_cost", [](const Instance& inst, const Tour& tour) {
    validate_tour(inst, tour);
    return tour_cost(inst, tour);
  });
  m.def("feasible_moves", [](std::size_t n) { return as_pairs(feasible_moves(n)); });
  m.def("apply_two_opt", [](const Tour& tour, std::pair<int, int> move) {
    return apply_two_opt(tour, move_from(move));
  });
  m.def("two_opt_delta", [](const Instance& inst, const Tour& tour, std::pair<int, int> move) {
    validate_tour(inst, tour);
    if (!is_feasible(move_from(move), tour.size())) throw InvalidMove("infeasible move");
    return two_opt_delta(inst, tour, move_from(move));
  });

  m.def("exact_optimum", [](const Instance& inst) {
    const ExactSolution s = exact_optimum(inst);
    return py::make_tuple(s.cost, s.tour);
  });
  m.def(
      "k_step_lookahead",
      [](const Instance& inst, const Tour& tour, std::size_t depth) {
        validate_tour(inst, tour);
        const OracleResult r = k_step_lookahead(inst, tour, depth);
        py::dict d;
        d["optimal_actions"] = as_pairs(r.optimal_actions);
        d["best_final_cost"] = r.best_final_cost;
        d["witness"] = as_pairs(r.witness);
        return d;
      },
      py::arg("instance"), py::arg("tour"), py::arg("depth"));

  m.def(
      "features",
      [](const Instance& inst, const Tour& tour, const std::vector<std::pair<int, int>>& history) {
        validate_tour(inst, tour);
        return to_numpy(compute_features(inst, tour, history_from(history, HistoryBuffer::kDefaultCapacity)));
      },
      py::arg("instance"), py::arg("tour"), py::arg("history") = std::vector<std::pair<int, int>>{});

  py::class_<Policy>(m, "Policy")
      .def_static("load", [](const std::filesystem::path& path) { return policy_from_checkpoint(load_checkpoint(path)); })
      .def_property_readonly("parameter_count", [](Policy& p) {
        std::size_t count = 0;
        for (const auto* param : p.parameters()) count += param->value.data.size();
        return count;
      })
      .def(
          "probabilities",
          [](const Policy& p, const Instance& inst, const Tour& tour,
             const std::vector<std::pair<int, int>>& history) {
            validate_tour(inst, tour);
            const HistoryBuffer h = history_from(history, p.config().history_capacity);
            const PolicyOutput out = evaluate_policy(p, inst, tour, h, p.config().active_recency_mask());
            nn::Matrix probs(out.n(), out.n());
            for (std::size_t k = 0; k < probs.data.size(); ++k) probs.data[k] = std::exp(out.log_probs.data[k]);
            return to_numpy(probs);
          },
          py::arg("instance"), py::arg("tour"), py::arg("history") = std::vector<std::pair<int, int>>{});

  m.def(
      "improve",
      [](const Instance& inst, const Tour& start, const std::string& method, std::size_t budget,
         std::uint64_t seed, const Policy* policy, bool greedy) {
        validate_tour(inst, start);
        const SearchLimits limits{budget == 0 ? 10 * inst.size() : budget};
        SearchResult r;
        {
        py::gil_scoped_release release;
        Rng rng(seed);
        switch (parse_method(method)) {
          case Method::kGreedy2Opt: r = greedy_two_opt(inst, start, limits); break;
          case Method::kGreedy3Opt: r = greedy_three_opt(inst, start, limits); break;
          case Method::kTabu: r = tabu_search(inst, start, limits); break;
          case Method::kRandomPolicy:
            r = run_policy_search(nullptr, inst, start, limits, rng, false, kRandomPolicyRecency);
            break;
          case Method::kNico:
            if (!policy) throw ConfigError("method nico needs a policy");
            r = run_policy_search(policy, inst, start, limits, rng, greedy,
                                  policy->config().active_recency_mask(), policy->config().history_capacity);
            break;
        }
        }
        return search_dict(r);
      },
      py::arg("instance"), py::arg("start"), py::arg("method") = "greedy2opt", py::arg("budget") = 0,
      py::arg("seed") = 0, py::arg("policy") = nullptr, py::arg("greedy") = false);
}
