#pragma once

// Budgeted maximisation of f(X) over the view graph (submodular orienteering):
// greedy cost-benefit selection, an improvement pass on top of it, and an
// exhaustive solver for small instances.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "inspect/errors.hpp"
#include "inspect/quality.hpp"
#include "inspect/viewgraph.hpp"

namespace inspect {

struct PlanningProblem {
  const ViewGraph& graph;
  const QualityMatrix& quality;
  CostModel cost;
  double budget = 0.0;

  void validate() const {
    if (graph.size() == 0) throw ValidationError("planning needs a non-empty view graph");
    if (quality.poses() != graph.size()) throw ValidationError("quality matrix and graph disagree on pose count");
    if (!(budget >= 0.0)) throw ValidationError("budget must be >= 0");
    cost.validate();
  }
};

struct PlanStep {
  std::size_t pose;
  double gain;       // f(X + x) - f(X)
  double cost_step;  // C(X + x) - C(X)
  double f_after;
  double cost_after;
};

struct PlanSolution {
  std::vector<std::size_t> order;  // visiting order
  double f = 0.0;
  double cost = 0.0;
  double budget = 0.0;
  std::vector<PlanStep> log;

  std::vector<std::size_t> indices() const {
    auto out = order;
    std::sort(out.begin(), out.end());
    return out;
  }
};

// Default kappa = (1 - 1/e) / 2, the approximation factor of greedy cost-benefit.
inline const double kGreedyApproximation = 0.5 * (1.0 - 1.0 / std::numbers::e);

namespace detail {

struct Insertion {
  std::size_t position = 0;
  double walk_delta = 0.0;
};

// Cheapest place to insert x into an open walk. With a metric closure the
// delta is never negative.
inline Insertion cheapest_insertion(const ViewGraph& g, std::span<const std::size_t> order, std::size_t x) {
  if (order.empty()) return {0, 0.0};
  Insertion best{0, g.distance(x, order.front())};
  for (std::size_t i = 1; i < order.size(); ++i) {
    const double d = g.distance(order[i - 1], x) + g.distance(x, order[i]) - g.distance(order[i - 1], order[i]);
    if (d < best.walk_delta) best = {i, d};
  }
  const double tail = g.distance(order.back(), x);
  if (tail < best.walk_delta) best = {order.size(), tail};
  return best;
}

inline bool reachable_from(const ViewGraph& g, std::span<const std::size_t> order, std::size_t x) {
  return order.empty() || g.connected(order.front(), x);
}

// Grows `sol` by the best gain/cost candidate that keeps C <= B until none
// fits. Zero-cost candidates with positive gain outrank every finite ratio;
// ties go to the lowest pose index. Returns the number of poses added.
inline std::size_t greedy_extend(const PlanningProblem& p, PlanSolution& sol, std::vector<double>& best) {
  const std::size_t k = p.graph.size();
  std::vector<char> chosen(k, 0);
  for (auto i : sol.order) chosen[i] = 1;
  std::size_t added = 0;
  std::vector<std::size_t> trial;
  for (;;) {
    std::size_t pick = k;
    double pick_gain = 0.0, pick_ratio = 0.0, pick_cost = 0.0;
    std::size_t pick_pos = 0;
    for (std::size_t x = 0; x < k; ++x) {
      if (chosen[x] || !reachable_from(p.graph, sol.order, x)) continue;
      const double gain = marginal_gain(p.quality, best, x);
      if (!(gain > 0.0)) continue;
      const auto ins = cheapest_insertion(p.graph, sol.order, x);
      trial.assign(sol.order.begin(), sol.order.end());
      trial.insert(trial.begin() + static_cast<std::ptrdiff_t>(ins.position), x);
      const double new_cost = path_cost(p.graph, trial, p.cost);
      if (!(new_cost <= p.budget)) continue;
      const double step = new_cost - sol.cost;
      const double ratio = step > 0.0 ? gain / step : kInfinity;
      const bool better = pick == k || ratio > pick_ratio || (ratio == kInfinity && pick_ratio == kInfinity && gain > pick_gain);
      if (better) {
        pick = x;
        pick_gain = gain;
        pick_ratio = ratio;
        pick_cost = new_cost;
        pick_pos = ins.position;
      }
    }
    if (pick == k) break;
    const double step = pick_cost - sol.cost;
    sol.order.insert(sol.order.begin() + static_cast<std::ptrdiff_t>(pick_pos), pick);
    chosen[pick] = 1;
    for (const auto& e : p.quality.column(pick)) best[e.point] = std::max(best[e.point], e.q);
    sol.f += pick_gain;
    sol.cost = pick_cost;
    sol.log.push_back({pick, pick_gain, step, sol.f, sol.cost});
    ++added;
  }
  return added;
}

// First-improvement 2-opt on an open walk. Returns true if the walk got shorter.
inline bool two_opt(const ViewGraph& g, std::vector<std::size_t>& order) {
  const std::size_t n = order.size();
  if (n < 3) return false;
  bool any = false;
  for (bool improved = true; improved;) {
    improved = false;
    for (std::size_t i = 0; i + 1 < n && !improved; ++i) {
      for (std::size_t j = i + 1; j < n && !improved; ++j) {
        if (i == 0 && j == n - 1) continue;  // reversing the whole walk changes nothing
        double before = 0.0, after = 0.0;
        if (i > 0) {
          before += g.distance(order[i - 1], order[i]);
          after += g.distance(order[i - 1], order[j]);
        }
        if (j + 1 < n) {
          before += g.distance(order[j], order[j + 1]);
          after += g.distance(order[i], order[j + 1]);
        }
        if (after < before - 1e-9) {
          std::reverse(order.begin() + static_cast<std::ptrdiff_t>(i), order.begin() + static_cast<std::ptrdiff_t>(j) + 1);
          improved = any = true;
        }
      }
    }
  }
  return any;
}

}  // namespace detail

// Greedy cost-benefit. The result is the better of the greedy set and the best
// single affordable pose.
inline PlanSolution gcb(const PlanningProblem& problem) {
  problem.validate();
  PlanSolution sol;
  sol.budget = problem.budget;
  std::vector<double> best(problem.quality.points(), 0.0);
  detail::greedy_extend(problem, sol, best);

  if (problem.cost.alpha <= problem.budget) {
    std::size_t top = 0;
    double top_f = -1.0;
    for (std::size_t j = 0; j < problem.graph.size(); ++j) {
      const double s = problem.quality.column_sum(j);
      if (s > top_f) {
        top = j;
        top_f = s;
      }
    }
    if (top_f > sol.f) {
      sol.order = {top};
      sol.f = top_f;
      sol.cost = problem.cost.alpha;
      sol.log = {{top, top_f, problem.cost.alpha, top_f, problem.cost.alpha}};
    }
  }
  return sol;
}

namespace detail {

// Drops one pose at a time, re-tightens the walk and refills the freed budget
// greedily; the first exchange that raises f is kept. Returns true on success.
inline bool exchange(const PlanningProblem& p, PlanSolution& sol, std::vector<double>& best) {
  for (std::size_t r = 0; r < sol.order.size(); ++r) {
    PlanSolution trial;
    trial.budget = sol.budget;
    trial.order = sol.order;
    trial.order.erase(trial.order.begin() + static_cast<std::ptrdiff_t>(r));
    if (!trial.order.empty()) {
      // Removing an inner pose can split the walk when the closure is partial.
      bool linked = true;
      for (std::size_t i = 1; i < trial.order.size() && linked; ++i) {
        linked = p.graph.connected(trial.order[i - 1], trial.order[i]);
      }
      if (!linked) continue;
    }
    two_opt(p.graph, trial.order);
    trial.cost = trial.order.empty() ? 0.0 : path_cost(p.graph, trial.order, p.cost);
    auto trial_best = best_per_point(p.quality, trial.order);
    trial.f = objective_f(p.quality, trial.order);
    trial.log = sol.log;
    greedy_extend(p, trial, trial_best);
    if (trial.f > sol.f + 1e-9) {
      sol = std::move(trial);
      best = std::move(trial_best);
      return true;
    }
  }
  return false;
}

}  // namespace detail

// Local search from `base`: 2-opt reordering, greedy insertion into the freed
// budget and single-pose exchanges, repeated until a full round changes
// nothing. Never lowers f and keeps C <= B.
inline PlanSolution gcb_plus(const PlanningProblem& problem, const PlanSolution& base) {
  problem.validate();
  PlanSolution sol = base;
  sol.budget = problem.budget;
  auto best = best_per_point(problem.quality, sol.order);
  for (bool changed = true; changed;) {
    changed = false;
    if (detail::two_opt(problem.graph, sol.order)) {
      sol.cost = path_cost(problem.graph, sol.order, problem.cost);
      changed = true;
    }
    if (detail::greedy_extend(problem, sol, best) > 0) changed = true;
    if (!changed && detail::exchange(problem, sol, best)) changed = true;
  }
  sol.f = objective_f(problem.quality, sol.order);
  sol.cost = path_cost(problem.graph, sol.order, problem.cost);
  return sol;
}

inline constexpr std::size_t kBruteForceMaxPoses = 12;

// Exact optimum over every subset, each visited in its shortest open-walk
// order (Held-Karp over the metric closure). Test oracle for small k.
inline PlanSolution brute_force(const PlanningProblem& problem) {
  problem.validate();
  const std::size_t k = problem.graph.size();
  if (k > kBruteForceMaxPoses) throw ValidationError("brute force refuses more than 12 poses");
  const std::size_t full = std::size_t{1} << k;

  // walk[mask * k + last]: shortest open walk covering mask and ending at last.
  std::vector<double> walk(full * k, kInfinity);
  std::vector<std::int8_t> parent(full * k, -1);
  for (std::size_t i = 0; i < k; ++i) walk[(std::size_t{1} << i) * k + i] = 0.0;
  for (std::size_t mask = 1; mask < full; ++mask) {
    for (std::size_t last = 0; last < k; ++last) {
      const double base = walk[mask * k + last];
      if (!(mask >> last & 1) || base == kInfinity) continue;
      for (std::size_t next = 0; next < k; ++next) {
        if (mask >> next & 1) continue;
        const double d = base + problem.graph.distance(last, next);
        const std::size_t m2 = mask | (std::size_t{1} << next);
        if (d < walk[m2 * k + next]) {
          walk[m2 * k + next] = d;
          parent[m2 * k + next] = static_cast<std::int8_t>(last);
        }
      }
    }
  }

  PlanSolution best;
  best.budget = problem.budget;
  std::vector<std::size_t> members;
  for (std::size_t mask = 1; mask < full; ++mask) {
    std::size_t end = k;
    double length = kInfinity;
    for (std::size_t last = 0; last < k; ++last) {
      if (walk[mask * k + last] < length) {
        length = walk[mask * k + last];
        end = last;
      }
    }
    const double cost = length + problem.cost.alpha * std::popcount(mask);
    if (!(cost <= problem.budget)) continue;
    members.clear();
    for (std::size_t i = 0; i < k; ++i) {
      if (mask >> i & 1) members.push_back(i);
    }
    const double f = objective_f(problem.quality, members);
    if (f > best.f) {
      std::vector<std::size_t> order;
      for (std::size_t m = mask, at = end; m;) {
        order.push_back(at);
        const auto prev = parent[m * k + at];
        m &= ~(std::size_t{1} << at);
        if (prev < 0) break;
        at = static_cast<std::size_t>(prev);
      }
      std::reverse(order.begin(), order.end());
      best.order = std::move(order);
      best.f = f;
      best.cost = path_cost(problem.graph, best.order, problem.cost);
    }
  }
  return best;
}

// A solution's share of the optimum upper bound gcb_f / kappa.
inline double opt_metric(double solution_f, double gcb_f, double kappa = kGreedyApproximation) {
  if (!(gcb_f > 0.0)) throw UndefinedMetricError("OPT metric is undefined when the greedy solution has f = 0");
  if (!(kappa > 0.0 && kappa <= 1.0)) throw ArgumentError("kappa must lie in (0, 1]");
  return solution_f / (gcb_f / kappa);
}

}  // namespace inspect
