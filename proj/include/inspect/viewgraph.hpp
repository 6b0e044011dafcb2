#pragma once

// Candidate view poses, the weighted workspace graph over them and its metric
// closure (all-pairs shortest path distances).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <queue>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "inspect/errors.hpp"
#include "inspect/geometry.hpp"
#include "inspect/pose.hpp"
#include "inspect/quality.hpp"

namespace inspect {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// C(X) = c(X) + alpha |X|; beta weights orientation against translation in c.
struct CostModel {
  double alpha = 0.0;
  double beta = 0.01;

  void validate() const {
    if (!(alpha >= 0.0)) throw ValidationError("cost model needs alpha >= 0");
    if (!(beta >= 0.0 && beta <= 1.0)) throw ValidationError("cost model needs beta in [0, 1]");
  }
};

// (1 - beta) * translation (mm) + beta * rotation angle (rad).
inline double edge_cost(const ViewPose& a, const ViewPose& b, double beta) {
  return (1.0 - beta) * (a.position - b.position).norm() + beta * rotation_angle(a.orientation, b.orientation);
}

struct Edge {
  std::size_t from;
  std::size_t to;
  double cost;
};

class ViewGraph {
 public:
  ViewGraph() = default;

  // Edges are undirected; duplicates keep the cheaper cost.
  ViewGraph(std::vector<ViewPose> poses, std::vector<Edge> edges, double beta)
      : poses_(std::move(poses)), beta_(beta) {
    std::map<std::pair<std::size_t, std::size_t>, double> unique;
    for (const auto& e : edges) {
      if (e.from >= poses_.size() || e.to >= poses_.size()) throw ValidationError("edge references unknown pose");
      if (!(e.cost >= 0.0) || !std::isfinite(e.cost)) throw ValidationError("edge costs must be finite and >= 0");
      if (e.from == e.to) continue;
      const auto key = std::minmax(e.from, e.to);
      auto [it, inserted] = unique.emplace(key, e.cost);
      if (!inserted) it->second = std::min(it->second, e.cost);
    }
    for (const auto& [key, cost] : unique) edges_.push_back({key.first, key.second, cost});
    compute_components();
    compute_closure();
  }

  const std::vector<ViewPose>& poses() const noexcept { return poses_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  double beta() const noexcept { return beta_; }
  std::size_t size() const noexcept { return poses_.size(); }

  // Shortest-path distance; infinity across components.
  double distance(std::size_t i, std::size_t j) const { return closure_[i * poses_.size() + j]; }
  bool connected(std::size_t i, std::size_t j) const { return component_[i] == component_[j]; }

  std::size_t component_of(std::size_t i) const { return component_.at(i); }
  std::size_t component_count() const noexcept { return component_sizes_.size(); }

  std::vector<std::size_t> largest_component() const {
    std::size_t best = 0;
    for (std::size_t c = 1; c < component_sizes_.size(); ++c) {
      if (component_sizes_[c] > component_sizes_[best]) best = c;
    }
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < poses_.size(); ++i) {
      if (component_[i] == best) out.push_back(i);
    }
    return out;
  }

  std::vector<std::size_t> isolated_poses() const {
    std::vector<std::size_t> degree(poses_.size(), 0), out;
    for (const auto& e : edges_) {
      ++degree[e.from];
      ++degree[e.to];
    }
    for (std::size_t i = 0; i < poses_.size(); ++i) {
      if (degree[i] == 0) out.push_back(i);
    }
    return out;
  }

  // Human-readable notes produced while building (isolated poses, splits).
  std::vector<std::string> warnings;

 private:
  void compute_components() {
    const std::size_t k = poses_.size();
    std::vector<std::size_t> parent(k);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (const auto& e : edges_) parent[find(e.from)] = find(e.to);
    component_.assign(k, 0);
    std::vector<std::size_t> label(k, k);
    component_sizes_.clear();
    for (std::size_t i = 0; i < k; ++i) {
      const auto r = find(i);
      if (label[r] == k) {
        label[r] = component_sizes_.size();
        component_sizes_.push_back(0);
      }
      component_[i] = label[r];
      ++component_sizes_[label[r]];
    }
  }

  // Dijkstra from every source over the sparse edge set.
  void compute_closure() {
    const std::size_t k = poses_.size();
    std::vector<std::vector<std::pair<std::size_t, double>>> adj(k);
    for (const auto& e : edges_) {
      adj[e.from].emplace_back(e.to, e.cost);
      adj[e.to].emplace_back(e.from, e.cost);
    }
    closure_.assign(k * k, kInfinity);
    using Item = std::pair<double, std::size_t>;
    for (std::size_t s = 0; s < k; ++s) {
      double* dist = closure_.data() + s * k;
      std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
      dist[s] = 0.0;
      heap.emplace(0.0, s);
      while (!heap.empty()) {
        const auto [d, u] = heap.top();
        heap.pop();
        if (d > dist[u]) continue;
        for (const auto& [v, w] : adj[u]) {
          if (d + w < dist[v]) {
            dist[v] = d + w;
            heap.emplace(dist[v], v);
          }
        }
      }
    }
    // Symmetrize against floating-point summation order.
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = i + 1; j < k; ++j) {
        const double d = std::min(closure_[i * k + j], closure_[j * k + i]);
        closure_[i * k + j] = closure_[j * k + i] = d;
      }
    }
  }

  std::vector<ViewPose> poses_;
  std::vector<Edge> edges_;
  double beta_ = 0.01;
  std::vector<double> closure_;
  std::vector<std::size_t> component_;
  std::vector<std::size_t> component_sizes_;
};

// One pose per `stride`-th surface point, d_opt out along its normal and
// looking back at it.
inline std::vector<ViewPose> generate_candidates(const SurfacePointSet& points, const QualityModel& model,
                                                 std::size_t stride) {
  if (stride < 1) throw ArgumentError("stride must be >= 1");
  std::vector<ViewPose> poses;
  for (std::size_t i = 0; i < points.size(); i += stride) {
    const Vec3& n = points.normals[i];
    poses.push_back({points.positions[i] + model.d_opt * n, look_along(-n)});
  }
  return poses;
}

struct GraphParams {
  double beta = 0.01;
  std::size_t k_nn = 8;
  double d_max = 600.0;  // 3 * d_opt for d_opt = 200 mm
};

// Connects every pose to its k_nn nearest neighbours by position, keeping only
// pairs at most d_max apart.
inline ViewGraph build_graph(std::vector<ViewPose> poses, const GraphParams& params) {
  if (poses.size() < 2) throw ValidationError("a view graph needs at least 2 poses");
  if (params.k_nn < 1) throw ArgumentError("k_nn must be >= 1");
  const std::size_t k = poses.size();
  std::set<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<std::pair<double, std::size_t>> nearest;
  for (std::size_t i = 0; i < k; ++i) {
    nearest.clear();
    for (std::size_t j = 0; j < k; ++j) {
      if (j != i) nearest.emplace_back((poses[i].position - poses[j].position).norm(), j);
    }
    const std::size_t take = std::min(params.k_nn, nearest.size());
    std::partial_sort(nearest.begin(), nearest.begin() + static_cast<std::ptrdiff_t>(take), nearest.end());
    for (std::size_t r = 0; r < take; ++r) {
      if (nearest[r].first <= params.d_max) pairs.emplace(std::min(i, nearest[r].second), std::max(i, nearest[r].second));
    }
  }
  std::vector<Edge> edges;
  for (const auto& [a, b] : pairs) edges.push_back({a, b, edge_cost(poses[a], poses[b], params.beta)});
  ViewGraph graph(std::move(poses), std::move(edges), params.beta);
  const auto isolated = graph.isolated_poses();
  if (!isolated.empty()) {
    std::string msg = "isolated poses:";
    for (auto i : isolated) msg += " " + std::to_string(i);
    graph.warnings.push_back(msg);
  }
  if (graph.component_count() > 1) {
    graph.warnings.push_back("graph has " + std::to_string(graph.component_count()) + " connected components");
  }
  return graph;
}

// Length of the open walk visiting `order` through the metric closure.
inline double walk_length(const ViewGraph& graph, std::span<const std::size_t> order) {
  double total = 0.0;
  for (std::size_t i = 1; i < order.size(); ++i) total += graph.distance(order[i - 1], order[i]);
  return total;
}

// C(X) for an ordered pose sequence: open-walk length plus alpha per pose.
inline double path_cost(const ViewGraph& graph, std::span<const std::size_t> order, const CostModel& cost) {
  for (auto i : order) {
    if (i >= graph.size()) throw ArgumentError("pose index " + std::to_string(i) + " out of range");
  }
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (!graph.connected(order[i - 1], order[i])) {
      throw InfeasiblePathError("poses " + std::to_string(order[i - 1]) + " and " + std::to_string(order[i]) +
                                " are not connected");
    }
  }
  return walk_length(graph, order) + cost.alpha * static_cast<double>(order.size());
}

}  // namespace inspect
