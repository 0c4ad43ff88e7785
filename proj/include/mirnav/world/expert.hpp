#pragma once

#include <limits>
#include <queue>
#include <vector>

#include "mirnav/world/render.hpp"

namespace mirnav::world {

inline constexpr int kUnreachable = std::numeric_limits<int>::max();

// Multi-source BFS over free cells (4-connected). Entry = cells to the
// nearest source, kUnreachable where no path exists.
inline std::vector<int> cell_distance_field(const Scene& scene, const std::vector<CellPos>& sources) {
  std::vector<int> dist(static_cast<std::size_t>(scene.width() * scene.height()), kUnreachable);
  std::queue<CellPos> q;
  for (auto c : sources) {
    if (!scene.free(c) || dist[scene.index(c)] == 0) continue;
    dist[scene.index(c)] = 0;
    q.push(c);
  }
  while (!q.empty()) {
    auto c = q.front();
    q.pop();
    const int d = dist[scene.index(c)];
    for (auto o : kNeighbours4) {
      CellPos nb{c.x + o.x, c.y + o.y};
      if (scene.free(nb) && dist[scene.index(nb)] == kUnreachable) {
        dist[scene.index(nb)] = d + 1;
        q.push(nb);
      }
    }
  }
  return dist;
}

inline std::vector<CellPos> cells_of(const std::vector<Pose>& poses) {
  std::vector<CellPos> out;
  for (const auto& p : poses) out.push_back(p.cell());
  return out;
}

// Heading-agnostic geodesic distance (cells) from `cell` to the nearest goal-pose cell.
inline int geodesic(const Scene& scene, CellPos cell, const std::vector<Pose>& goal_poses) {
  require(scene.free(cell), "geodesic: query cell must be free");
  require(!goal_poses.empty(), "geodesic: goal set must be non-empty");
  return cell_distance_field(scene, cells_of(goal_poses))[scene.index(cell)];
}

// Poses whose front view hits `class_id` within `visibility_threshold` cells.
inline std::vector<Pose> goal_poses_for(const Scene& scene, int class_id, double visibility_threshold,
                                        const RenderConfig& cfg = {}) {
  std::vector<Pose> out;
  for (auto c : scene.free_cells())
    for (int h = 0; h < 4; ++h) {
      Pose p{c.x, c.y, h};
      if (sees_within(scene, p, class_id, visibility_threshold, cfg)) out.push_back(p);
    }
  return out;
}

// Precomputed distances to a goal set: cell geodesics and pose-graph
// steps-to-goal. The nav graph is symmetric (every move/rotation has an
// inverse), so a BFS outward from the goal poses yields steps-to-goal.
struct GoalField {
  std::vector<Pose> goal_poses;
  std::vector<int> cell_dist;
  std::vector<int> pose_dist;  // indexed by NavGraph node

  GoalField() = default;
  GoalField(const Scene& scene, const NavGraph& graph, std::vector<Pose> goals) : goal_poses(std::move(goals)) {
    require(!goal_poses.empty(), "goal set must be non-empty");
    cell_dist = cell_distance_field(scene, cells_of(goal_poses));
    pose_dist.assign(static_cast<std::size_t>(graph.size()), kUnreachable);
    std::queue<int> q;
    for (const auto& g : goal_poses) {
      int n = graph.node(g);
      require(n >= 0, "goal pose is not on a free cell");
      if (pose_dist[static_cast<std::size_t>(n)] == 0) continue;
      pose_dist[static_cast<std::size_t>(n)] = 0;
      q.push(n);
    }
    while (!q.empty()) {
      int n = q.front();
      q.pop();
      for (const auto& e : graph.edges(n)) {
        auto& d = pose_dist[static_cast<std::size_t>(e.to)];
        if (d == kUnreachable) {
          d = pose_dist[static_cast<std::size_t>(n)] + 1;
          q.push(e.to);
        }
      }
    }
  }

  int geo(const Scene& scene, CellPos c) const { return cell_dist[scene.index(c)]; }
  int steps(const NavGraph& graph, const Pose& p) const { return pose_dist[static_cast<std::size_t>(graph.node(p))]; }
};

// First action of the lexicographically smallest (by action index) shortest
// action sequence from `pose`; stop at a goal pose.
inline Action expert_action(const NavGraph& graph, const GoalField& field, const Pose& pose) {
  const int n = graph.node(pose);
  require(n >= 0, "expert: pose not on a free cell");
  const int d = field.pose_dist[static_cast<std::size_t>(n)];
  if (d == kUnreachable) throw Unreachable("goal unreachable from pose");
  if (d == 0) return Action::kStop;
  for (const auto& e : graph.edges(n))  // edges are stored in action order
    if (field.pose_dist[static_cast<std::size_t>(e.to)] == d - 1) return e.action;
  throw Unreachable("inconsistent goal field");
}

inline std::vector<Action> expert_shortest_path(const NavGraph& graph, const GoalField& field, Pose start) {
  std::vector<Action> path;
  for (;;) {
    Action a = expert_action(graph, field, start);
    path.push_back(a);
    if (a == Action::kStop) return path;
    start = graph.pose(*graph.successor(graph.node(start), a));
  }
}

inline std::vector<Action> expert_shortest_path(const Scene& scene, const NavGraph& graph, const Pose& start,
                                                const std::vector<Pose>& goal_poses) {
  return expert_shortest_path(graph, GoalField(scene, graph, goal_poses), start);
}

}  // namespace mirnav::world
