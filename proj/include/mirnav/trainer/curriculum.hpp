#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "mirnav/evalkit/tasks.hpp"
#include "mirnav/trainer/config.hpp"

namespace mirnav::train {

// Bigger and more cluttered scenes score higher.
inline double scene_difficulty(const world::Scene& s) {
  const double area = static_cast<double>(s.width()) * s.height();
  const double free = static_cast<double>(s.free_cells().size());
  return free * (1.0 + (area - free) / area);
}

// Group index (0-based) per scene: equal-size slices of the pool ordered by
// difficulty, ties broken by scene id.
inline std::vector<int> difficulty_groups(const eval::ScenePool& pool, int groups) {
  require(groups >= 1, "difficulty_groups: need at least one group");
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> score;
  for (const auto& w : pool) score.push_back(scene_difficulty(w->scene));
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (score[a] != score[b]) return score[a] < score[b];
    return pool[a]->scene.id() < pool[b]->scene.id();
  });
  std::vector<int> g(pool.size(), 0);
  for (std::size_t rank = 0; rank < order.size(); ++rank)
    g[order[rank]] = static_cast<int>(rank * static_cast<std::size_t>(groups) / order.size());
  return g;
}

inline int stage_count(const CurriculumConfig& c) {
  return c.enabled ? static_cast<int>(c.stage_starts.size()) : 1;
}

// 1-based stage active after `episodes` finished episodes.
inline int curriculum_stage(const CurriculumConfig& c, long episodes) {
  if (!c.enabled) return 1;
  int stage = 0;
  for (long start : c.stage_starts)
    if (episodes >= start) ++stage;
  return std::max(stage, 1);
}

// Scenes visible at `stage`: groups 1..stage, or everything when disabled.
inline eval::ScenePool active_pool(const eval::ScenePool& pool, const CurriculumConfig& c, int stage) {
  if (!c.enabled) return pool;
  const auto g = difficulty_groups(pool, stage_count(c));
  eval::ScenePool out;
  for (std::size_t i = 0; i < pool.size(); ++i)
    if (g[i] < stage) out.push_back(pool[i]);
  return out;
}

// Each scene followed by its 7 other grid symmetries (same scene id).
inline eval::ScenePool with_symmetries(const eval::ScenePool& pool) {
  eval::ScenePool out;
  for (const auto& w : pool) {
    out.push_back(w);
    for (int k = 1; k < 8; ++k) out.push_back(std::make_shared<const world::SceneBundle>(world::dihedral(w->scene, k)));
  }
  return out;
}

}  // namespace mirnav::train
