#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "mirnav/world/env.hpp"

namespace mirnav::eval {

using ScenePool = std::vector<std::shared_ptr<const world::SceneBundle>>;

enum class Split { kTrain, kVal, kUnseenKnown, kUnseenNovel };

inline std::string split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kUnseenKnown: return "unseen_known_targets";
    case Split::kUnseenNovel: return "unseen_novel_targets";
  }
  return "?";
}

inline Split parse_split(const std::string& s) {
  for (auto v : {Split::kTrain, Split::kVal, Split::kUnseenKnown, Split::kUnseenNovel})
    if (split_name(v) == s) return v;
  throw ConfigError("unknown split '" + s + "'");
}

// Object classes usable as training targets vs held out for novel-target tests.
struct ClassPartition {
  std::vector<int> known;
  std::vector<int> novel;

  // First `n_known` classes of 1..K are known, the rest novel.
  static ClassPartition first_k(int classes, int n_known) {
    if (n_known < 1 || n_known > classes) throw ConfigError("known class count must be in [1, classes]");
    ClassPartition p;
    for (int k = 1; k <= classes; ++k) (k <= n_known ? p.known : p.novel).push_back(k);
    return p;
  }

  const std::vector<int>& for_split(Split s) const { return s == Split::kUnseenNovel ? novel : known; }
};

struct TaskConstraints {
  int min_geo = 2;           // start cells at least this far from every goal cell
  std::vector<int> classes;  // allowed target classes; empty = any present
};

// Shortest-path / straight-line ratio between start and target-view cells.
inline double path_ratio(const world::NavTask& t) {
  const double dx = t.start.x - t.target.view_pose.x;
  const double dy = t.start.y - t.target.view_pose.y;
  return static_cast<double>(t.target_geodesic) / std::hypot(dx, dy);
}

inline bool near_straight(const world::NavTask& t) {
  const double r = path_ratio(t);
  return r >= 1.0 - 1e-12 && r <= 1.1 + 1e-12;
}

// Percentage of near-straight tasks.
inline double difficulty_p(const std::vector<world::NavTask>& tasks) {
  if (tasks.empty()) return 0.0;
  const auto n = std::count_if(tasks.begin(), tasks.end(), near_straight);
  return 100.0 * static_cast<double>(n) / static_cast<double>(tasks.size());
}

struct TaskSuite {
  Split split = Split::kTrain;
  std::uint64_t seed = 0;
  std::vector<world::NavTask> tasks;
  double p = 0.0;  // percentage of near-straight tasks

  std::set<int> scene_ids() const {
    std::set<int> s;
    for (const auto& t : tasks) s.insert(t.scene_id());
    return s;
  }
  std::set<int> target_classes() const {
    std::set<int> s;
    for (const auto& t : tasks) s.insert(t.goal_class());
    return s;
  }
};

// Draws solvable tasks from a scene pool. Goal fields and valid start poses
// are computed once per (scene, class).
class TaskSampler {
 public:
  TaskSampler(ScenePool pool, TaskConstraints cons, world::EpisodeConfig cfg)
      : pool_(std::move(pool)), cons_(std::move(cons)), cfg_(cfg) {
    if (pool_.empty()) throw InfeasibleError("task sampler: empty scene pool");
    int with_class = 0;
    for (const auto& w : pool_) {
      for (const auto& obj : w->scene.objects()) {
        if (!cons_.classes.empty() &&
            std::find(cons_.classes.begin(), cons_.classes.end(), obj.class_id) == cons_.classes.end())
          continue;
        ++with_class;
        auto goals = world::goal_poses_for(w->scene, obj.class_id, cfg_.visibility_threshold, cfg_.render);
        if (goals.empty()) continue;
        Candidate c;
        c.world = w;
        c.class_id = obj.class_id;
        c.field = std::make_shared<const world::GoalField>(w->scene, w->graph, std::move(goals));
        for (int n = 0; n < w->graph.size(); ++n) {
          const auto& p = w->graph.pose(n);
          if (c.field->pose_dist[static_cast<std::size_t>(n)] == world::kUnreachable) continue;
          const int g = c.field->geo(w->scene, p.cell());
          if (g >= cons_.min_geo && g != world::kUnreachable) c.starts.push_back(p);
        }
        if (!c.starts.empty()) cands_.push_back(std::move(c));
      }
    }
    if (cands_.empty())
      throw InfeasibleError("no feasible task: " + std::to_string(pool_.size()) + " scenes, " +
                            std::to_string(with_class) + " (scene, class) pairs with an allowed class, 0 with a goal "
                            "reachable from a start at geodesic >= " + std::to_string(cons_.min_geo));
  }

  template <class Rng>
  world::NavTask sample(Rng& rng) const {
    const auto& c = cands_[pick(rng, cands_.size())];
    const auto& view = c.field->goal_poses[pick(rng, c.field->goal_poses.size())];
    const auto& start = c.starts[pick(rng, c.starts.size())];
    return world::make_task(c.world, c.field, c.class_id, start, view, cfg_);
  }

  std::size_t candidate_count() const { return cands_.size(); }
  const world::EpisodeConfig& episode_config() const { return cfg_; }

 private:
  struct Candidate {
    std::shared_ptr<const world::SceneBundle> world;
    int class_id = 0;
    std::shared_ptr<const world::GoalField> field;
    std::vector<world::Pose> starts;
  };

  template <class Rng>
  static std::size_t pick(Rng& rng, std::size_t n) {
    return static_cast<std::size_t>(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
  }

  ScenePool pool_;
  TaskConstraints cons_;
  world::EpisodeConfig cfg_;
  std::vector<Candidate> cands_;
};

inline TaskSuite sample_tasks(const ScenePool& scenes, Split split, int n, std::uint64_t seed,
                              const TaskConstraints& cons, const world::EpisodeConfig& cfg) {
  if (n < 1) throw ConfigError("task count must be positive");
  TaskSampler sampler(scenes, cons, cfg);
  std::mt19937_64 rng(seed);
  TaskSuite suite;
  suite.split = split;
  suite.seed = seed;
  suite.tasks.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) suite.tasks.push_back(sampler.sample(rng));
  suite.p = difficulty_p(suite.tasks);
  return suite;
}

// Throws ConfigError when the two pools share a scene id.
inline void require_disjoint_scenes(const ScenePool& a, const ScenePool& b, const std::string& what) {
  std::set<int> ids;
  for (const auto& w : a) ids.insert(w->scene.id());
  for (const auto& w : b)
    if (ids.count(w->scene.id())) throw ConfigError(what + ": scene " + std::to_string(w->scene.id()) + " in both sets");
}

}  // namespace mirnav::eval
