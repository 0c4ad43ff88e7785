#pragma once

#include <cmath>
#include <memory>
#include <vector>

#include "mirnav/world/expert.hpp"

namespace mirnav::world {

struct EpisodeConfig {
  int max_steps = 100;
  int success_radius = 1;             // cells
  double visibility_threshold = 2.0;  // cells, for goal poses
  bool auto_stop = false;             // environment ends the episode on reaching a success state
  RenderConfig render;
};

// Immutable scene plus its pose graph; shared read-only across workers.
struct SceneBundle {
  Scene scene;
  NavGraph graph;
  explicit SceneBundle(Scene s) : scene(std::move(s)), graph(scene) {}
};

struct Target {
  int class_id = 0;
  Pose view_pose;
  View view;                        // rendered at view_pose
  std::vector<double> class_onehot;  // K entries, class_id - 1 hot
};

struct NavTask {
  std::shared_ptr<const SceneBundle> world;
  std::shared_ptr<const GoalField> goal;
  Pose start;
  Target target;
  int optimal_length = 0;           // expert actions including the final stop
  int start_geodesic = 0;           // cells to the nearest goal cell
  int target_geodesic = 0;          // cells to the target-view cell
  double euclidean_start_goal = 0;  // metres, start cell to target-view cell

  int scene_id() const { return world->scene.id(); }
  int goal_class() const { return target.class_id; }
};

inline Target make_target(const Scene& scene, int class_id, const Pose& view_pose, const RenderConfig& cfg) {
  Target t;
  t.class_id = class_id;
  t.view_pose = view_pose;
  t.view = render_view(scene, view_pose, cfg);
  t.class_onehot.assign(static_cast<std::size_t>(cfg.classes), 0.0);
  if (class_id >= 1 && class_id <= cfg.classes) t.class_onehot[static_cast<std::size_t>(class_id - 1)] = 1.0;
  return t;
}

// Builds a task; throws Unreachable if the goal cannot be reached.
inline NavTask make_task(std::shared_ptr<const SceneBundle> world, std::shared_ptr<const GoalField> goal, int class_id,
                         Pose start, const Pose& target_view_pose, const EpisodeConfig& cfg) {
  NavTask t;
  const auto& scene = world->scene;
  t.target = make_target(scene, class_id, target_view_pose, cfg.render);
  t.world = std::move(world);
  t.goal = std::move(goal);
  t.start = start;
  const int steps = t.goal->steps(t.world->graph, start);
  if (steps == kUnreachable) throw Unreachable("task goal unreachable from start");
  t.optimal_length = steps + 1;
  t.start_geodesic = t.goal->geo(scene, start.cell());
  t.target_geodesic = cell_distance_field(scene, {target_view_pose.cell()})[scene.index(start.cell())];
  const double dx = start.x - target_view_pose.x;
  const double dy = start.y - target_view_pose.y;
  t.euclidean_start_goal = std::sqrt(dx * dx + dy * dy) * scene.cell_size_m();
  return t;
}

inline NavTask make_task(std::shared_ptr<const SceneBundle> world, int class_id, Pose start,
                         const Pose& target_view_pose, const EpisodeConfig& cfg) {
  auto goals = goal_poses_for(world->scene, class_id, cfg.visibility_threshold, cfg.render);
  if (goals.empty()) throw Unreachable("no goal pose sees the target class");
  auto field = std::make_shared<const GoalField>(world->scene, world->graph, std::move(goals));
  return make_task(std::move(world), std::move(field), class_id, start, target_view_pose, cfg);
}

// Per-step reward. Precedence: first step, success, collision, geodesic shaping.
inline double step_reward(int t, bool success, bool collided, int geo_prev, int geo_now) {
  if (t == 0) return -0.01;
  if (success) return 10.0;
  if (collided) return -0.2;
  return static_cast<double>(geo_prev - geo_now) - 0.01;
}

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool collided = false;
  bool success = false;
  bool done = false;
  int geodesic_after = 0;
};

struct ExpertTuple {
  Action action;
  Observation next_observation;
};

// Single-owner mutable episode over an immutable task.
class Episode {
 public:
  Episode(const NavTask& task, const EpisodeConfig& cfg) : task_(&task), cfg_(cfg), pose_(task.start) {
    require(task.world->scene.free(pose_.cell()), "episode start must be a free cell");
    obs_ = observe(task.world->scene, pose_, cfg_.render);
    geo_ = task.goal->geo(task.world->scene, pose_.cell());
  }

  const NavTask& task() const { return *task_; }
  const EpisodeConfig& config() const { return cfg_; }
  const Pose& pose() const { return pose_; }
  const Observation& observation() const { return obs_; }
  int t() const { return t_; }
  bool done() const { return done_; }
  bool success() const { return success_; }
  int geodesic() const { return geo_; }

  // Stop here would succeed: goal class in the front view and near a goal cell.
  bool at_success_state() const {
    return geo_ <= cfg_.success_radius && obs_.front().sees_class(cfg_.render, task_->goal_class());
  }

  StepResult step(Action a) {
    if (done_) throw ContractViolation("step() on a finished episode");
    const auto& world = *task_->world;
    StepResult r;
    const int geo_prev = geo_;
    if (a != Action::kStop) {
      Pose next = apply_kinematics(pose_, a);
      if (world.scene.free(next.cell())) {
        pose_ = next;
        obs_ = observe(world.scene, pose_, cfg_.render);
        geo_ = task_->goal->geo(world.scene, pose_.cell());
      } else {
        r.collided = true;
      }
    }
    bool success = false;
    if (a == Action::kStop) {
      success = at_success_state();
    } else if (cfg_.auto_stop) {
      success = at_success_state();
    }
    r.success = success;
    r.reward = step_reward(t_, success, r.collided, geo_prev, geo_);
    ++t_;
    r.done = success || a == Action::kStop || t_ >= cfg_.max_steps;
    done_ = r.done;
    success_ = success;
    r.observation = obs_;
    r.geodesic_after = geo_;
    return r;
  }

  // (a_t^gt, x_{t+1}^gt): recomputed from the current pose every call.
  ExpertTuple expert_tuple() const {
    const auto& world = *task_->world;
    Action a = expert_action(world.graph, *task_->goal, pose_);
    if (a == Action::kStop) return {a, obs_};
    Pose next = apply_kinematics(pose_, a);
    return {a, observe(world.scene, next, cfg_.render)};
  }

 private:
  const NavTask* task_;
  EpisodeConfig cfg_;
  Pose pose_;
  Observation obs_;
  int geo_ = 0;
  int t_ = 0;
  bool done_ = false;
  bool success_ = false;
};

}  // namespace mirnav::world
