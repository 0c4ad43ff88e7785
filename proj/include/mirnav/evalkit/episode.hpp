#pragma once

#include <exception>
#include <functional>
#include <memory>
#include <random>
#include <thread>
#include <vector>

#include "mirnav/evalkit/tasks.hpp"
#include "mirnav/navmodel/model.hpp"

namespace mirnav::eval {

class Policy {
 public:
  virtual ~Policy() = default;
  virtual void reset(const world::NavTask& task, std::uint64_t seed) = 0;
  virtual world::Action act(const world::Episode& ep) = 0;
};

using PolicyFactory = std::function<std::unique_ptr<Policy>()>;

// Shortest-path oracle (reads the goal field; evaluation baseline only).
class ExpertPolicy final : public Policy {
 public:
  void reset(const world::NavTask&, std::uint64_t) override {}
  world::Action act(const world::Episode& ep) override {
    const auto& t = ep.task();
    return world::expert_action(t.world->graph, *t.goal, ep.pose());
  }
};

class RandomPolicy final : public Policy {
 public:
  void reset(const world::NavTask&, std::uint64_t seed) override { rng_.seed(seed); }
  world::Action act(const world::Episode&) override {
    return world::action_from_index(std::uniform_int_distribution<int>(0, world::kNumActions - 1)(rng_));
  }

 private:
  std::mt19937_64 rng_;
};

// Learned controller: sees the observation and target only.
template <class S>
class ModelPolicy final : public Policy {
 public:
  ModelPolicy(std::shared_ptr<const nav::NavModel> model, std::shared_ptr<const nnet::ParamStore<S>> params,
              nav::ActMode mode = nav::ActMode::kGreedy)
      : model_(std::move(model)), params_(std::move(params)), bound_(*model_, *params_), mode_(mode) {}

  void reset(const world::NavTask&, std::uint64_t seed) override { ctrl_ = nav::ControllerState(seed); }
  world::Action act(const world::Episode& ep) override {
    return nav::act(bound_, ep.observation(), ep.task().target, ctrl_, mode_);
  }

 private:
  std::shared_ptr<const nav::NavModel> model_;
  std::shared_ptr<const nnet::ParamStore<S>> params_;
  nav::BoundModel<S> bound_;
  nav::ActMode mode_;
  nav::ControllerState ctrl_;
};

struct Trajectory {
  std::vector<world::Pose> poses;  // start pose, then one per step
  std::vector<world::Action> actions;
  std::vector<double> rewards;
  std::vector<int> geodesics;  // start geodesic, then one per step
  int collisions = 0;
  bool success = false;
  int steps = 0;           // p_i
  int optimal_length = 0;  // l_i
  int start_geodesic = 0;
  int scene_id = 0;
  int goal_class = 0;
};

inline Trajectory run_episode(Policy& policy, const world::NavTask& task, const world::EpisodeConfig& cfg,
                              std::uint64_t seed) {
  policy.reset(task, seed);
  world::Episode ep(task, cfg);
  Trajectory tr;
  tr.optimal_length = task.optimal_length;
  tr.start_geodesic = task.start_geodesic;
  tr.scene_id = task.scene_id();
  tr.goal_class = task.goal_class();
  tr.poses.push_back(ep.pose());
  tr.geodesics.push_back(ep.geodesic());
  while (!ep.done()) {
    const auto a = policy.act(ep);
    const auto r = ep.step(a);
    tr.actions.push_back(a);
    tr.rewards.push_back(r.reward);
    tr.poses.push_back(ep.pose());
    tr.geodesics.push_back(r.geodesic_after);
    if (r.collided) ++tr.collisions;
  }
  tr.success = ep.success();
  tr.steps = ep.t();
  return tr;
}

// Per-task stream independent of execution order.
inline std::uint64_t task_seed(std::uint64_t seed, std::size_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Runs every task; results are in task order whatever `threads` is.
inline std::vector<Trajectory> run_suite(const PolicyFactory& make_policy, const std::vector<world::NavTask>& tasks,
                                         const world::EpisodeConfig& cfg, std::uint64_t seed, int threads = 1) {
  std::vector<Trajectory> out(tasks.size());
  threads = std::max(1, std::min<int>(threads, static_cast<int>(tasks.size())));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
  auto work = [&](int w) {
    try {
      auto policy = make_policy();
      for (std::size_t i = static_cast<std::size_t>(w); i < tasks.size(); i += static_cast<std::size_t>(threads))
        out[i] = run_episode(*policy, tasks[i], cfg, task_seed(seed, i));
    } catch (...) {
      errors[static_cast<std::size_t>(w)] = std::current_exception();
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < threads; ++w) pool.emplace_back(work, w);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace mirnav::eval
