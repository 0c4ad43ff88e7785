#pragma once

#include <functional>
#include <memory>
#include <random>
#include <vector>

#include "mirnav/navmodel/model.hpp"
#include "mirnav/world/env.hpp"

namespace mirnav::train {

struct RolloutStep {
  nav::StepInput<double> input;  // x_t, target, a_{t-1}
  int prev_action = -1;
  int action = -1;
  double reward = 0;
  int expert_action = -1;        // -1 when the variant has no expert supervision
  nav::Vec<double> next_front;   // x_{t+1}^gt front view; only for variants that reconstruct it
  nav::Vec<double> noise;        // latent noise drawn when acting
  int t = 0;                     // step index inside the episode
  int geo_before = 0;
  int geo_after = 0;
  bool collided = false;
  bool success = false;
  bool done = false;
};

struct FinishedEpisode {
  bool success = false;
  int steps = 0;
  double reward_sum = 0;
  int scene_id = 0;
};

struct Rollout {
  std::vector<RolloutStep> steps;
  double bootstrap = 0;  // v(x_{T+1}, g); 0 when the last step ended the episode
  std::vector<FinishedEpisode> finished;
};

using TaskSource = std::function<world::NavTask(std::mt19937_64&)>;

// One worker's environment: the running episode plus the controller state
// that survives across rollouts.
class EnvSlot {
 public:
  EnvSlot(world::EpisodeConfig cfg, std::uint64_t seed) : cfg_(cfg), rng_(seed) {}

  bool active() const { return ep_ && !ep_->done(); }
  void start(world::NavTask task) {
    ep_.reset();
    task_ = std::make_unique<world::NavTask>(std::move(task));
    ep_ = std::make_unique<world::Episode>(*task_, cfg_);
    prev_action = -1;
    reward_sum = 0;
  }
  world::Episode& episode() {
    require(ep_ != nullptr, "no episode started");
    return *ep_;
  }
  std::mt19937_64& rng() { return rng_; }

  int prev_action = -1;
  double reward_sum = 0;

 private:
  world::EpisodeConfig cfg_;
  std::mt19937_64 rng_;
  std::unique_ptr<world::NavTask> task_;
  std::unique_ptr<world::Episode> ep_;
};

// Up to `horizon` steps with actions sampled from the current policy. Stops
// early at the end of an episode; the next call starts a fresh one.
inline Rollout collect_rollout(const nav::BoundModel<double>& m, EnvSlot& slot, const TaskSource& next_task,
                               int horizon) {
  require(horizon >= 1, "rollout horizon must be >= 1");
  const auto& cfg = m.config();
  const auto v = cfg.variant;
  Rollout r;
  for (int k = 0; k < horizon; ++k) {
    if (!slot.active()) slot.start(next_task(slot.rng()));
    auto& ep = slot.episode();
    RolloutStep s;
    s.input = nav::make_input<double>(ep.observation(), ep.task().target, slot.prev_action, cfg);
    s.prev_action = slot.prev_action;
    s.t = ep.t();
    s.geo_before = ep.geodesic();
    if (nav::uses_expert(v)) {
      const auto ex = ep.expert_tuple();
      s.expert_action = world::index_of(ex.action);
      if (nav::uses_reconstruction(v)) s.next_front = nav::to_vec<double>(ex.next_observation.views[0].data);
    }
    if (v == nav::Variant::kRandom) {
      s.action = std::uniform_int_distribution<int>(0, nav::kActions - 1)(slot.rng());
    } else {
      if (nav::is_generative(v)) s.noise = nav::draw_noise<double>(slot.rng(), cfg.latent_dim);
      const auto fw = m.forward(s.input, s.noise);
      s.action = nav::sample_categorical(fw.logits, slot.rng());
    }
    const auto res = ep.step(world::action_from_index(s.action));
    s.reward = res.reward;
    s.geo_after = res.geodesic_after;
    s.collided = res.collided;
    s.success = res.success;
    s.done = res.done;
    slot.prev_action = s.action;
    slot.reward_sum += res.reward;
    r.steps.push_back(std::move(s));
    if (res.done) {
      r.finished.push_back({ep.success(), ep.t(), slot.reward_sum, ep.task().scene_id()});
      break;
    }
  }
  if (!r.steps.back().done && v != nav::Variant::kRandom) {
    auto& ep = slot.episode();
    const auto in = nav::make_input<double>(ep.observation(), ep.task().target, slot.prev_action, cfg);
    const nav::Vec<double> noise =
        nav::is_generative(v) ? nav::draw_noise<double>(slot.rng(), cfg.latent_dim) : nav::Vec<double>();
    r.bootstrap = m.forward(in, noise).value;
  }
  return r;
}

// R_t = sum_{i=0}^{T-t} tau^i r_{t+i} + tau^{T-t+1} bootstrap
inline std::vector<double> compute_returns(const std::vector<double>& rewards, double bootstrap, double tau) {
  std::vector<double> out(rewards.size());
  double acc = bootstrap;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    acc = rewards[i] + tau * acc;
    out[i] = acc;
  }
  return out;
}

inline std::vector<double> compute_returns(const Rollout& r, double tau) {
  std::vector<double> rewards;
  rewards.reserve(r.steps.size());
  for (const auto& s : r.steps) rewards.push_back(s.reward);
  return compute_returns(rewards, r.steps.empty() || r.steps.back().done ? 0.0 : r.bootstrap, tau);
}

}  // namespace mirnav::train
