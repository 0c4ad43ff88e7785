#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mirnav/errors.hpp"
#include "mirnav/navmodel/config.hpp"

namespace mirnav::train {

struct CurriculumConfig {
  bool enabled = true;
  // Episode counts at which stages 1..4 begin; stage k exposes groups 1..k.
  std::vector<long> stage_starts{0, 1000, 2000, 3000};
};

struct TrainConfig {
  nav::ModelConfig model;
  int workers = 6;
  int unroll = 10;
  int batch = 60;  // steps aggregated per applied update
  double lr = 1e-4;
  double smoothing = 0.99;
  double rms_eps = 1e-8;
  double tau = 0.99;
  double clip_norm = 40.0;
  CurriculumConfig curriculum;
  std::uint64_t seed = 1;
  long max_episodes = 20000;
  long max_updates = 0;      // 0 = no limit
  double max_seconds = 0.0;  // 0 = no limit; wall-clock stops are not reproducible
  int val_every = 200;       // episodes
  int val_tasks = 100;
  int checkpoint_every = 10;  // validations between numbered checkpoints; 0 = none
  bool per_worker_updates = false;
  bool augment_symmetries = true;  // train on all 8 grid symmetries of each training scene
  bool serialize_workers = false;  // debug lock mode: one worker iteration at a time
  int max_steps = 100;
  int min_geo = 2;
  int known_classes = 4;
  int nonfinite_limit = 100;

  void validate() const {
    if (workers < 1) throw ConfigError("workers must be >= 1");
    if (unroll < 1) throw ConfigError("unroll must be >= 1");
    if (batch < 1) throw ConfigError("batch must be >= 1");
    if (!(lr > 0) || !(smoothing >= 0 && smoothing < 1) || !(rms_eps > 0)) throw ConfigError("bad optimizer settings");
    if (!(tau > 0 && tau <= 1)) throw ConfigError("tau must be in (0, 1]");
    if (!(clip_norm > 0)) throw ConfigError("clip_norm must be positive");
    if (max_episodes < 1) throw ConfigError("max_episodes must be >= 1");
    if (val_every < 1 || val_tasks < 1) throw ConfigError("validation cadence and size must be positive");
    if (max_steps < 1 || min_geo < 0) throw ConfigError("bad episode limits");
    if (known_classes < 1 || known_classes > model.classes) throw ConfigError("known_classes must be in [1, classes]");
    if (curriculum.enabled) {
      if (curriculum.stage_starts.empty() || curriculum.stage_starts.front() != 0)
        throw ConfigError("curriculum must start at episode 0");
      for (std::size_t i = 1; i < curriculum.stage_starts.size(); ++i)
        if (curriculum.stage_starts[i] < curriculum.stage_starts[i - 1])
          throw ConfigError("curriculum stage starts must be non-decreasing");
    }
    const auto& m = model;
    if (m.alpha < 0 || m.beta < 0 || m.gamma < 0 || m.omega < 0) throw ConfigError("loss weights must be non-negative");
  }
};

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"model", nav::to_json(c.model)},
          {"workers", c.workers},
          {"unroll", c.unroll},
          {"batch", c.batch},
          {"lr", c.lr},
          {"smoothing", c.smoothing},
          {"rms_eps", c.rms_eps},
          {"tau", c.tau},
          {"clip_norm", c.clip_norm},
          {"curriculum", {{"enabled", c.curriculum.enabled}, {"stage_starts", c.curriculum.stage_starts}}},
          {"seed", c.seed},
          {"max_episodes", c.max_episodes},
          {"max_updates", c.max_updates},
          {"max_seconds", c.max_seconds},
          {"val_every", c.val_every},
          {"val_tasks", c.val_tasks},
          {"checkpoint_every", c.checkpoint_every},
          {"per_worker_updates", c.per_worker_updates},
          {"augment_symmetries", c.augment_symmetries},
          {"serialize_workers", c.serialize_workers},
          {"max_steps", c.max_steps},
          {"min_geo", c.min_geo},
          {"known_classes", c.known_classes},
          {"nonfinite_limit", c.nonfinite_limit}};
}

// Missing keys keep the values in `c`.
inline TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c = {}) {
  try {
    if (j.contains("model")) c.model = nav::model_config_from_json(j.at("model"), c.model);
    c.workers = j.value("workers", c.workers);
    c.unroll = j.value("unroll", c.unroll);
    c.batch = j.value("batch", c.batch);
    c.lr = j.value("lr", c.lr);
    c.smoothing = j.value("smoothing", c.smoothing);
    c.rms_eps = j.value("rms_eps", c.rms_eps);
    c.tau = j.value("tau", c.tau);
    c.clip_norm = j.value("clip_norm", c.clip_norm);
    if (j.contains("curriculum")) {
      const auto& cu = j.at("curriculum");
      c.curriculum.enabled = cu.value("enabled", c.curriculum.enabled);
      if (cu.contains("stage_starts")) c.curriculum.stage_starts = cu.at("stage_starts").get<std::vector<long>>();
    }
    c.seed = j.value("seed", c.seed);
    c.max_episodes = j.value("max_episodes", c.max_episodes);
    c.max_updates = j.value("max_updates", c.max_updates);
    c.max_seconds = j.value("max_seconds", c.max_seconds);
    c.val_every = j.value("val_every", c.val_every);
    c.val_tasks = j.value("val_tasks", c.val_tasks);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.per_worker_updates = j.value("per_worker_updates", c.per_worker_updates);
    c.augment_symmetries = j.value("augment_symmetries", c.augment_symmetries);
    c.serialize_workers = j.value("serialize_workers", c.serialize_workers);
    c.max_steps = j.value("max_steps", c.max_steps);
    c.min_geo = j.value("min_geo", c.min_geo);
    c.known_classes = j.value("known_classes", c.known_classes);
    c.nonfinite_limit = j.value("nonfinite_limit", c.nonfinite_limit);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad train config: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace mirnav::train
