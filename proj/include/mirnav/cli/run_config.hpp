#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "mirnav/errors.hpp"
#include "mirnav/evalkit/tasks.hpp"
#include "mirnav/navmodel/model.hpp"
#include "mirnav/trainer/config.hpp"

namespace mirnav::cli {

namespace fs = std::filesystem;

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kRunRootEnv = "MIRNAV_RUN_ROOT";

// Procedural scene set.
struct WorldSpec {
  int train_scenes = 20;
  int val_scenes = 5;
  int test_scenes = 5;
  int min_size = 9;
  int max_size = 13;
  double min_density = 0.05;
  double max_density = 0.20;
  int classes = 6;
  int objects_per_scene = 4;
  double cell_size_m = 0.5;
  std::uint64_t seed = 1;

  void validate() const {
    if (train_scenes < 1 || val_scenes < 1 || test_scenes < 1) throw ConfigError("every scene split needs >= 1 scene");
    if (min_size < 5 || max_size < min_size) throw ConfigError("scene sizes must satisfy 5 <= min_size <= max_size");
    if (!(min_density >= 0 && max_density >= min_density && max_density <= 0.35))
      throw ConfigError("densities must satisfy 0 <= min_density <= max_density <= 0.35");
    if (classes < 1 || objects_per_scene < 1 || objects_per_scene > classes)
      throw ConfigError("objects_per_scene must be in [1, classes]");
    if (!(cell_size_m > 0)) throw ConfigError("cell_size_m must be positive");
  }
};

struct EvalSpec {
  std::string split = "unseen_known_targets";
  int n = 100;
  std::uint64_t seed = 7;
  bool auto_stop = false;
  std::string mode = "greedy";  // greedy | sample
  int threads = 1;
  int min_geo = 2;

  void validate() const {
    eval::parse_split(split);
    if (n < 1) throw ConfigError("eval.n must be positive");
    if (mode != "greedy" && mode != "sample") throw ConfigError("eval.mode must be greedy or sample");
    if (threads < 1) throw ConfigError("eval.threads must be >= 1");
    if (min_geo < 0) throw ConfigError("eval.min_geo must be >= 0");
  }
};

struct RunConfig {
  int schema_version = kSchemaVersion;
  std::string expert_mode = "recompute";
  WorldSpec world;
  train::TrainConfig train;
  EvalSpec eval;
  std::string scenes_dir = "scenes";
  std::string run_dir = "runs/default";

  void validate() const {
    if (schema_version != kSchemaVersion)
      throw ConfigError("unsupported schema_version " + std::to_string(schema_version));
    if (expert_mode != "recompute") throw ConfigError("expert_mode: only \"recompute\" is implemented");
    world.validate();
    train.validate();
    eval.validate();
    if (train.model.classes != world.classes) throw ConfigError("model classes must equal world classes");
  }
};

inline nlohmann::json to_json(const WorldSpec& w) {
  return {{"train_scenes", w.train_scenes}, {"val_scenes", w.val_scenes},   {"test_scenes", w.test_scenes},
          {"min_size", w.min_size},         {"max_size", w.max_size},       {"min_density", w.min_density},
          {"max_density", w.max_density},   {"classes", w.classes},         {"objects_per_scene", w.objects_per_scene},
          {"cell_size_m", w.cell_size_m},   {"seed", w.seed}};
}

inline nlohmann::json to_json(const EvalSpec& e) {
  return {{"split", e.split},   {"n", e.n},         {"seed", e.seed},      {"auto_stop", e.auto_stop},
          {"mode", e.mode},     {"threads", e.threads}, {"min_geo", e.min_geo}};
}

inline nlohmann::json to_json(const RunConfig& c) {
  return {{"schema_version", c.schema_version},
          {"expert_mode", c.expert_mode},
          {"world", to_json(c.world)},
          {"train", train::to_json(c.train)},
          {"eval", to_json(c.eval)},
          {"scenes_dir", c.scenes_dir},
          {"run_dir", c.run_dir}};
}

// Missing keys keep their defaults; unknown top-level keys are rejected.
inline RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig c;
  try {
    if (!j.is_object()) throw ConfigError("run config must be a JSON object");
    for (const auto& [k, _] : j.items())
      if (k != "schema_version" && k != "expert_mode" && k != "world" && k != "train" && k != "eval" &&
          k != "scenes_dir" && k != "run_dir")
        throw ConfigError("unknown config key \"" + k + "\"");
    c.schema_version = j.value("schema_version", c.schema_version);
    c.expert_mode = j.value("expert_mode", c.expert_mode);
    if (j.contains("world")) {
      const auto& w = j.at("world");
      auto& o = c.world;
      o.train_scenes = w.value("train_scenes", o.train_scenes);
      o.val_scenes = w.value("val_scenes", o.val_scenes);
      o.test_scenes = w.value("test_scenes", o.test_scenes);
      o.min_size = w.value("min_size", o.min_size);
      o.max_size = w.value("max_size", o.max_size);
      o.min_density = w.value("min_density", o.min_density);
      o.max_density = w.value("max_density", o.max_density);
      o.classes = w.value("classes", o.classes);
      o.objects_per_scene = w.value("objects_per_scene", o.objects_per_scene);
      o.cell_size_m = w.value("cell_size_m", o.cell_size_m);
      o.seed = w.value("seed", o.seed);
    }
    if (j.contains("train")) c.train = train::train_config_from_json(j.at("train"));
    if (j.contains("eval")) {
      const auto& e = j.at("eval");
      auto& o = c.eval;
      o.split = e.value("split", o.split);
      o.n = e.value("n", o.n);
      o.seed = e.value("seed", o.seed);
      o.auto_stop = e.value("auto_stop", o.auto_stop);
      o.mode = e.value("mode", o.mode);
      o.threads = e.value("threads", o.threads);
      o.min_geo = e.value("min_geo", o.min_geo);
    }
    c.scenes_dir = j.value("scenes_dir", c.scenes_dir);
    c.run_dir = j.value("run_dir", c.run_dir);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad run config: ") + e.what());
  }
  c.validate();
  return c;
}

inline nlohmann::json read_json_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot read " + p.string());
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed JSON in " + p.string() + ": " + e.what());
  }
}

inline RunConfig load_run_config(const fs::path& p) { return run_config_from_json(read_json_file(p)); }

// Relative paths hang off $MIRNAV_RUN_ROOT when it is set.
inline fs::path resolve_path(const std::string& p) {
  const fs::path path(p);
  if (path.is_absolute()) return path;
  if (const char* root = std::getenv(kRunRootEnv); root && *root) return fs::path(root) / path;
  return path;
}

}  // namespace mirnav::cli
