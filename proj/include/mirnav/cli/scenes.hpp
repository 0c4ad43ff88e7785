#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mirnav/cli/run_config.hpp"
#include "mirnav/evalkit/report.hpp"
#include "mirnav/trainer/curriculum.hpp"
#include "mirnav/world/env.hpp"

namespace mirnav::cli {

inline constexpr std::array<const char*, 3> kSceneSplits{"train", "val", "test"};

// 64-bit FNV-1a, printed as 16 hex digits.
inline std::string content_hash(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct GeneratedScenes {
  std::array<eval::ScenePool, 3> pools;  // train, val, test
};

// Scene ids run 0.. across train, val, test in that order. Each scene draws
// its side length and wall density from the world spec's ranges.
inline GeneratedScenes generate_scene_sets(const WorldSpec& spec) {
  spec.validate();
  GeneratedScenes out;
  std::mt19937_64 rng(spec.seed);
  std::uniform_int_distribution<int> size(spec.min_size, spec.max_size);
  std::uniform_real_distribution<double> density(spec.min_density, spec.max_density);
  const std::array<int, 3> counts{spec.train_scenes, spec.val_scenes, spec.test_scenes};
  int id = 0;
  for (std::size_t s = 0; s < 3; ++s) {
    for (int i = 0; i < counts[s]; ++i, ++id) {
      const int side = size(rng);
      const double d = density(rng);
      auto scene = world::generate_scene(mix_seed(spec.seed, static_cast<std::uint64_t>(id)),
                                         {side, side, d, spec.classes, spec.objects_per_scene}, id, spec.cell_size_m);
      out.pools[s].push_back(std::make_shared<const world::SceneBundle>(std::move(scene)));
    }
  }
  return out;
}

inline std::string scene_file_name(int id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scene_%03d.json", id);
  return buf;
}

inline std::string manifest_hash(nlohmann::json m) {
  m.erase("hash");
  return content_hash(m.dump());
}

// Writes <out>/<split>/scene_NNN.json and <out>/manifest.json.
inline nlohmann::json write_scene_sets(const WorldSpec& spec, const fs::path& out_dir, int curriculum_groups = 4) {
  const auto gen = generate_scene_sets(spec);
  nlohmann::json m;
  m["schema_version"] = kSchemaVersion;
  m["world"] = to_json(spec);
  m["curriculum_groups"] = curriculum_groups;
  nlohmann::json counts, splits;
  for (std::size_t s = 0; s < 3; ++s) {
    const auto& pool = gen.pools[s];
    const auto groups = train::difficulty_groups(pool, curriculum_groups);
    const fs::path dir = out_dir / kSceneSplits[s];
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create " + dir.string() + ": " + ec.message());
    auto entries = nlohmann::json::array();
    for (std::size_t i = 0; i < pool.size(); ++i) {
      const auto& sc = pool[i]->scene;
      const std::string text = world::to_json(sc).dump(1) + "\n";
      const std::string rel = std::string(kSceneSplits[s]) + "/" + scene_file_name(sc.id());
      eval::write_text(out_dir / rel, text);
      entries.push_back({{"id", sc.id()},
                         {"file", rel},
                         {"hash", content_hash(text)},
                         {"width", sc.width()},
                         {"height", sc.height()},
                         {"free_cells", sc.free_count()},
                         {"difficulty", train::scene_difficulty(sc)},
                         {"difficulty_group", groups[i] + 1}});
    }
    counts[kSceneSplits[s]] = pool.size();
    splits[kSceneSplits[s]] = entries;
  }
  m["counts"] = counts;
  m["splits"] = splits;
  m["hash"] = manifest_hash(m);
  eval::write_text(out_dir / "manifest.json", m.dump(2) + "\n");
  return m;
}

inline nlohmann::json read_manifest(const fs::path& dir) {
  if (!fs::exists(dir / "manifest.json"))
    throw InfeasibleError("no scene manifest in " + dir.string() + " (run gen-scenes first)");
  const auto m = read_json_file(dir / "manifest.json");
  if (!m.contains("hash") || m.at("hash") != manifest_hash(m))
    throw ConfigError("manifest hash mismatch in " + (dir / "manifest.json").string());
  return m;
}

// Loads one split, checking every file against its recorded hash.
inline eval::ScenePool load_scene_split(const fs::path& dir, const std::string& split) {
  const auto m = read_manifest(dir);
  if (!m.at("splits").contains(split)) throw ConfigError("manifest has no split \"" + split + "\"");
  eval::ScenePool pool;
  for (const auto& e : m.at("splits").at(split)) {
    const fs::path p = dir / e.at("file").get<std::string>();
    const std::string text = read_bytes(p);
    if (content_hash(text) != e.at("hash").get<std::string>()) throw ConfigError("scene file modified: " + p.string());
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& ex) {
      throw ConfigError("malformed scene file " + p.string() + ": " + ex.what());
    }
    pool.push_back(std::make_shared<const world::SceneBundle>(world::scene_from_json(j)));
  }
  return pool;
}

// Scene split that serves an evaluation split.
inline std::string scene_split_for(eval::Split s) {
  switch (s) {
    case eval::Split::kTrain:
      return "train";
    case eval::Split::kVal:
      return "val";
    default:
      return "test";
  }
}

}  // namespace mirnav::cli
