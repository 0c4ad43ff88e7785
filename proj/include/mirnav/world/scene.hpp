#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <queue>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mirnav/errors.hpp"

namespace mirnav::world {

enum class Cell : std::uint8_t { kFree = 0, kWall = 1 };

struct CellPos {
  int x = 0;
  int y = 0;
  friend bool operator==(const CellPos&, const CellPos&) = default;
  friend auto operator<=>(const CellPos&, const CellPos&) = default;
};

struct SceneObject {
  int class_id = 0;  // 1..K
  CellPos cell;
  friend bool operator==(const SceneObject&, const SceneObject&) = default;
};

struct SceneSpec {
  int width = 11;
  int height = 11;
  double wall_density = 0.15;
  int object_classes = 6;     // K
  int objects_per_scene = 4;  // distinct classes, so at most K
};

inline constexpr std::array<CellPos, 4> kNeighbours4{{{1, 0}, {0, 1}, {-1, 0}, {0, -1}}};

// Grid world. Objects are mounted on wall cells that touch free space, so
// they never change connectivity; each class appears at most once.
class Scene {
 public:
  Scene() = default;
  Scene(int id, int width, int height, double cell_size_m = 0.5)
      : id_(id), width_(width), height_(height), cell_size_m_(cell_size_m),
        cells_(static_cast<std::size_t>(width * height), Cell::kWall) {}

  int id() const { return id_; }
  int width() const { return width_; }
  int height() const { return height_; }
  double cell_size_m() const { return cell_size_m_; }
  const std::vector<SceneObject>& objects() const { return objects_; }

  bool in_bounds(CellPos c) const { return c.x >= 0 && c.y >= 0 && c.x < width_ && c.y < height_; }
  Cell at(CellPos c) const {
    if (!in_bounds(c)) return Cell::kWall;
    return cells_[index(c)];
  }
  bool free(CellPos c) const { return at(c) == Cell::kFree; }
  void set(CellPos c, Cell v) { cells_.at(index(c)) = v; }

  // Class id of the object mounted on `c`, 0 for a bare wall or free cell.
  int object_at(CellPos c) const {
    for (const auto& o : objects_)
      if (o.cell == c) return o.class_id;
    return 0;
  }
  const SceneObject* find_class(int class_id) const {
    for (const auto& o : objects_)
      if (o.class_id == class_id) return &o;
    return nullptr;
  }
  void add_object(SceneObject o) { objects_.push_back(o); }

  std::vector<CellPos> free_cells() const {
    std::vector<CellPos> out;
    for (int y = 0; y < height_; ++y)
      for (int x = 0; x < width_; ++x)
        if (free({x, y})) out.push_back({x, y});
    return out;
  }
  int free_count() const { return static_cast<int>(std::count(cells_.begin(), cells_.end(), Cell::kFree)); }

  std::size_t index(CellPos c) const { return static_cast<std::size_t>(c.y * width_ + c.x); }

  friend bool operator==(const Scene&, const Scene&) = default;

 private:
  int id_ = 0;
  int width_ = 0;
  int height_ = 0;
  double cell_size_m_ = 0.5;
  std::vector<Cell> cells_;
  std::vector<SceneObject> objects_;
};

// Size of the 4-connected free component containing `seed` (0 if seed is a wall).
inline int component_size(const Scene& s, CellPos seed) {
  if (!s.free(seed)) return 0;
  std::vector<char> seen(static_cast<std::size_t>(s.width() * s.height()), 0);
  std::queue<CellPos> q;
  q.push(seed);
  seen[s.index(seed)] = 1;
  int n = 0;
  while (!q.empty()) {
    auto c = q.front();
    q.pop();
    ++n;
    for (auto d : kNeighbours4) {
      CellPos nb{c.x + d.x, c.y + d.y};
      if (s.free(nb) && !seen[s.index(nb)]) {
        seen[s.index(nb)] = 1;
        q.push(nb);
      }
    }
  }
  return n;
}

inline bool is_connected(const Scene& s) {
  auto cells = s.free_cells();
  if (cells.empty()) return false;
  return component_size(s, cells.front()) == static_cast<int>(cells.size());
}

// Checks every structural invariant; returns an empty string when valid.
inline std::string validate(const Scene& s) {
  if (s.width() < 3 || s.height() < 3) return "scene too small";
  for (int x = 0; x < s.width(); ++x)
    if (s.free({x, 0}) || s.free({x, s.height() - 1})) return "border cell is free";
  for (int y = 0; y < s.height(); ++y)
    if (s.free({0, y}) || s.free({s.width() - 1, y})) return "border cell is free";
  if (!is_connected(s)) return "free space is not connected";
  const auto& objs = s.objects();
  for (std::size_t i = 0; i < objs.size(); ++i) {
    const auto& o = objs[i];
    if (o.class_id < 1) return "object class must be >= 1";
    if (!s.in_bounds(o.cell) || s.free(o.cell)) return "object must be wall-mounted";
    bool touches = std::any_of(kNeighbours4.begin(), kNeighbours4.end(), [&](CellPos d) {
      return s.free({o.cell.x + d.x, o.cell.y + d.y});
    });
    if (!touches) return "object is not adjacent to free space";
    for (std::size_t j = 0; j < i; ++j) {
      if (objs[j].cell == o.cell) return "objects overlap";
      if (objs[j].class_id == o.class_id) return "duplicate object class";
    }
  }
  return {};
}

// Pure function of (seed, spec). Interior cells become walls with probability
// wall_density; free pockets cut off from the largest component are walled in.
// A layout is retried when the pocket fill removes too much space or the
// objects cannot be placed.
inline Scene generate_scene(std::uint64_t seed, const SceneSpec& spec, int id = 0, double cell_size_m = 0.5) {
  if (spec.width < 5 || spec.height < 5) throw ConfigError("scene width and height must be >= 5");
  if (!(spec.wall_density >= 0.0 && spec.wall_density <= 0.35)) throw ConfigError("wall_density must be in [0, 0.35]");
  if (spec.object_classes < 1) throw ConfigError("object_classes must be >= 1");
  if (spec.objects_per_scene < 0 || spec.objects_per_scene > spec.object_classes)
    throw ConfigError("objects_per_scene must be in [0, object_classes]");

  constexpr int kMaxAttempts = 64;
  std::mt19937_64 rng(seed);
  const int interior = (spec.width - 2) * (spec.height - 2);

  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Scene s(id, spec.width, spec.height, cell_size_m);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (int y = 1; y < spec.height - 1; ++y)
      for (int x = 1; x < spec.width - 1; ++x)
        s.set({x, y}, u01(rng) < spec.wall_density ? Cell::kWall : Cell::kFree);

    // keep the largest free component
    auto cells = s.free_cells();
    if (cells.empty()) continue;
    std::vector<int> label(static_cast<std::size_t>(spec.width * spec.height), -1);
    std::vector<int> sizes;
    for (auto c : cells) {
      if (label[s.index(c)] >= 0) continue;
      int lab = static_cast<int>(sizes.size());
      int n = 0;
      std::queue<CellPos> q;
      q.push(c);
      label[s.index(c)] = lab;
      while (!q.empty()) {
        auto cur = q.front();
        q.pop();
        ++n;
        for (auto d : kNeighbours4) {
          CellPos nb{cur.x + d.x, cur.y + d.y};
          if (s.free(nb) && label[s.index(nb)] < 0) {
            label[s.index(nb)] = lab;
            q.push(nb);
          }
        }
      }
      sizes.push_back(n);
    }
    int best = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
    for (auto c : cells)
      if (label[s.index(c)] != best) s.set(c, Cell::kWall);
    if (sizes[static_cast<std::size_t>(best)] * 2 < interior) continue;

    // wall-mounted object slots
    std::vector<CellPos> slots;
    for (int y = 0; y < spec.height; ++y)
      for (int x = 0; x < spec.width; ++x) {
        CellPos c{x, y};
        if (s.free(c)) continue;
        bool touches = std::any_of(kNeighbours4.begin(), kNeighbours4.end(),
                                   [&](CellPos d) { return s.free({x + d.x, y + d.y}); });
        if (touches) slots.push_back(c);
      }
    if (static_cast<int>(slots.size()) < spec.objects_per_scene) continue;

    std::vector<int> classes(static_cast<std::size_t>(spec.object_classes));
    for (int k = 0; k < spec.object_classes; ++k) classes[static_cast<std::size_t>(k)] = k + 1;
    std::shuffle(classes.begin(), classes.end(), rng);
    std::shuffle(slots.begin(), slots.end(), rng);
    for (int i = 0; i < spec.objects_per_scene; ++i)
      s.add_object({classes[static_cast<std::size_t>(i)], slots[static_cast<std::size_t>(i)]});
    return s;
  }
  throw GenerationError("scene generation failed after " + std::to_string(kMaxAttempts) +
                        " attempts (seed " + std::to_string(seed) + ")");
}

// ---------------------------------------------------------------------------
// Scene interchange format:
//   {"id": int, "width": int, "height": int, "cell_size_m": float,
//    "occupancy": ["#####", "#...#", ...],   // row y, '#' wall, '.' free
//    "objects": [{"class": int, "x": int, "y": int}, ...]}

// One of the 8 symmetries of the grid: k % 4 quarter turns, mirrored first
// when k >= 4. Keeps the scene id.
inline Scene dihedral(const Scene& s, int k) {
  require(k >= 0 && k < 8, "dihedral: k must be in [0, 8)");
  const int turns = k % 4;
  const bool mirror = k >= 4;
  const int w = s.width(), h = s.height();
  const bool swap = turns % 2 == 1;
  auto map = [&](CellPos c) {
    if (mirror) c.x = w - 1 - c.x;
    int cw = w, ch = h;
    for (int t = 0; t < turns; ++t) {
      c = {ch - 1 - c.y, c.x};
      std::swap(cw, ch);
    }
    return c;
  };
  Scene out(s.id(), swap ? h : w, swap ? w : h, s.cell_size_m());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out.set(map({x, y}), s.at({x, y}));
  for (const auto& o : s.objects()) out.add_object({o.class_id, map(o.cell)});
  return out;
}

inline nlohmann::json to_json(const Scene& s) {
  nlohmann::json j;
  j["id"] = s.id();
  j["width"] = s.width();
  j["height"] = s.height();
  j["cell_size_m"] = s.cell_size_m();
  auto rows = nlohmann::json::array();
  for (int y = 0; y < s.height(); ++y) {
    std::string row(static_cast<std::size_t>(s.width()), '#');
    for (int x = 0; x < s.width(); ++x)
      if (s.free({x, y})) row[static_cast<std::size_t>(x)] = '.';
    rows.push_back(row);
  }
  j["occupancy"] = rows;
  auto objs = nlohmann::json::array();
  for (const auto& o : s.objects()) objs.push_back({{"class", o.class_id}, {"x", o.cell.x}, {"y", o.cell.y}});
  j["objects"] = objs;
  return j;
}

inline Scene scene_from_json(const nlohmann::json& j) {
  try {
    int w = j.at("width").get<int>();
    int h = j.at("height").get<int>();
    Scene s(j.at("id").get<int>(), w, h, j.value("cell_size_m", 0.5));
    const auto& rows = j.at("occupancy");
    if (static_cast<int>(rows.size()) != h) throw ConfigError("occupancy row count != height");
    for (int y = 0; y < h; ++y) {
      auto row = rows[static_cast<std::size_t>(y)].get<std::string>();
      if (static_cast<int>(row.size()) != w) throw ConfigError("occupancy row width != width");
      for (int x = 0; x < w; ++x) {
        char c = row[static_cast<std::size_t>(x)];
        if (c != '#' && c != '.') throw ConfigError(std::string("bad occupancy char '") + c + "'");
        s.set({x, y}, c == '.' ? Cell::kFree : Cell::kWall);
      }
    }
    for (const auto& o : j.at("objects"))
      s.add_object({o.at("class").get<int>(), {o.at("x").get<int>(), o.at("y").get<int>()}});
    if (auto err = validate(s); !err.empty()) throw ConfigError("invalid scene " + std::to_string(s.id()) + ": " + err);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed scene json: ") + e.what());
  }
}

inline void save_scene(const Scene& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write scene file " + path);
  out << to_json(s).dump(1) << "\n";
}

inline Scene load_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read scene file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed scene file " + path + ": " + e.what());
  }
  return scene_from_json(j);
}

}  // namespace mirnav::world
