#pragma once

#include <array>
#include <optional>
#include <string_view>
#include <vector>

#include "mirnav/world/scene.hpp"

namespace mirnav::world {

// Fixed global action order; indices are used as network outputs.
enum class Action : int {
  kForward = 0,
  kBack = 1,
  kLeft = 2,
  kRight = 3,
  kRotateCcw = 4,
  kRotateCw = 5,
  kStop = 6,
};

inline constexpr int kNumActions = 7;
inline constexpr std::array<Action, kNumActions> kAllActions{Action::kForward,   Action::kBack,     Action::kLeft,
                                                             Action::kRight,     Action::kRotateCcw, Action::kRotateCw,
                                                             Action::kStop};

constexpr int index_of(Action a) { return static_cast<int>(a); }
inline Action action_from_index(int i) {
  require(i >= 0 && i < kNumActions, "action index out of range");
  return static_cast<Action>(i);
}

constexpr std::string_view action_name(Action a) {
  constexpr std::array<std::string_view, kNumActions> names{"forward", "back", "left", "right", "rotate_ccw",
                                                            "rotate_cw", "stop"};
  return names[static_cast<std::size_t>(a)];
}

// Heading in quarter turns counter-clockwise from +x: 0=0°, 1=90°, 2=180°, 3=270°.
struct Pose {
  int x = 0;
  int y = 0;
  int heading = 0;

  CellPos cell() const { return {x, y}; }
  friend bool operator==(const Pose&, const Pose&) = default;
  friend auto operator<=>(const Pose&, const Pose&) = default;
};

// Unit step for a heading; 90° (ccw) is +y.
constexpr CellPos heading_dir(int heading) {
  switch (((heading % 4) + 4) % 4) {
    case 0: return {1, 0};
    case 1: return {0, 1};
    case 2: return {-1, 0};
    default: return {0, -1};
  }
}

// Destination of a move or rotation, ignoring walls. Stop returns the pose.
constexpr Pose apply_kinematics(Pose p, Action a) {
  auto offset = [&](int rel) {
    auto d = heading_dir(p.heading + rel);
    return Pose{p.x + d.x, p.y + d.y, p.heading};
  };
  switch (a) {
    case Action::kForward: return offset(0);
    case Action::kLeft: return offset(1);
    case Action::kBack: return offset(2);
    case Action::kRight: return offset(3);
    case Action::kRotateCcw: return {p.x, p.y, (p.heading + 1) % 4};
    case Action::kRotateCw: return {p.x, p.y, (p.heading + 3) % 4};
    case Action::kStop: return p;
  }
  return p;
}

// Pose-level action graph over the free cells of a scene. Rotations always
// exist; a move edge exists iff its destination is free.
class NavGraph {
 public:
  struct Edge {
    Action action;
    int to;
  };

  explicit NavGraph(const Scene& scene) : width_(scene.width()), height_(scene.height()) {
    node_of_.assign(static_cast<std::size_t>(width_ * height_ * 4), -1);
    for (auto c : scene.free_cells())
      for (int h = 0; h < 4; ++h) {
        node_of_[slot({c.x, c.y, h})] = static_cast<int>(poses_.size());
        poses_.push_back({c.x, c.y, h});
      }
    edges_.resize(poses_.size());
    for (std::size_t n = 0; n < poses_.size(); ++n) {
      for (int ai = 0; ai < kNumActions - 1; ++ai) {
        auto a = static_cast<Action>(ai);
        Pose dst = apply_kinematics(poses_[n], a);
        if (!scene.free(dst.cell())) continue;
        edges_[n].push_back({a, node(dst)});
      }
    }
  }

  int size() const { return static_cast<int>(poses_.size()); }
  const Pose& pose(int n) const { return poses_[static_cast<std::size_t>(n)]; }
  const std::vector<Edge>& edges(int n) const { return edges_[static_cast<std::size_t>(n)]; }
  std::size_t edge_count() const {
    std::size_t e = 0;
    for (const auto& v : edges_) e += v.size();
    return e;
  }

  // Node index of a pose, or -1 when the pose is not on a free cell.
  int node(const Pose& p) const {
    if (p.x < 0 || p.y < 0 || p.x >= width_ || p.y >= height_ || p.heading < 0 || p.heading > 3) return -1;
    return node_of_[slot(p)];
  }

  std::optional<int> successor(int n, Action a) const {
    for (const auto& e : edges(n))
      if (e.action == a) return e.to;
    return std::nullopt;
  }

 private:
  std::size_t slot(const Pose& p) const { return static_cast<std::size_t>((p.y * width_ + p.x) * 4 + p.heading); }

  int width_;
  int height_;
  std::vector<Pose> poses_;
  std::vector<int> node_of_;
  std::vector<std::vector<Edge>> edges_;
};

}  // namespace mirnav::world
