#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "mirnav/world/nav_graph.hpp"

namespace mirnav::world {

struct RenderConfig {
  int rays = 9;
  double fov_deg = 90.0;
  double d_max = 8.0;  // cells
  int classes = 6;     // K

  int ray_stride() const { return classes + 2; }
  int view_dim() const { return rays * ray_stride(); }
  friend bool operator==(const RenderConfig&, const RenderConfig&) = default;
};

// One egocentric depth+class scan. Ray i is laid out as
// [depth, wall, class_1, ..., class_K]; rays run left to right.
struct View {
  std::vector<double> data;

  double depth(const RenderConfig& cfg, int ray) const { return data[static_cast<std::size_t>(ray * cfg.ray_stride())]; }
  // 0 for wall, 1..K for objects.
  int hit_class(const RenderConfig& cfg, int ray) const {
    const auto base = static_cast<std::size_t>(ray * cfg.ray_stride() + 1);
    for (int c = 0; c <= cfg.classes; ++c)
      if (data[base + static_cast<std::size_t>(c)] > 0.5) return c;
    return 0;
  }
  bool sees_class(const RenderConfig& cfg, int class_id) const {
    for (int r = 0; r < cfg.rays; ++r)
      if (hit_class(cfg, r) == class_id) return true;
    return false;
  }
  friend bool operator==(const View&, const View&) = default;
};

// Views at relative headings 0°, 90°, 180°, 270° (front, left, back, right).
struct Observation {
  std::array<View, 4> views;
  const View& front() const { return views[0]; }
  friend bool operator==(const Observation&, const Observation&) = default;
};

struct RayHit {
  double depth_cells;  // forward (camera-axis) distance to the hit face plus half a cell
  int class_id;        // 0 wall, 1..K object
  bool hit;
};

// Grid DDA in the agent's local frame (x forward, y left). Cells are unit
// squares centred on integer coordinates, the agent at the origin. Tracing in
// the local frame makes rendering exactly equivariant under 90° rotations.
inline RayHit trace_ray(const Scene& scene, const Pose& pose, double offset_rad, double d_max) {
  const CellPos fwd = heading_dir(pose.heading);
  const CellPos left = heading_dir(pose.heading + 1);
  auto lookup = [&](int f, int l) {
    CellPos c{pose.x + f * fwd.x + l * left.x, pose.y + f * fwd.y + l * left.y};
    return c;
  };
  const double dx = std::cos(offset_rad);
  const double dy = std::sin(offset_rad);
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const int step_x = dx >= 0 ? 1 : -1;
  const int step_y = dy >= 0 ? 1 : -1;
  const double delta_x = dx != 0.0 ? 1.0 / std::abs(dx) : kInf;
  const double delta_y = dy != 0.0 ? 1.0 / std::abs(dy) : kInf;
  double t_max_x = dx != 0.0 ? 0.5 / std::abs(dx) : kInf;
  double t_max_y = dy != 0.0 ? 0.5 / std::abs(dy) : kInf;
  int cx = 0;
  int cy = 0;
  for (;;) {
    double t;
    if (t_max_x <= t_max_y) {
      cx += step_x;
      t = t_max_x;
      t_max_x += delta_x;
    } else {
      cy += step_y;
      t = t_max_y;
      t_max_y += delta_y;
    }
    const double depth = t * dx + 0.5;
    if (depth > d_max || !std::isfinite(t)) return {d_max, 0, false};
    const CellPos c = lookup(cx, cy);
    if (!scene.free(c)) return {depth, scene.object_at(c), true};
  }
}

inline View render_view(const Scene& scene, const Pose& pose, const RenderConfig& cfg = {}) {
  View v;
  v.data.assign(static_cast<std::size_t>(cfg.view_dim()), 0.0);
  for (int r = 0; r < cfg.rays; ++r) {
    const double offset_deg = cfg.fov_deg / 2.0 - cfg.fov_deg * (r + 0.5) / cfg.rays;
    const auto hit = trace_ray(scene, pose, offset_deg * std::numbers::pi / 180.0, cfg.d_max);
    const auto base = static_cast<std::size_t>(r * cfg.ray_stride());
    v.data[base] = std::min(hit.depth_cells, cfg.d_max) / cfg.d_max;
    const int cls = (hit.class_id >= 0 && hit.class_id <= cfg.classes) ? hit.class_id : 0;
    v.data[base + 1 + static_cast<std::size_t>(cls)] = 1.0;
  }
  return v;
}

inline Observation observe(const Scene& scene, const Pose& pose, const RenderConfig& cfg = {}) {
  Observation o;
  for (int k = 0; k < 4; ++k) o.views[static_cast<std::size_t>(k)] = render_view(scene, {pose.x, pose.y, (pose.heading + k) % 4}, cfg);
  return o;
}

// True when `class_id` is hit by a front-view ray no farther than `max_depth_cells`.
inline bool sees_within(const Scene& scene, const Pose& pose, int class_id, double max_depth_cells,
                        const RenderConfig& cfg = {}) {
  for (int r = 0; r < cfg.rays; ++r) {
    const double offset_deg = cfg.fov_deg / 2.0 - cfg.fov_deg * (r + 0.5) / cfg.rays;
    const auto hit = trace_ray(scene, pose, offset_deg * std::numbers::pi / 180.0, cfg.d_max);
    if (hit.hit && hit.class_id == class_id && hit.depth_cells <= max_depth_cells) return true;
  }
  return false;
}

}  // namespace mirnav::world
