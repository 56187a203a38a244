#pragma once

#include <string>
#include <vector>

#include "simtreels/errors.hpp"
#include "simtreels/sensor.hpp"
#include "simtreels/stand.hpp"
#include "simtreels/trajectory.hpp"
#include "simtreels/treegen.hpp"

namespace simtreels {

/// Bundled tree species. Counts below are per tree at 0.01 m spacing;
/// the orchard species land near 8e5 points so a 5x5 stand reaches the
/// twenty-million-point scale.
inline TreeDefinition preset_tree(const std::string& name) {
  TreeDefinition def;
  def.name = name;
  if (name == "avocado") {
    // Broad dense canopy on a short trunk.
    def.levels = 3;
    def.trunk_height = 2.2;
    def.trunk_base_radius = 0.18;
    def.leaves_per_tip = 30;
    def.leaf_radius = 0.09;
    def.level_params.resize(3);
    def.level_params[0].taper = {0.65, 0.05};
    def.level_params[0].curvature = {8.0, 5.0};
    def.level_params[1].child_count = {8.0, 1.0};
    def.level_params[1].length_ratio = {0.85, 0.10};
    def.level_params[1].base_radius_ratio = {0.55, 0.05};
    def.level_params[1].taper = {0.55, 0.05};
    def.level_params[1].down_angle = {55.0, 15.0};
    def.level_params[1].curvature = {25.0, 10.0};
    def.level_params[1].start_fraction = {0.55, 0.35};
    def.level_params[2].child_count = {10.0, 2.0};
    def.level_params[2].length_ratio = {0.60, 0.10};
    def.level_params[2].base_radius_ratio = {0.50, 0.05};
    def.level_params[2].taper = {0.50, 0.10};
    def.level_params[2].down_angle = {45.0, 15.0};
    def.level_params[2].curvature = {25.0, 10.0};
    def.level_params[2].start_fraction = {0.50, 0.40};
  } else if (name == "macadamia") {
    // Taller and more upright than the avocado, similar density.
    def.levels = 3;
    def.trunk_height = 2.8;
    def.trunk_base_radius = 0.16;
    def.leaves_per_tip = 26;
    def.leaf_radius = 0.08;
    def.level_params.resize(3);
    def.level_params[0].taper = {0.60, 0.05};
    def.level_params[0].curvature = {6.0, 4.0};
    def.level_params[1].child_count = {9.0, 1.0};
    def.level_params[1].length_ratio = {0.75, 0.10};
    def.level_params[1].base_radius_ratio = {0.55, 0.05};
    def.level_params[1].taper = {0.55, 0.05};
    def.level_params[1].down_angle = {40.0, 10.0};
    def.level_params[1].curvature = {20.0, 10.0};
    def.level_params[1].start_fraction = {0.50, 0.35};
    def.level_params[2].child_count = {9.0, 2.0};
    def.level_params[2].length_ratio = {0.55, 0.10};
    def.level_params[2].base_radius_ratio = {0.50, 0.05};
    def.level_params[2].taper = {0.50, 0.10};
    def.level_params[2].down_angle = {50.0, 15.0};
    def.level_params[2].curvature = {25.0, 10.0};
    def.level_params[2].start_fraction = {0.50, 0.40};
  } else if (name == "aspen") {
    // Slender forest tree: long bare trunk, sparse crown.
    def.levels = 3;
    def.trunk_height = 5.0;
    def.trunk_base_radius = 0.12;
    def.leaves_per_tip = 8;
    def.leaf_radius = 0.06;
    def.level_params.resize(3);
    def.level_params[0].taper = {0.45, 0.05};
    def.level_params[0].curvature = {5.0, 4.0};
    def.level_params[1].child_count = {12.0, 2.0};
    def.level_params[1].length_ratio = {0.35, 0.08};
    def.level_params[1].base_radius_ratio = {0.40, 0.05};
    def.level_params[1].taper = {0.50, 0.10};
    def.level_params[1].down_angle = {60.0, 15.0};
    def.level_params[1].curvature = {15.0, 10.0};
    def.level_params[1].start_fraction = {0.60, 0.35};
    def.level_params[2].child_count = {6.0, 1.0};
    def.level_params[2].length_ratio = {0.50, 0.10};
    def.level_params[2].base_radius_ratio = {0.45, 0.05};
    def.level_params[2].taper = {0.50, 0.10};
    def.level_params[2].down_angle = {50.0, 15.0};
    def.level_params[2].curvature = {20.0, 10.0};
    def.level_params[2].start_fraction = {0.50, 0.40};
  } else {
    throw ConfigError("unknown tree preset '" + name + "'");
  }
  def.validate();
  return def;
}

inline std::vector<std::string> tree_preset_names() {
  return {"avocado", "macadamia", "aspen"};
}

/// 5x5 orchard at 6 m in-row and 10 m between-row spacing.
inline OrchardParams preset_orchard_6x10() {
  OrchardParams p;
  p.rows = 5;
  p.trees_per_row = 5;
  p.tree_spacing = 6.0;
  p.row_spacing = 10.0;
  return p;
}

/// Nine trees dart-thrown into 30 x 30 m with 6 m minimum spacing.
inline ForestParams preset_forest_min6() {
  ForestParams p;
  p.extent_x = 30.0;
  p.extent_y = 30.0;
  p.tree_count = 9;
  p.min_spacing = 6.0;
  return p;
}

/// Bundled sensors: the wide single-plane scanner and its nine-beam
/// counterpart with a 30 degree vertical fan.
inline SensorShape preset_sensor(const std::string& name) {
  if (name == "plane-270")
    return build_single_plane(270.0, 0.675, 15.0, 0.02);
  if (name == "puck-9beam")
    return build_multi_plane(270.0, 0.675, 15.0, 0.02, 9, 30.0);
  throw ConfigError("unknown sensor preset '" + name + "'");
}

inline std::vector<std::string> sensor_preset_names() {
  return {"plane-270", "puck-9beam"};
}

inline std::vector<std::string> trajectory_preset_names() {
  return {"handheld-loop", "ground-rows", "aerial-grid"};
}

/// Stand context a trajectory preset may need: orchard geometry for the
/// row-following walk, a bounding extent for the aerial grid.
struct StandContext {
  bool is_orchard = false;
  OrchardParams orchard;
  double extent_x = 30.0;
  double extent_y = 30.0;
};

inline StandContext orchard_context(const OrchardParams& p) {
  StandContext ctx;
  ctx.is_orchard = true;
  ctx.orchard = p;
  ctx.extent_x = (p.rows - 1) * p.row_spacing + 10.0;
  ctx.extent_y = (p.trees_per_row - 1) * p.tree_spacing + 10.0;
  return ctx;
}

inline StandContext forest_context(const ForestParams& p) {
  StandContext ctx;
  ctx.is_orchard = false;
  ctx.extent_x = p.extent_x + 10.0;
  ctx.extent_y = p.extent_y + 10.0;
  return ctx;
}

inline Trajectory preset_trajectory(const std::string& name,
                                    const StandContext& ctx) {
  if (name == "handheld-loop")
    return traj_handheld_loop(Eigen::Vector3d::Zero());
  if (name == "ground-rows") {
    if (!ctx.is_orchard)
      throw ConfigError("ground-rows trajectory needs an orchard stand");
    return traj_ground_rows(ctx.orchard);
  }
  if (name == "aerial-grid")
    return traj_aerial_grid(ctx.extent_x, ctx.extent_y);
  throw ConfigError("unknown trajectory preset '" + name + "'");
}

}  // namespace simtreels
