#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "simtreels/errors.hpp"

namespace simtreels {

/// Branch levels run 0 (trunk) to 3 (leaf).
inline constexpr std::uint8_t kMaxLevel = 3;

/// One labelled point. `scanline_id` / `pose_index` are valid only when
/// `has_scan` is set; source clouds carry geometry labels only.
struct LabelledPoint {
  Eigen::Vector3d position{0, 0, 0};
  std::uint32_t tree_id = 0;
  std::uint8_t level = 0;
  bool has_scan = false;
  std::uint32_t scanline_id = 0;
  std::uint32_t pose_index = 0;
};

/// Provenance carried with every generated cloud and echoed into files.
struct CloudMeta {
  std::uint64_t params_hash = 0;
  std::uint64_t seed = 0;
  std::string stage;
};

/// Column-wise point cloud with per-point tree ID and branch level.
/// `scanline_ids` / `pose_indices` are either empty or sized like
/// `positions` (scan provenance is all-or-nothing). Point order is part of
/// the contract: generators append deterministically and files round-trip
/// in order.
class LabelledCloud {
public:
  std::vector<Eigen::Vector3d> positions;
  std::vector<std::uint32_t> tree_ids;
  std::vector<std::uint8_t> levels;
  std::vector<std::uint32_t> scanline_ids;
  std::vector<std::uint32_t> pose_indices;
  CloudMeta meta;

  std::size_t size() const { return positions.size(); }
  bool empty() const { return positions.empty(); }
  bool has_scan_fields() const { return !scanline_ids.empty(); }

  void reserve(std::size_t n, bool scan_fields = false) {
    positions.reserve(n);
    tree_ids.reserve(n);
    levels.reserve(n);
    if (scan_fields) {
      scanline_ids.reserve(n);
      pose_indices.reserve(n);
    }
  }

  void append_source(const Eigen::Vector3d& pos, std::uint32_t tree_id,
                     std::uint8_t level) {
    check_level(level);
    check_finite(pos);
    if (!positions.empty() && has_scan_fields())
      throw ConfigError("cannot append source point to a scan cloud");
    positions.push_back(pos);
    tree_ids.push_back(tree_id);
    levels.push_back(level);
  }

  void append_scan(const Eigen::Vector3d& pos, std::uint32_t tree_id,
                   std::uint8_t level, std::uint32_t scanline_id,
                   std::uint32_t pose_index) {
    check_level(level);
    check_finite(pos);
    if (!positions.empty() && !has_scan_fields())
      throw ConfigError("cannot append scan point to a source cloud");
    positions.push_back(pos);
    tree_ids.push_back(tree_id);
    levels.push_back(level);
    scanline_ids.push_back(scanline_id);
    pose_indices.push_back(pose_index);
  }

  void append(const LabelledPoint& p) {
    if (p.has_scan)
      append_scan(p.position, p.tree_id, p.level, p.scanline_id, p.pose_index);
    else
      append_source(p.position, p.tree_id, p.level);
  }

  LabelledPoint point(std::size_t i) const {
    LabelledPoint p;
    p.position = positions[i];
    p.tree_id = tree_ids[i];
    p.level = levels[i];
    if (has_scan_fields()) {
      p.has_scan = true;
      p.scanline_id = scanline_ids[i];
      p.pose_index = pose_indices[i];
    }
    return p;
  }

  /// Appends all of `other` (same scan-field shape required).
  void append_cloud(const LabelledCloud& other) {
    if (other.empty()) return;
    if (!empty() && has_scan_fields() != other.has_scan_fields())
      throw ConfigError("cannot concatenate scan and source clouds");
    positions.insert(positions.end(), other.positions.begin(),
                     other.positions.end());
    tree_ids.insert(tree_ids.end(), other.tree_ids.begin(),
                    other.tree_ids.end());
    levels.insert(levels.end(), other.levels.begin(), other.levels.end());
    if (other.has_scan_fields()) {
      scanline_ids.insert(scanline_ids.end(), other.scanline_ids.begin(),
                          other.scanline_ids.end());
      pose_indices.insert(pose_indices.end(), other.pose_indices.begin(),
                          other.pose_indices.end());
    }
  }

  /// Axis-aligned bounds; throws on empty cloud.
  void bounds(Eigen::Vector3d& lo, Eigen::Vector3d& hi) const {
    if (empty()) throw EmptyCloudError("bounds of empty cloud");
    lo = hi = positions.front();
    for (const auto& p : positions) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
  }

private:
  static void check_level(std::uint8_t level) {
    if (level > kMaxLevel)
      throw ConfigError("branch level " + std::to_string(level) +
                        " out of range 0..3");
  }
  static void check_finite(const Eigen::Vector3d& pos) {
    if (!pos.allFinite())
      throw ConfigError("point coordinates must be finite");
  }
};

}  // namespace simtreels
