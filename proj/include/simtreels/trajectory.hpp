#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "simtreels/cloud.hpp"
#include "simtreels/cloud_io.hpp"
#include "simtreels/errors.hpp"
#include "simtreels/sensor.hpp"
#include "simtreels/stand.hpp"

namespace simtreels {

/// Sensor pose: where the origin sits and how the sensor frame is turned
/// into the world frame.
struct Pose {
  Eigen::Vector3d position{0, 0, 0};
  Eigen::Quaterniond orientation{1, 0, 0, 0};
};

/// Ordered pose sequence. Poses are spatial samples along a path (no
/// timestamps); generators guarantee consecutive positions at most one
/// step apart.
struct Trajectory {
  std::vector<Pose> poses;
  std::string kind;

  std::size_t size() const { return poses.size(); }
};

namespace traj_detail {

constexpr double kDegToRad = std::numbers::pi / 180.0;

/// World rotation with the sensor's +X sent to `forward` and +Z to `up`
/// as closely as right-handedness allows (forward and up orthonormal).
inline Eigen::Quaterniond frame_quat(const Eigen::Vector3d& x_axis,
                                     const Eigen::Vector3d& y_axis) {
  Eigen::Matrix3d rot;
  rot.col(0) = x_axis;
  rot.col(1) = y_axis;
  rot.col(2) = x_axis.cross(y_axis);
  return Eigen::Quaterniond(rot);
}

/// Heading toward `target` with the fan pitched by `pitch` (positive =
/// looking up). Sensor +X forward, +Z up.
inline Eigen::Quaterniond aim_at(const Eigen::Vector3d& pos,
                                 const Eigen::Vector3d& target,
                                 double pitch) {
  const double yaw =
      std::atan2(target.y() - pos.y(), target.x() - pos.x());
  return Eigen::Quaterniond(
      Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()) *
      Eigen::AngleAxisd(-pitch, Eigen::Vector3d::UnitY()));
}

inline int ceil_count(double a, double b) {
  return static_cast<int>(std::ceil(a / b - 1e-9));
}

}  // namespace traj_detail

/// Double closed loop around a target: a wide circle for context, a walk
/// inward, then a close circle against occlusion. Poses every `step` of
/// path length at constant height above the target, always facing the
/// target's vertical axis, with the 2D fan pitched up and down by a
/// sinusoid of amplitude osc_amp_deg and spatial period osc_period_m (the
/// oscillation that turns a 2D scanner into a 3D one). The default step
/// matches a profiler firing ~50 profiles/s while walking ~1 m/s.
inline Trajectory traj_handheld_loop(const Eigen::Vector3d& target,
                                     double r_wide = 7.0,
                                     double r_close = 2.5,
                                     double height = 1.5, double step = 0.02,
                                     double osc_amp_deg = 45.0,
                                     double osc_period_m = 0.5) {
  using namespace traj_detail;
  if (!(r_wide > r_close) || !(r_close > 0.0))
    throw ConfigError("need r_wide > r_close > 0");
  if (!(step > 0.0)) throw ConfigError("step must be > 0");
  if (!(osc_amp_deg >= 0.0) || !(osc_amp_deg < 90.0))
    throw ConfigError("osc_amp_deg must be in [0, 90)");
  if (!(osc_period_m > 0.0)) throw ConfigError("osc_period_m must be > 0");

  Trajectory traj;
  traj.kind = "handheld-loop";
  const double z = target.z() + height;
  std::size_t index = 0;
  auto push = [&](const Eigen::Vector3d& pos) {
    const double arclen = static_cast<double>(index++) * step;
    const double pitch =
        osc_amp_deg * kDegToRad *
        std::sin(2.0 * std::numbers::pi * arclen / osc_period_m);
    traj.poses.push_back({pos, aim_at(pos, target, pitch)});
  };

  auto circle = [&](double r, double start_angle) {
    const int n = ceil_count(2.0 * std::numbers::pi * r, step);
    for (int k = 0; k < n; ++k) {
      const double a = start_angle + k * step / r;
      push({target.x() + r * std::cos(a), target.y() + r * std::sin(a), z});
    }
    return start_angle + (n - 1) * step / r;  // angle of the last pose
  };

  const double handoff = circle(r_wide, 0.0);
  for (double r = r_wide - step; r > r_close + 1e-12; r -= step)
    push({target.x() + r * std::cos(handoff),
          target.y() + r * std::sin(handoff), z});
  circle(r_close, handoff);
  return traj;
}

/// Serpentine drive along every mid-row corridor of an orchard (plus the
/// two half-row corridors outside the first and last rows), at constant
/// height, the fan pointing up and sweeping perpendicular to travel.
/// Alternating passes run in opposite directions. The default step matches
/// a vehicle-mounted profiler at ~50 profiles/s and ~1 m/s.
inline Trajectory traj_ground_rows(const OrchardParams& orchard,
                                   double height = 1.8, double step = 0.02) {
  using namespace traj_detail;
  if (orchard.rows < 1 || orchard.trees_per_row < 1)
    throw ConfigError("orchard counts must be >= 1");
  if (!(orchard.tree_spacing > 0.0) || !(orchard.row_spacing > 0.0))
    throw ConfigError("orchard spacings must be > 0");
  if (!(step > 0.0)) throw ConfigError("step must be > 0");

  const double cx = 0.5 * (orchard.rows - 1) * orchard.row_spacing;
  const double length = (orchard.trees_per_row - 1) * orchard.tree_spacing;
  const int per_pass = sensor_detail::divide_count(length, step) + 1;

  Trajectory traj;
  traj.kind = "ground-rows";
  for (int line = 0; line <= orchard.rows; ++line) {
    const double x = line * orchard.row_spacing - cx - 0.5 * orchard.row_spacing;
    const bool reversed = (line % 2) == 1;
    const Eigen::Vector2d travel2 = stand_detail::rotate_azimuth(
        {0.0, reversed ? -1.0 : 1.0}, orchard.row_azimuth_deg);
    const Eigen::Vector3d travel(travel2.x(), travel2.y(), 0.0);
    const Eigen::Quaterniond q =
        frame_quat(Eigen::Vector3d::UnitZ(), travel);
    for (int k = 0; k < per_pass; ++k) {
      const double y0 = reversed ? 0.5 * length - k * step
                                 : -0.5 * length + k * step;
      const Eigen::Vector2d xy =
          stand_detail::rotate_azimuth({x, y0}, orchard.row_azimuth_deg);
      traj.poses.push_back({{xy.x(), xy.y(), height}, q});
    }
  }
  return traj;
}

/// Boustrophedon flight over a centred rectangle: flight lines along Y
/// every line_spacing across X, constant altitude, sensor nadir with the
/// fan sweeping across-track. The defaults match a drone survey: ~10 m/s
/// at ~100 profiles/s with strongly overlapping swaths.
inline Trajectory traj_aerial_grid(double extent_x, double extent_y,
                                   double altitude = 30.0,
                                   double line_spacing = 5.0,
                                   double step = 0.1) {
  using namespace traj_detail;
  if (!(extent_x > 0.0) || !(extent_y > 0.0))
    throw ConfigError("aerial extent must be > 0");
  if (!(altitude > 0.0)) throw ConfigError("altitude must be > 0");
  if (!(line_spacing > 0.0) || !(step > 0.0))
    throw ConfigError("spacings must be > 0");

  const int n_lines = sensor_detail::divide_count(extent_x, line_spacing) + 1;
  const int per_line = sensor_detail::divide_count(extent_y, step) + 1;

  Trajectory traj;
  traj.kind = "aerial-grid";
  for (int line = 0; line < n_lines; ++line) {
    const double x = -0.5 * extent_x + line * line_spacing;
    const bool reversed = (line % 2) == 1;
    const Eigen::Vector3d travel(0.0, reversed ? -1.0 : 1.0, 0.0);
    const Eigen::Quaterniond q =
        frame_quat(-Eigen::Vector3d::UnitZ(), travel);
    for (int k = 0; k < per_line; ++k) {
      const double y = reversed ? 0.5 * extent_y - k * step
                                : -0.5 * extent_y + k * step;
      traj.poses.push_back({{x, y, altitude}, q});
    }
  }
  return traj;
}

/// The sensor shape moved to one trajectory pose: every sample at range t
/// along direction d lands at position + q * (t d). Output is a
/// scan-labelled cloud carrying scanline_id and the given pose index.
inline LabelledCloud apply_pose(const SensorShape& shape, const Pose& pose,
                                std::uint32_t pose_index = 0) {
  LabelledCloud cloud;
  cloud.meta.stage = "posed-sensor";
  cloud.reserve(shape.total_samples(), true);
  const Eigen::Matrix3d rot = pose.orientation.toRotationMatrix();
  for (const auto& line : shape.scan_lines) {
    const Eigen::Vector3d dir = rot * line.direction;
    for (double t : line.samples)
      cloud.append_scan(pose.position + t * dir, 0, 0, line.scanline_id,
                        pose_index);
  }
  return cloud;
}

/// Pose sequence as CSV (`x,y,z,qw,qx,qy,qz`), one pose per line.
inline constexpr const char* kTrajectoryCsvHeader = "x,y,z,qw,qx,qy,qz";

inline std::string trajectory_to_csv(const Trajectory& traj) {
  using namespace io_detail;
  std::string out = kTrajectoryCsvHeader;
  out.push_back('\n');
  for (const auto& pose : traj.poses) {
    append_double(out, pose.position.x());
    out.push_back(',');
    append_double(out, pose.position.y());
    out.push_back(',');
    append_double(out, pose.position.z());
    out.push_back(',');
    append_double(out, pose.orientation.w());
    out.push_back(',');
    append_double(out, pose.orientation.x());
    out.push_back(',');
    append_double(out, pose.orientation.y());
    out.push_back(',');
    append_double(out, pose.orientation.z());
    out.push_back('\n');
  }
  return out;
}

inline Trajectory trajectory_from_csv(std::string_view text) {
  using namespace io_detail;
  Trajectory traj;
  traj.kind = "imported";
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line_no == 1) {
      if (line != kTrajectoryCsvHeader)
        throw IoError("trajectory CSV must start with '" +
                      std::string(kTrajectoryCsvHeader) + "'");
      continue;
    }
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != 7)
      throw IoError("trajectory CSV line " + std::to_string(line_no) +
                    ": expected 7 fields, got " +
                    std::to_string(fields.size()));
    Pose pose;
    pose.position = {parse_double(fields[0], "x"),
                     parse_double(fields[1], "y"),
                     parse_double(fields[2], "z")};
    pose.orientation = Eigen::Quaterniond(
        parse_double(fields[3], "qw"), parse_double(fields[4], "qx"),
        parse_double(fields[5], "qy"), parse_double(fields[6], "qz"));
    const double norm = pose.orientation.norm();
    if (std::abs(norm - 1.0) > 1e-6)
      throw IoError("trajectory CSV line " + std::to_string(line_no) +
                    ": quaternion norm " + std::to_string(norm) +
                    " is not unit");
    pose.orientation.normalize();
    traj.poses.push_back(pose);
  }
  if (traj.poses.empty()) throw IoError("trajectory CSV contains no poses");
  return traj;
}

}  // namespace simtreels
