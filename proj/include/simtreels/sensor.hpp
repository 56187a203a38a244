#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "simtreels/cloud.hpp"
#include "simtreels/errors.hpp"

namespace simtreels {

/// One beam: a unit direction in the sensor frame and the ranges at which
/// it is discretized. IDs are derived from angular position and unique
/// within a shape; ranges are strictly increasing multiples of the range
/// step.
struct ScanLine {
  std::uint32_t scanline_id = 0;
  Eigen::Vector3d direction{1, 0, 0};
  std::vector<double> samples;
};

enum class SensorKind { single_plane, multi_plane, spherical };

/// A sensor is a set of scan lines in its own frame: +X forward, +Z up,
/// the single-plane fan lying in the XZ (vertical) plane. Immutable after
/// construction; trajectories re-orient it via pose quaternions.
struct SensorShape {
  std::vector<ScanLine> scan_lines;

  SensorKind kind = SensorKind::single_plane;
  double fov_deg = 0.0;
  double angular_res_deg = 0.0;
  double max_range_m = 0.0;
  double range_step_m = 0.0;
  int n_planes = 1;
  double vertical_fov_deg = 0.0;
  double res_az_deg = 0.0;
  double res_el_deg = 0.0;

  std::size_t total_samples() const {
    std::size_t n = 0;
    for (const auto& line : scan_lines) n += line.samples.size();
    return n;
  }
};

namespace sensor_detail {

constexpr double kDegToRad = std::numbers::pi / 180.0;

/// floor(a / b) robust against a/b landing a hair under an integer.
inline int divide_count(double a, double b) {
  return static_cast<int>(std::floor(a / b + 1e-9));
}

inline void check_range(double max_range_m, double range_step_m) {
  if (!(range_step_m > 0.0) || !(range_step_m <= max_range_m))
    throw ConfigError("need 0 < range_step <= max_range");
}

inline std::vector<double> range_ladder(double max_range_m,
                                        double range_step_m) {
  const int n = divide_count(max_range_m, range_step_m);
  std::vector<double> samples(n);
  for (int k = 0; k < n; ++k) samples[k] = (k + 1) * range_step_m;
  return samples;
}

/// Fan beam directions in the XZ plane, fov centred on +X.
inline std::vector<double> fan_angles(double fov_deg, double angular_res_deg) {
  if (!(angular_res_deg > 0.0) || !(angular_res_deg <= fov_deg) ||
      !(fov_deg <= 360.0))
    throw ConfigError("need 0 < angular_res <= fov <= 360");
  const int beams = divide_count(fov_deg, angular_res_deg) + 1;
  std::vector<double> angles(beams);
  for (int i = 0; i < beams; ++i)
    angles[i] = (-0.5 * fov_deg + i * angular_res_deg) * kDegToRad;
  return angles;
}

}  // namespace sensor_detail

/// 2D scanner: beams fan across [-fov/2, +fov/2] in the XZ plane,
/// floor(fov/res)+1 of them (both ends included), each discretized every
/// range_step out to max_range. scanline_id = beam index.
inline SensorShape build_single_plane(double fov_deg, double angular_res_deg,
                                      double max_range_m,
                                      double range_step_m) {
  using namespace sensor_detail;
  check_range(max_range_m, range_step_m);
  const auto angles = fan_angles(fov_deg, angular_res_deg);
  const auto ladder = range_ladder(max_range_m, range_step_m);

  SensorShape shape;
  shape.kind = SensorKind::single_plane;
  shape.fov_deg = fov_deg;
  shape.angular_res_deg = angular_res_deg;
  shape.max_range_m = max_range_m;
  shape.range_step_m = range_step_m;
  shape.scan_lines.reserve(angles.size());
  for (std::size_t i = 0; i < angles.size(); ++i) {
    ScanLine line;
    line.scanline_id = static_cast<std::uint32_t>(i);
    line.direction = {std::cos(angles[i]), 0.0, std::sin(angles[i])};
    line.samples = ladder;
    shape.scan_lines.push_back(std::move(line));
  }
  return shape;
}

/// Stacked fans: n_planes copies of the single-plane fan, tilted out of
/// the XZ plane at elevations evenly covering [-vfov/2, +vfov/2].
/// scanline_id = plane_index * beam_count + beam_index.
inline SensorShape build_multi_plane(double fov_deg, double angular_res_deg,
                                     double max_range_m, double range_step_m,
                                     int n_planes, double vertical_fov_deg) {
  using namespace sensor_detail;
  if (n_planes < 2) throw ConfigError("multi-plane sensor needs n_planes >= 2");
  if (!(vertical_fov_deg > 0.0) || !(vertical_fov_deg < 180.0))
    throw ConfigError("need 0 < vertical_fov < 180");
  check_range(max_range_m, range_step_m);
  const auto angles = fan_angles(fov_deg, angular_res_deg);
  const auto ladder = range_ladder(max_range_m, range_step_m);
  const double el_spacing = vertical_fov_deg / (n_planes - 1);

  SensorShape shape;
  shape.kind = SensorKind::multi_plane;
  shape.fov_deg = fov_deg;
  shape.angular_res_deg = angular_res_deg;
  shape.max_range_m = max_range_m;
  shape.range_step_m = range_step_m;
  shape.n_planes = n_planes;
  shape.vertical_fov_deg = vertical_fov_deg;
  shape.scan_lines.reserve(angles.size() * n_planes);
  for (int p = 0; p < n_planes; ++p) {
    const double el = (-0.5 * vertical_fov_deg + p * el_spacing) * kDegToRad;
    const double ce = std::cos(el), se = std::sin(el);
    for (std::size_t i = 0; i < angles.size(); ++i) {
      ScanLine line;
      line.scanline_id =
          static_cast<std::uint32_t>(p * angles.size() + i);
      line.direction = {ce * std::cos(angles[i]), se,
                        ce * std::sin(angles[i])};
      line.samples = ladder;
      shape.scan_lines.push_back(std::move(line));
    }
  }
  return shape;
}

/// Full sphere: azimuths k*res_az in [0, 360), elevations m*res_el in
/// [-90, +90] (poles included; polar duplicates keep their own IDs).
/// Resolutions must divide their spans. scanline_id = az_index *
/// n_elevations + el_index.
inline SensorShape build_spherical(double res_az_deg, double res_el_deg,
                                   double max_range_m, double range_step_m) {
  using namespace sensor_detail;
  if (!(res_az_deg > 0.0) || !(res_el_deg > 0.0))
    throw ConfigError("spherical resolutions must be > 0");
  const double n_az_f = 360.0 / res_az_deg;
  const double n_el_f = 180.0 / res_el_deg;
  if (std::abs(n_az_f - std::round(n_az_f)) > 1e-9 ||
      std::abs(n_el_f - std::round(n_el_f)) > 1e-9)
    throw ConfigError(
        "spherical resolutions must divide 360 (azimuth) and 180 "
        "(elevation)");
  check_range(max_range_m, range_step_m);
  const int n_az = static_cast<int>(std::round(n_az_f));
  const int n_el = static_cast<int>(std::round(n_el_f)) + 1;
  const auto ladder = range_ladder(max_range_m, range_step_m);

  SensorShape shape;
  shape.kind = SensorKind::spherical;
  shape.max_range_m = max_range_m;
  shape.range_step_m = range_step_m;
  shape.res_az_deg = res_az_deg;
  shape.res_el_deg = res_el_deg;
  shape.scan_lines.reserve(static_cast<std::size_t>(n_az) * n_el);
  for (int k = 0; k < n_az; ++k) {
    const double az = k * res_az_deg * kDegToRad;
    for (int m = 0; m < n_el; ++m) {
      const double el = (-90.0 + m * res_el_deg) * kDegToRad;
      ScanLine line;
      line.scanline_id = static_cast<std::uint32_t>(k * n_el + m);
      line.direction = {std::cos(el) * std::cos(az),
                        std::cos(el) * std::sin(az), std::sin(el)};
      line.samples = ladder;
      shape.scan_lines.push_back(std::move(line));
    }
  }
  return shape;
}

/// The shape as a scan-labelled cloud (sensor at the origin, identity
/// orientation): one point per sample, carrying its scanline_id. Useful
/// for visual inspection of sensor definitions.
inline LabelledCloud shape_to_cloud(const SensorShape& shape) {
  LabelledCloud cloud;
  cloud.meta.stage = "sensor";
  cloud.reserve(shape.total_samples(), true);
  for (const auto& line : shape.scan_lines)
    for (double t : line.samples)
      cloud.append_scan(t * line.direction, 0, 0, line.scanline_id, 0);
  return cloud;
}

}  // namespace simtreels
