#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "simtreels/cloud.hpp"
#include "simtreels/cloud_io.hpp"
#include "simtreels/errors.hpp"
#include "simtreels/spatial_index.hpp"

namespace simtreels {

inline constexpr double kDefaultVoxelEdge = 0.5;
inline constexpr double kDefaultMatchRadiusFactor = 2.0;

struct DensityStats {
  double voxel_edge = 0.0;
  std::size_t occupied_voxels = 0;
  std::size_t total_points = 0;
  double mean_density = 0.0;    // points per m^3 over occupied voxels
  double stddev_density = 0.0;  // population stddev over occupied voxels

  double ratio() const {
    return mean_density > 0.0 ? stddev_density / mean_density : 0.0;
  }
};

enum class ProfileAxis { radial_xy, height };

struct ProfileBin {
  double coord = 0.0;    // normalised bin centre in [0, 1]
  double mean = 0.0;     // normalised density, max over bins = 1
  double stddev = 0.0;   // Poisson counting error on the same scale
};

struct DensityProfile {
  ProfileAxis axis = ProfileAxis::radial_xy;
  std::vector<ProfileBin> bins;
};

struct OcclusionMap {
  std::vector<char> visible;  // one flag per source point
  double occluded_fraction = 0.0;
  double match_radius = 0.0;
};

namespace analysis_detail {

struct VoxelKey {
  std::int64_t x = 0, y = 0, z = 0;
  bool operator==(const VoxelKey&) const = default;
};

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (std::uint64_t v : {static_cast<std::uint64_t>(k.x),
                            static_cast<std::uint64_t>(k.y),
                            static_cast<std::uint64_t>(k.z)}) {
      h ^= v;
      h *= 0x100000001B3ull;
    }
    return static_cast<std::size_t>(h);
  }
};

inline std::int64_t cell_of(double v, double edge) {
  return static_cast<std::int64_t>(std::floor(v / edge));
}

}  // namespace analysis_detail

/// Voxel-grid density over occupied voxels only: cubes of voxel_edge
/// anchored at the origin, density = count / edge^3.
inline DensityStats density_stats(const LabelledCloud& cloud,
                                  double voxel_edge = kDefaultVoxelEdge) {
  using namespace analysis_detail;
  if (!(voxel_edge > 0.0)) throw ConfigError("voxel_edge must be > 0");
  if (cloud.empty()) throw EmptyCloudError("density_stats: empty cloud");

  std::unordered_map<VoxelKey, std::size_t, VoxelKeyHash> counts;
  counts.reserve(cloud.size() / 4 + 8);
  for (const auto& p : cloud.positions)
    counts[{cell_of(p.x(), voxel_edge), cell_of(p.y(), voxel_edge),
            cell_of(p.z(), voxel_edge)}]++;

  DensityStats stats;
  stats.voxel_edge = voxel_edge;
  stats.occupied_voxels = counts.size();
  stats.total_points = cloud.size();
  const double volume = voxel_edge * voxel_edge * voxel_edge;
  // mean of per-voxel densities = total / (occupied * volume), exactly.
  stats.mean_density =
      static_cast<double>(stats.total_points) /
      (static_cast<double>(stats.occupied_voxels) * volume);

  // Deterministic accumulation order for the second moment.
  std::vector<std::size_t> per_voxel;
  per_voxel.reserve(counts.size());
  for (const auto& [key, n] : counts) per_voxel.push_back(n);
  std::sort(per_voxel.begin(), per_voxel.end());
  double ss = 0.0;
  for (std::size_t n : per_voxel) {
    const double d = static_cast<double>(n) / volume - stats.mean_density;
    ss += d * d;
  }
  stats.stddev_density =
      std::sqrt(ss / static_cast<double>(stats.occupied_voxels));
  return stats;
}

/// Density against XY distance from the origin or against height, both
/// axes normalised so the largest bin density and coordinate are 1.
inline DensityProfile density_profile(const LabelledCloud& cloud,
                                      ProfileAxis axis, std::size_t n_bins) {
  if (n_bins < 2) throw ConfigError("density_profile needs n_bins >= 2");
  if (cloud.empty()) throw EmptyCloudError("density_profile: empty cloud");

  std::vector<double> coords(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.positions[i];
    coords[i] = axis == ProfileAxis::radial_xy ? std::hypot(p.x(), p.y())
                                               : p.z();
  }
  double max_coord = 0.0;
  for (double c : coords) max_coord = std::max(max_coord, c);
  if (max_coord <= 0.0) max_coord = 1.0;  // degenerate: one bin gets it all

  const double width = max_coord / static_cast<double>(n_bins);
  std::vector<std::size_t> counts(n_bins, 0);
  for (double c : coords) {
    auto b = static_cast<std::size_t>(std::max(0.0, std::floor(c / width)));
    counts[std::min(b, n_bins - 1)]++;
  }

  Eigen::Vector3d lo, hi;
  cloud.bounds(lo, hi);
  const double z_extent = std::max(hi.z() - lo.z(), 1e-12);
  const double xy_area =
      std::max((hi.x() - lo.x()) * (hi.y() - lo.y()), 1e-12);

  DensityProfile profile;
  profile.axis = axis;
  profile.bins.resize(n_bins);
  std::vector<double> density(n_bins, 0.0);
  for (std::size_t b = 0; b < n_bins; ++b) {
    double volume;
    if (axis == ProfileAxis::radial_xy) {
      const double r0 = width * static_cast<double>(b);
      const double r1 = r0 + width;
      volume = M_PI * (r1 * r1 - r0 * r0) * z_extent;
    } else {
      volume = xy_area * width;
    }
    density[b] = static_cast<double>(counts[b]) / volume;
    profile.bins[b].coord = (static_cast<double>(b) + 0.5) /
                            static_cast<double>(n_bins);
    profile.bins[b].stddev = std::sqrt(static_cast<double>(counts[b])) /
                             volume;
  }
  const double d_max = *std::max_element(density.begin(), density.end());
  const double scale = d_max > 0.0 ? 1.0 / d_max : 1.0;
  for (std::size_t b = 0; b < n_bins; ++b) {
    profile.bins[b].mean = density[b] * scale;
    profile.bins[b].stddev *= scale;
  }
  return profile;
}

/// Marks each source point visible when at least one scan point lies
/// within match_radius, as a first-class occlusion measure.
inline OcclusionMap occlusion_map(const LabelledCloud& source,
                                  const LabelledCloud& scan,
                                  double match_radius) {
  if (!(match_radius > 0.0)) throw ConfigError("match_radius must be > 0");
  if (source.empty()) throw EmptyCloudError("occlusion_map: empty source");
  if (scan.empty()) throw EmptyCloudError("occlusion_map: empty scan");

  // Radius queries stay exact for any cell size; the floor keeps the grid
  // coarse enough for arbitrarily small radii over wide clouds.
  Eigen::Vector3d lo, hi;
  scan.bounds(lo, hi);
  const double cell = std::max(match_radius, (hi - lo).maxCoeff() / 1024.0);
  SpatialIndex index(scan, cell);
  OcclusionMap map;
  map.match_radius = match_radius;
  map.visible.assign(source.size(), 0);
  std::size_t n_visible = 0;
  for (std::size_t i = 0; i < source.size(); ++i) {
    if (index.any_within(source.positions[i], match_radius)) {
      map.visible[i] = 1;
      ++n_visible;
    }
  }
  map.occluded_fraction =
      1.0 - static_cast<double>(n_visible) / static_cast<double>(source.size());
  return map;
}

/// CSV export of the annotated source cloud (visible flag per point) for
/// external rendering of visible-vs-occluded matter.
inline std::string occlusion_to_csv(const LabelledCloud& source,
                                    const OcclusionMap& map) {
  if (map.visible.size() != source.size())
    throw ConfigError("occlusion map does not match the source cloud");
  std::string out = "x,y,z,tree_id,level,visible\n";
  for (std::size_t i = 0; i < source.size(); ++i) {
    io_detail::append_double(out, source.positions[i].x());
    out += ',';
    io_detail::append_double(out, source.positions[i].y());
    out += ',';
    io_detail::append_double(out, source.positions[i].z());
    out += ',';
    io_detail::append_uint(out, source.tree_ids[i]);
    out += ',';
    io_detail::append_uint(out, source.levels[i]);
    out += ',';
    out += map.visible[i] ? '1' : '0';
    out += '\n';
  }
  return out;
}

inline std::string profile_to_csv(const DensityProfile& profile) {
  std::string out = "bin_coord,mean,stddev\n";
  for (const auto& bin : profile.bins) {
    io_detail::append_double(out, bin.coord);
    out += ',';
    io_detail::append_double(out, bin.mean);
    out += ',';
    io_detail::append_double(out, bin.stddev);
    out += '\n';
  }
  return out;
}

struct ReportRow {
  std::string stand;
  std::string label;
  std::size_t points = 0;
  double occluded_pct = 0.0;
  double mean_density = 0.0;
  double stddev_density = 0.0;
};

struct SummaryReport {
  double voxel_edge = kDefaultVoxelEdge;
  double match_radius = 0.0;
  std::vector<ReportRow> rows;

  std::string to_csv() const {
    std::string out = "stand,label,points,occluded_pct,mean_density,"
                      "stddev_density\n";
    for (const auto& row : rows) {
      out += row.stand;
      out += ',';
      out += row.label;
      out += ',';
      io_detail::append_uint(out, row.points);
      out += ',';
      io_detail::append_double(out, row.occluded_pct);
      out += ',';
      io_detail::append_double(out, row.mean_density);
      out += ',';
      io_detail::append_double(out, row.stddev_density);
      out += '\n';
    }
    return out;
  }

  std::string to_text() const {
    std::ostringstream os;
    os << "voxel edge " << voxel_edge << " m, match radius " << match_radius
       << " m\n";
    os << std::left << std::setw(16) << "stand" << std::setw(16) << "label"
       << std::right << std::setw(12) << "points" << std::setw(12)
       << "occluded%" << std::setw(14) << "mean pts/m3" << std::setw(14)
       << "sd pts/m3" << '\n';
    os << std::string(84, '-') << '\n';
    os << std::fixed << std::setprecision(1);
    for (const auto& row : rows)
      os << std::left << std::setw(16) << row.stand << std::setw(16)
         << row.label << std::right << std::setw(12) << row.points
         << std::setw(12) << row.occluded_pct << std::setw(14)
         << row.mean_density << std::setw(14) << row.stddev_density << '\n';
    return os.str();
  }
};

/// One stand's inputs for a report: the source, then any number of
/// derived clouds (control and scans) compared against it.
struct ReportStand {
  std::string name;
  const LabelledCloud* source = nullptr;
  std::vector<std::pair<std::string, const LabelledCloud*>> derived;
};

/// Point count, occluded share and voxel density for every derived cloud
/// of every stand (plus a row for each source itself).
inline SummaryReport summary_report(const std::vector<ReportStand>& stands,
                                    double voxel_edge, double match_radius) {
  SummaryReport report;
  report.voxel_edge = voxel_edge;
  report.match_radius = match_radius;
  for (const auto& stand : stands) {
    if (stand.source == nullptr)
      throw ConfigError("report stand '" + stand.name + "' has no source");
    DensityStats src = density_stats(*stand.source, voxel_edge);
    report.rows.push_back({stand.name, "source", src.total_points, 0.0,
                           src.mean_density, src.stddev_density});
    for (const auto& [label, cloud] : stand.derived) {
      if (cloud == nullptr)
        throw ConfigError("report entry '" + label + "' has no cloud");
      DensityStats d = density_stats(*cloud, voxel_edge);
      OcclusionMap occ = occlusion_map(*stand.source, *cloud, match_radius);
      report.rows.push_back({stand.name, label, d.total_points,
                             100.0 * occ.occluded_fraction, d.mean_density,
                             d.stddev_density});
    }
  }
  return report;
}

}  // namespace simtreels
