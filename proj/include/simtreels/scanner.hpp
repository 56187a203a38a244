#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <optional>
#include <thread>
#include <vector>

#include "simtreels/cloud.hpp"
#include "simtreels/errors.hpp"
#include "simtreels/rng.hpp"
#include "simtreels/sensor.hpp"
#include "simtreels/spatial_index.hpp"
#include "simtreels/trajectory.hpp"
#include "simtreels/treegen.hpp"

namespace simtreels {

/// Knobs of the scan kernel. search_radius doubles as the sensor error:
/// a sample matches the nearest stand point within this radius.
struct ScanParams {
  double search_radius = 0.02;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  bool dedupe = false;  // drop repeated hits of one source point
};

/// Bookkeeping accumulated with the scan cloud. hits_per_scanline is
/// indexed by scanline_id; every scan line fires once per pose, so its
/// hit rate is hits / pose_count.
struct ScanStats {
  std::size_t total_returns = 0;
  std::vector<std::size_t> returns_per_pose;
  std::vector<std::size_t> hits_per_scanline;
  std::size_t pose_count = 0;

  double hit_rate(std::uint32_t scanline_id) const {
    if (pose_count == 0 || scanline_id >= hits_per_scanline.size()) return 0.0;
    return static_cast<double>(hits_per_scanline[scanline_id]) /
           static_cast<double>(pose_count);
  }
};

struct ScanResult {
  LabelledCloud cloud;
  ScanStats stats;
};

/// One candidate match along a posed scan line.
struct BeamCandidate {
  double sample_range = 0.0;  // range of the sensor sample along the beam
  std::uint32_t point_index = 0;
  double match_distance = 0.0;
};

/// The candidate a real sensor would report: minimum sample range, ties
/// broken by smaller match distance, then lower point index. Empty input
/// means the beam misses.
inline std::optional<BeamCandidate> first_return(
    const std::vector<BeamCandidate>& candidates) {
  const BeamCandidate* best = nullptr;
  for (const auto& c : candidates) {
    if (!best || c.sample_range < best->sample_range ||
        (c.sample_range == best->sample_range &&
         (c.match_distance < best->match_distance ||
          (c.match_distance == best->match_distance &&
           c.point_index < best->point_index))))
      best = &c;
  }
  if (!best) return std::nullopt;
  return *best;
}

namespace scanner_detail {

inline constexpr std::uint64_t kNoiseTag = 0x6E6F6973u;

struct RawReturn {
  std::uint32_t source = 0;
  std::uint32_t scanline_id = 0;
  Eigen::Vector3d position{0, 0, 0};
};

/// Measurement noise for one (pose, scan line): an isotropic Gaussian
/// displacement from a stream keyed on identity, not on execution order.
inline Eigen::Vector3d noisy_position(const Eigen::Vector3d& p, double sigma,
                                      const Rng& noise_root,
                                      std::uint32_t pose_index,
                                      std::uint32_t scanline_id) {
  if (sigma <= 0.0) return p;
  Rng rng = noise_root.child(pose_index).child(scanline_id);
  double d[3];
  rng.normal3(sigma, d);
  return p + Eigen::Vector3d(d[0], d[1], d[2]);
}

/// Clip the ray origin + t*dir against an axis-aligned box; false when it
/// misses entirely.
inline bool clip_ray(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                     const Eigen::Vector3d& lo, const Eigen::Vector3d& hi,
                     double& t_enter, double& t_exit) {
  t_enter = 0.0;
  t_exit = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (std::abs(dir[a]) < 1e-15) {
      if (origin[a] < lo[a] || origin[a] > hi[a]) return false;
      continue;
    }
    double t0 = (lo[a] - origin[a]) / dir[a];
    double t1 = (hi[a] - origin[a]) / dir[a];
    if (t0 > t1) std::swap(t0, t1);
    t_enter = std::max(t_enter, t0);
    t_exit = std::min(t_exit, t1);
    if (t_enter > t_exit) return false;
  }
  return true;
}

/// Indexed kernel for one pose: per scan line, walk samples in increasing
/// range (restricted to the stretch of ray that can reach the stand),
/// take the first sample with a match. The macro-occupancy test rejects
/// obviously empty space without touching the fine grid.
inline void scan_pose_indexed(const SpatialIndex& index,
                              const SensorShape& shape, const Pose& pose,
                              std::uint32_t pose_index,
                              const ScanParams& params, const Rng& noise_root,
                              std::vector<RawReturn>& out) {
  const Eigen::Matrix3d rot = pose.orientation.toRotationMatrix();
  const double r = params.search_radius;
  const bool use_macro = r <= index.cell_size();
  Eigen::Vector3d lo, hi;
  index.padded_bounds(lo, hi);
  const LabelledCloud& stand = index.cloud();
  (void)stand;

  for (const auto& line : shape.scan_lines) {
    const Eigen::Vector3d dir = rot * line.direction;
    double t_enter, t_exit;
    if (!clip_ray(pose.position, dir, lo, hi, t_enter, t_exit)) continue;
    const std::size_t n = line.samples.size();
    for (std::size_t k = 0; k < n; ++k) {
      const double t = line.samples[k];
      if (t < t_enter) continue;
      if (t > t_exit) break;
      const Eigen::Vector3d s = pose.position + t * dir;
      if (use_macro && !index.occupied_near(s)) continue;
      const auto hit = index.nearest_within(s, r);
      if (!hit) continue;
      out.push_back({hit->index, line.scanline_id,
                     noisy_position(index.cloud().positions[hit->index],
                                    params.noise_sigma, noise_root, pose_index,
                                    line.scanline_id)});
      break;  // first candidate-bearing sample: nothing earlier can return
    }
  }
}

/// Literal kernel for one pose: every sample of every line is matched by
/// an exhaustive linear scan and the per-line winner goes through
/// first_return. Deliberately free of the clipping / early-exit logic.
inline void scan_pose_brute(const LabelledCloud& stand,
                            const SensorShape& shape, const Pose& pose,
                            std::uint32_t pose_index, const ScanParams& params,
                            const Rng& noise_root,
                            std::vector<RawReturn>& out) {
  const Eigen::Matrix3d rot = pose.orientation.toRotationMatrix();
  const double r2 = params.search_radius * params.search_radius;
  std::vector<BeamCandidate> candidates;
  for (const auto& line : shape.scan_lines) {
    const Eigen::Vector3d dir = rot * line.direction;
    candidates.clear();
    for (double t : line.samples) {
      const Eigen::Vector3d s = pose.position + t * dir;
      double best_d2 = std::numeric_limits<double>::infinity();
      std::uint32_t best = 0;
      bool found = false;
      for (std::size_t i = 0; i < stand.size(); ++i) {
        const double d2 = (stand.positions[i] - s).squaredNorm();
        if (d2 <= r2 && d2 < best_d2) {
          best_d2 = d2;
          best = static_cast<std::uint32_t>(i);
          found = true;
        }
      }
      if (found) candidates.push_back({t, best, std::sqrt(best_d2)});
    }
    if (const auto chosen = first_return(candidates))
      out.push_back({chosen->point_index, line.scanline_id,
                     noisy_position(stand.positions[chosen->point_index],
                                    params.noise_sigma, noise_root, pose_index,
                                    line.scanline_id)});
  }
}

inline void check_scan_inputs(const SensorShape& shape, const Trajectory& traj,
                              const ScanParams& params,
                              double stand_spacing) {
  if (!(params.search_radius > 0.0))
    throw ConfigError("search_radius must be > 0");
  if (!(params.noise_sigma >= 0.0))
    throw ConfigError("noise_sigma must be >= 0");
  if (shape.scan_lines.empty() || shape.total_samples() == 0)
    throw ConfigError("sensor shape has no samples");
  if (traj.poses.empty()) throw ConfigError("trajectory has no poses");
  if (shape.range_step_m > 2.0 * params.search_radius)
    throw ConfigError(
        "range_step exceeds twice the search radius; beams could skip "
        "through surfaces");
  if (shape.range_step_m > params.search_radius)
    std::cerr << "simtreels: warning: range_step " << shape.range_step_m
              << " m exceeds the search radius " << params.search_radius
              << " m; thin surfaces may be missed\n";
  if (stand_spacing > 0.0 &&
      stand_spacing > required_spacing(params.search_radius))
    std::cerr << "simtreels: warning: stand spacing " << stand_spacing
              << " m is coarser than required " <<
        required_spacing(params.search_radius)
              << " m for search radius " << params.search_radius << " m\n";
}

inline std::uint64_t scan_params_hash(const ScanParams& params,
                                      std::uint64_t stand_hash) {
  using treegen_detail::double_bits;
  using treegen_detail::hash_mix;
  std::uint64_t h = 0xCBF29CE484222325ull;
  hash_mix(h, stand_hash);
  hash_mix(h, double_bits(params.search_radius));
  hash_mix(h, double_bits(params.noise_sigma));
  hash_mix(h, params.seed);
  hash_mix(h, params.dedupe ? 1 : 0);
  return h;
}

/// Ordered merge of per-pose returns into the final result; dedupe (when
/// on) keeps the first observation of each source point, in pose order,
/// so the outcome never depends on worker scheduling.
inline ScanResult assemble_result(const LabelledCloud& stand,
                                  std::vector<std::vector<RawReturn>>& per_pose,
                                  const SensorShape& shape,
                                  const ScanParams& params) {
  ScanResult result;
  result.stats.pose_count = per_pose.size();
  result.stats.returns_per_pose.assign(per_pose.size(), 0);
  std::uint32_t max_id = 0;
  for (const auto& line : shape.scan_lines)
    max_id = std::max(max_id, line.scanline_id);
  result.stats.hits_per_scanline.assign(max_id + 1, 0);

  std::size_t upper = 0;
  for (const auto& returns : per_pose) upper += returns.size();
  result.cloud.reserve(upper, true);
  std::vector<char> seen;
  if (params.dedupe) seen.assign(stand.size(), 0);

  for (std::size_t p = 0; p < per_pose.size(); ++p) {
    for (const auto& ret : per_pose[p]) {
      if (params.dedupe) {
        if (seen[ret.source]) continue;
        seen[ret.source] = 1;
      }
      result.cloud.append_scan(ret.position, stand.tree_ids[ret.source],
                               stand.levels[ret.source], ret.scanline_id,
                               static_cast<std::uint32_t>(p));
      result.stats.returns_per_pose[p]++;
      result.stats.hits_per_scanline[ret.scanline_id]++;
      result.stats.total_returns++;
    }
    per_pose[p].clear();
    per_pose[p].shrink_to_fit();
  }
  result.cloud.meta.stage = "scan";
  result.cloud.meta.seed = params.seed;
  result.cloud.meta.params_hash =
      scan_params_hash(params, stand.meta.params_hash);
  return result;
}

}  // namespace scanner_detail

/// Simulates the scan: for every pose, every scan line is reduced to its
/// first return against the indexed stand, noise is added, and returns
/// accumulate in pose order. Identical output for any worker count.
inline ScanResult simulate_scan(const SpatialIndex& index,
                                const SensorShape& shape,
                                const Trajectory& traj,
                                const ScanParams& params, unsigned workers = 1,
                                double stand_spacing = 0.0) {
  using namespace scanner_detail;
  check_scan_inputs(shape, traj, params, stand_spacing);
  const Rng noise_root = Rng(params.seed).child(kNoiseTag);

  std::vector<std::vector<RawReturn>> per_pose(traj.poses.size());
  auto do_pose = [&](std::size_t p) {
    scan_pose_indexed(index, shape, traj.poses[p],
                      static_cast<std::uint32_t>(p), params, noise_root,
                      per_pose[p]);
  };
  if (workers <= 1 || traj.poses.size() == 1) {
    for (std::size_t p = 0; p < traj.poses.size(); ++p) do_pose(p);
  } else {
    std::atomic<std::size_t> next{0};
    auto run = [&] {
      for (std::size_t p = next.fetch_add(1); p < traj.poses.size();
           p = next.fetch_add(1))
        do_pose(p);
    };
    std::vector<std::thread> pool;
    const unsigned n = std::min<std::size_t>(workers, traj.poses.size());
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(run);
    for (auto& t : pool) t.join();
  }
  return assemble_result(index.cloud(), per_pose, shape, params);
}

/// Convenience overload owning the index (cell size = search radius). An
/// empty stand scans to zero returns rather than erroring, mirroring the
/// brute-force kernel.
inline ScanResult simulate_scan(const LabelledCloud& stand,
                                const SensorShape& shape,
                                const Trajectory& traj,
                                const ScanParams& params, unsigned workers = 1,
                                double stand_spacing = 0.0) {
  using namespace scanner_detail;
  check_scan_inputs(shape, traj, params, stand_spacing);
  if (stand.empty()) {
    std::vector<std::vector<RawReturn>> per_pose(traj.poses.size());
    return assemble_result(stand, per_pose, shape, params);
  }
  SpatialIndex index(stand, params.search_radius);
  return simulate_scan(index, shape, traj, params, workers, stand_spacing);
}

/// Testing oracle: same contract as simulate_scan, but candidate search
/// is an exhaustive linear scan per sample. Intended for small inputs;
/// output is bit-identical to simulate_scan under a shared seed.
inline ScanResult brute_force_scan(const LabelledCloud& stand,
                                   const SensorShape& shape,
                                   const Trajectory& traj,
                                   const ScanParams& params) {
  using namespace scanner_detail;
  check_scan_inputs(shape, traj, params, 0.0);
  const Rng noise_root = Rng(params.seed).child(kNoiseTag);
  std::vector<std::vector<RawReturn>> per_pose(traj.poses.size());
  for (std::size_t p = 0; p < traj.poses.size(); ++p)
    scan_pose_brute(stand, shape, traj.poses[p],
                    static_cast<std::uint32_t>(p), params, noise_root,
                    per_pose[p]);
  return assemble_result(stand, per_pose, shape, params);
}

/// Uniform random subsample without replacement, exactly target_count
/// points in source order, labels untouched: the sampling-based control
/// cloud sized to match a simulated scan.
inline LabelledCloud control_sample(const LabelledCloud& stand,
                                    std::size_t target_count,
                                    std::uint64_t seed) {
  if (target_count == 0 || target_count > stand.size())
    throw ConfigError("control target_count must be in 1.." +
                      std::to_string(stand.size()));
  std::vector<std::uint32_t> order(stand.size());
  for (std::size_t i = 0; i < order.size(); ++i)
    order[i] = static_cast<std::uint32_t>(i);
  Rng rng = Rng(seed).child(0x636F6E74u);
  for (std::size_t i = 0; i < target_count; ++i) {
    const std::size_t j = i + rng.uniform_below(order.size() - i);
    std::swap(order[i], order[j]);
  }
  std::sort(order.begin(), order.begin() + target_count);

  LabelledCloud out;
  out.reserve(target_count, stand.has_scan_fields());
  for (std::size_t i = 0; i < target_count; ++i)
    out.append(stand.point(order[i]));
  out.meta.stage = "control";
  out.meta.seed = seed;
  out.meta.params_hash = stand.meta.params_hash;
  return out;
}

}  // namespace simtreels
