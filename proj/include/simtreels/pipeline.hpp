#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "simtreels/analysis.hpp"
#include "simtreels/cloud_io.hpp"
#include "simtreels/config.hpp"
#include "simtreels/scanner.hpp"

namespace simtreels {

struct PipelineResult {
  std::vector<std::string> artifacts;  // paths written, in order
  SummaryReport report;
  std::size_t stand_points = 0;
  std::vector<std::pair<std::string, std::size_t>> scan_points;
  std::size_t control_points = 0;
};

namespace pipeline_detail {

/// Reproducibility sidecar written next to every artifact.
inline Json make_meta(const PipelineConfig& cfg, const std::string& stage,
                      std::uint64_t params_hash, std::size_t points) {
  Json meta;
  meta["config_hash"] = hash_hex(cfg.config_hash);
  meta["seed"] = cfg.seed;
  meta["stage"] = stage;
  meta["params_hash"] = hash_hex(params_hash);
  meta["points"] = points;
  return meta;
}

inline void write_artifact(PipelineResult& result, const std::string& path,
                           const std::string& content) {
  write_file(path, content);
  result.artifacts.push_back(path);
}

inline void write_meta(PipelineResult& result, const PipelineConfig& cfg,
                       const std::string& path, const std::string& stage,
                       std::uint64_t params_hash, std::size_t points) {
  write_artifact(result, path + ".meta.json",
                 make_meta(cfg, stage, params_hash, points).dump(2) + "\n");
}

inline void write_cloud_artifact(PipelineResult& result,
                                 const PipelineConfig& cfg,
                                 const std::string& path,
                                 const LabelledCloud& cloud) {
  write_cloud(path, cloud);
  result.artifacts.push_back(path);
  write_meta(result, cfg, path, cloud.meta.stage, cloud.meta.params_hash,
             cloud.size());
}

inline std::string cloud_path(const PipelineConfig& cfg,
                              const std::string& stem) {
  return cfg.out_dir + "/" + stem + "." + cfg.cloud_format;
}

inline void write_profiles(PipelineResult& result, const PipelineConfig& cfg,
                           const std::string& label,
                           const LabelledCloud& cloud) {
  const DensityProfile radial =
      density_profile(cloud, ProfileAxis::radial_xy, cfg.profile_bins);
  write_artifact(result, cfg.out_dir + "/profile_" + label + "_radial.csv",
                 profile_to_csv(radial));
  const DensityProfile height =
      density_profile(cloud, ProfileAxis::height, cfg.profile_bins);
  write_artifact(result, cfg.out_dir + "/profile_" + label + "_height.csv",
                 profile_to_csv(height));
}

}  // namespace pipeline_detail

/// End-to-end run: stand generation, one simulated scan per configured
/// run, a count-matched control sample, occlusion maps, density profiles
/// and the summary report. Every artifact lands in cfg.out_dir with a
/// .meta.json sidecar carrying the config hash and seed; identical config
/// and seed reproduce every file byte for byte.
inline PipelineResult run_pipeline(const PipelineConfig& cfg) {
  namespace fs = std::filesystem;
  using namespace pipeline_detail;
  PipelineResult result;
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec)
    throw IoError("cannot create output directory " + cfg.out_dir + ": " +
                  ec.message());

  // Stand: layout, then per-tree generation.
  const TreeDefinition def = resolve_tree(cfg.tree);
  std::vector<TreePlacement> placements;
  StandContext ctx;
  if (cfg.stand.is_orchard) {
    placements = layout_orchard(cfg.stand.orchard, cfg.seed, def.name);
    ctx = orchard_context(cfg.stand.orchard);
  } else {
    ForestParams forest = cfg.stand.forest;
    forest.seed = cfg.seed;
    placements = layout_forest(forest, def.name);
    ctx = forest_context(forest);
  }
  write_artifact(result, cfg.out_dir + "/placements.csv",
                 placements_to_csv(placements));
  write_meta(result, cfg, cfg.out_dir + "/placements.csv", "placements",
             definition_hash(def), placements.size());

  const LabelledCloud stand =
      assemble_stand(placements, {{def.name, def}}, cfg.workers);
  result.stand_points = stand.size();
  write_cloud_artifact(result, cfg, cloud_path(cfg, "stand"), stand);

  // Scans, one per run.
  ReportStand report_stand;
  report_stand.name = def.name;
  report_stand.source = &stand;
  std::vector<LabelledCloud> scans;
  scans.reserve(cfg.runs.size());
  for (const RunSpec& run : cfg.runs) {
    const SensorShape sensor = resolve_sensor(run.sensor);
    const Trajectory traj = resolve_trajectory(run.trajectory, ctx);
    write_artifact(result, cfg.out_dir + "/traj_" + run.name + ".csv",
                   trajectory_to_csv(traj));

    ScanResult scan = simulate_scan(stand, sensor, traj, cfg.scan,
                                    cfg.workers, def.sample_spacing);
    write_cloud_artifact(result, cfg, cloud_path(cfg, "scan_" + run.name),
                         scan.cloud);

    Json stats;
    stats["params_hash"] = hash_hex(scan.cloud.meta.params_hash);
    stats["total_returns"] = scan.stats.total_returns;
    stats["pose_count"] = scan.stats.pose_count;
    stats["returns_per_pose"] = scan.stats.returns_per_pose;
    stats["hits_per_scanline"] = scan.stats.hits_per_scanline;
    write_artifact(result, cfg.out_dir + "/scan_" + run.name + ".stats.json",
                   stats.dump(2) + "\n");

    result.scan_points.emplace_back(run.name, scan.cloud.size());
    scans.push_back(std::move(scan.cloud));
  }

  // Control: subsample matched to the mean simulated return count.
  std::size_t mean_count = 0;
  for (const auto& scan : scans) mean_count += scan.size();
  mean_count = static_cast<std::size_t>(std::llround(
      static_cast<double>(mean_count) / static_cast<double>(scans.size())));
  if (mean_count == 0)
    throw ConfigError(
        "no scan produced any return; cannot size the control sample");
  mean_count = std::min(mean_count, stand.size());
  const LabelledCloud control = control_sample(stand, mean_count, cfg.seed);
  result.control_points = control.size();
  write_cloud_artifact(result, cfg, cloud_path(cfg, "control"), control);

  // Analysis artifacts: occlusion maps and profiles per cloud, then the
  // summary table.
  const double match_radius = cfg.effective_match_radius();
  write_profiles(result, cfg, "control", control);
  report_stand.derived.emplace_back("control", &control);
  for (std::size_t i = 0; i < scans.size(); ++i) {
    const std::string& name = cfg.runs[i].name;
    const OcclusionMap occ = occlusion_map(stand, scans[i], match_radius);
    write_artifact(result, cfg.out_dir + "/occlusion_" + name + ".csv",
                   occlusion_to_csv(stand, occ));
    write_profiles(result, cfg, name, scans[i]);
    report_stand.derived.emplace_back(name, &scans[i]);
  }

  result.report =
      summary_report({report_stand}, cfg.voxel_edge, match_radius);
  write_artifact(result, cfg.out_dir + "/report.csv", result.report.to_csv());
  write_artifact(result, cfg.out_dir + "/report.txt", result.report.to_text());
  write_meta(result, cfg, cfg.out_dir + "/report.csv", "report",
             cfg.config_hash, result.report.rows.size());
  return result;
}

}  // namespace simtreels
