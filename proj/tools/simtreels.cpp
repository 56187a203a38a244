// simtreels command line tool: every pipeline stage as a subcommand, plus
// the end-to-end pipeline runner. All artifacts carry .meta.json sidecars
// with the config hash and seed; reruns are byte-identical.

#include "CLI11.hpp"

#include <cstdlib>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "simtreels/analysis.hpp"
#include "simtreels/cloud_io.hpp"
#include "simtreels/config.hpp"
#include "simtreels/pipeline.hpp"
#include "simtreels/presets.hpp"
#include "simtreels/scanner.hpp"

namespace {

using namespace simtreels;

constexpr int kExitUsage = 2;
constexpr int kExitConfig = 3;
constexpr int kExitIo = 4;
constexpr int kExitDomain = 5;

unsigned env_workers() {
  const char* v = std::getenv("SIMTREELS_WORKERS");
  if (v == nullptr || *v == '\0') return 0;
  char* end = nullptr;
  const unsigned long n = std::strtoul(v, &end, 10);
  if (end == nullptr || *end != '\0' || n == 0 || n > 1024)
    throw ConfigError("SIMTREELS_WORKERS must be an integer in 1..1024");
  return static_cast<unsigned>(n);
}

/// Precedence: explicit --workers flag, then SIMTREELS_WORKERS, then the
/// config file value, then 1.
unsigned effective_workers(unsigned flag_value, bool flag_given,
                           unsigned config_value) {
  if (flag_given) return flag_value;
  if (const unsigned env = env_workers(); env > 0) return env;
  return config_value > 0 ? config_value : 1;
}

/// Sidecar for flag-driven subcommands: the effective inputs are
/// serialised and hashed so the artifact is auditable without the shell
/// history.
void write_sidecar(const std::string& path, const Json& effective,
                   std::uint64_t seed, const std::string& stage,
                   std::uint64_t params_hash, std::size_t points) {
  Json meta;
  meta["config_hash"] = hash_hex(canonical_hash(effective));
  meta["seed"] = seed;
  meta["stage"] = stage;
  meta["params_hash"] = hash_hex(params_hash);
  meta["points"] = points;
  write_file(path + ".meta.json", meta.dump(2) + "\n");
}

struct SensorFlags {
  std::string preset;
  std::string kind = "single_plane";
  double fov = 0.0;
  double res = 0.0;
  double range = 15.0;
  double step = 0.02;
  int planes = 0;
  double vertical_fov = 0.0;
  double res_az = 0.0;
  double res_el = 0.0;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--preset", preset, "Sensor preset (plane-270, puck-9beam)");
    cmd->add_option("--kind", kind,
                    "single_plane, multi_plane or spherical")
        ->check(CLI::IsMember({"single_plane", "multi_plane", "spherical"}));
    cmd->add_option("--fov", fov, "Horizontal field of view, degrees");
    cmd->add_option("--res", res, "Angular resolution, degrees");
    cmd->add_option("--range", range, "Maximum range, metres");
    cmd->add_option("--step", step, "Range sampling step, metres");
    cmd->add_option("--planes", planes, "Plane count for multi_plane");
    cmd->add_option("--vertical-fov", vertical_fov,
                    "Vertical field of view for multi_plane, degrees");
    cmd->add_option("--res-az", res_az, "Spherical azimuth resolution");
    cmd->add_option("--res-el", res_el, "Spherical elevation resolution");
  }

  SensorShape build() const {
    if (!preset.empty()) return preset_sensor(preset);
    if (kind == "spherical") return build_spherical(res_az, res_el, range, step);
    if (kind == "multi_plane" || planes >= 2)
      return build_multi_plane(fov, res, range, step, planes, vertical_fov);
    return build_single_plane(fov, res, range, step);
  }

  Json describe() const {
    Json j;
    if (!preset.empty()) {
      j = preset;
      return j;
    }
    j["kind"] = kind;
    if (kind == "spherical") {
      j["res_az_deg"] = res_az;
      j["res_el_deg"] = res_el;
    } else {
      j["fov_deg"] = fov;
      j["angular_res_deg"] = res;
      if (kind == "multi_plane" || planes >= 2) {
        j["n_planes"] = planes;
        j["vertical_fov_deg"] = vertical_fov;
      }
    }
    j["max_range_m"] = range;
    j["range_step_m"] = step;
    return j;
  }
};

int guarded(const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "simtreels: error: config: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "simtreels: error: io: " << e.what() << "\n";
    return kExitIo;
  } catch (const Error& e) {
    std::cerr << "simtreels: error: " << e.category() << ": " << e.what()
              << "\n";
    return kExitDomain;
  } catch (const std::exception& e) {
    std::cerr << "simtreels: error: internal: " << e.what() << "\n";
    return 1;
  }
}

std::optional<Json> maybe_config(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return load_json_file(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "simtreels: perfectly labelled synthetic lidar scans of procedural "
      "tree stands"};
  app.require_subcommand(1);
  std::function<int()> action;

  // ---- tree ------------------------------------------------------------
  {
    auto* cmd = app.add_subcommand("tree", "Generate one tree point cloud");
    auto config_path = std::make_shared<std::string>();
    auto def_name = std::make_shared<std::string>();
    auto seed = std::make_shared<std::uint64_t>(1);
    auto spacing = std::make_shared<double>(0.0);
    auto export_path = std::make_shared<std::string>("tree.ply");
    cmd->add_option("--config", *config_path, "Pipeline config JSON");
    cmd->add_option("--def", *def_name,
                    "Tree preset (avocado, macadamia, aspen)");
    cmd->add_option("--seed", *seed, "Tree seed, becomes tree_id");
    cmd->add_option("--spacing", *spacing, "Override sample spacing, metres");
    cmd->add_option("--export", *export_path, "Output cloud (.ply or .csv)");
    cmd->callback([=, &action] {
      action = [=] {
        return guarded([=] {
          Json tree_json = "avocado";
          if (auto cfg = maybe_config(*config_path))
            tree_json = parse_pipeline_config(*cfg).tree;
          if (!def_name->empty()) tree_json = *def_name;
          TreeDefinition def = resolve_tree(tree_json);
          if (*spacing > 0.0) def.sample_spacing = *spacing;
          const LabelledCloud cloud = generate_tree(def, *seed);
          write_cloud(*export_path, cloud);
          Json effective;
          effective["tree"] = tree_json;
          effective["spacing"] = def.sample_spacing;
          effective["seed"] = *seed;
          write_sidecar(*export_path, effective, *seed, "tree",
                        cloud.meta.params_hash, cloud.size());
          std::cout << *export_path << ": " << cloud.size() << " points\n";
        });
      };
    });
  }

  // ---- stand -----------------------------------------------------------
  {
    auto* cmd = app.add_subcommand("stand",
                                   "Lay out and assemble a tree stand");
    auto config_path = std::make_shared<std::string>();
    auto tree_name = std::make_shared<std::string>();
    auto stand_name = std::make_shared<std::string>();
    auto rows = std::make_shared<int>(0);
    auto per_row = std::make_shared<int>(0);
    auto tree_spacing = std::make_shared<double>(0.0);
    auto row_spacing = std::make_shared<double>(0.0);
    auto seed = std::make_shared<std::uint64_t>(1);
    auto workers = std::make_shared<unsigned>(1);
    auto out_dir = std::make_shared<std::string>(".");
    auto format = std::make_shared<std::string>("ply");
    auto* workers_opt = cmd->add_option("--workers", *workers,
                                        "Worker threads (no output effect)");
    cmd->add_option("--config", *config_path, "Pipeline config JSON");
    cmd->add_option("--tree", *tree_name, "Tree preset name");
    cmd->add_option("--stand", *stand_name,
                    "Stand preset (orchard-6x10, forest-min6)");
    cmd->add_option("--rows", *rows, "Orchard rows")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--trees-per-row", *per_row, "Trees per orchard row")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--tree-spacing", *tree_spacing, "In-row spacing, metres")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--row-spacing", *row_spacing, "Row spacing, metres")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--seed", *seed, "Layout seed");
    cmd->add_option("--out", *out_dir, "Output directory");
    cmd->add_option("--format", *format, "Cloud format: ply or csv")
        ->check(CLI::IsMember({"ply", "csv"}));
    cmd->callback([=, &action] {
      action = [=] {
        return guarded([=] {
          PipelineConfig cfg;
          if (auto loaded = maybe_config(*config_path))
            cfg = parse_pipeline_config(*loaded);
          if (!tree_name->empty()) cfg.tree = *tree_name;
          if (!stand_name->empty()) cfg.stand = resolve_stand(*stand_name);
          if (*rows > 0) cfg.stand.orchard.rows = *rows;
          if (*per_row > 0) cfg.stand.orchard.trees_per_row = *per_row;
          if (*tree_spacing > 0.0)
            cfg.stand.orchard.tree_spacing = *tree_spacing;
          if (*row_spacing > 0.0) cfg.stand.orchard.row_spacing = *row_spacing;
          const unsigned n_workers =
              effective_workers(*workers, workers_opt->count() > 0, 1);
          const TreeDefinition def = resolve_tree(cfg.tree);
          std::vector<TreePlacement> placements;
          if (cfg.stand.is_orchard) {
            placements = layout_orchard(cfg.stand.orchard, *seed, def.name);
          } else {
            ForestParams forest = cfg.stand.forest;
            forest.seed = *seed;
            placements = layout_forest(forest, def.name);
          }
          const LabelledCloud stand =
              assemble_stand(placements, {{def.name, def}}, n_workers);
          std::filesystem::create_directories(*out_dir);
          const std::string placements_path = *out_dir + "/placements.csv";
          write_file(placements_path, placements_to_csv(placements));
          const std::string cloud_file = *out_dir + "/stand." + *format;
          write_cloud(cloud_file, stand);
          Json effective;
          effective["tree"] = cfg.tree;
          effective["stand"] =
              cfg.stand.is_orchard
                  ? Json{{"kind", "orchard"},
                         {"rows", cfg.stand.orchard.rows},
                         {"trees_per_row", cfg.stand.orchard.trees_per_row},
                         {"tree_spacing", cfg.stand.orchard.tree_spacing},
                         {"row_spacing", cfg.stand.orchard.row_spacing},
                         {"row_azimuth_deg",
                          cfg.stand.orchard.row_azimuth_deg}}
                  : Json{{"kind", "forest"},
                         {"extent_x", cfg.stand.forest.extent_x},
                         {"extent_y", cfg.stand.forest.extent_y},
                         {"tree_count", cfg.stand.forest.tree_count},
                         {"min_spacing", cfg.stand.forest.min_spacing}};
          effective["seed"] = *seed;
          write_sidecar(placements_path, effective, *seed, "placements",
                        definition_hash(def), placements.size());
          write_sidecar(cloud_file, effective, *seed, "stand",
                        stand.meta.params_hash, stand.size());
          std::cout << cloud_file << ": " << stand.size() << " points, "
                    << placements.size() << " trees\n";
        });
      };
    });
  }

  // ---- sensor ----------------------------------------------------------
  {
    auto* cmd = app.add_subcommand("sensor", "Export a sensor sampling shape");
    auto flags = std::make_shared<SensorFlags>();
    auto export_path = std::make_shared<std::string>("shape.csv");
    flags->add_to(cmd);
    cmd->add_option("--export", *export_path, "Output cloud (.csv or .ply)");
    cmd->callback([=, &action] {
      action = [=] {
        return guarded([=] {
          const SensorShape shape = flags->build();
          const LabelledCloud cloud = shape_to_cloud(shape);
          write_cloud(*export_path, cloud);
          Json effective;
          effective["sensor"] = flags->describe();
          write_sidecar(*export_path, effective, 0, "sensor", 0, cloud.size());
          std::cout << *export_path << ": " << shape.scan_lines.size()
                    << " scan lines, " << shape.total_samples()
                    << " samples\n";
        });
      };
    });
  }

  // ---- trajectory ------------------------------------------------------
  {
    auto* cmd = app.add_subcommand("trajectory",
                                   "Export a trajectory as CSV poses");
    auto config_path = std::make_shared<std::string>();
    auto preset = std::make_shared<std::string>("handheld-loop");
    auto height = std::make_shared<double>(0.0);
    auto step = std::make_shared<double>(0.0);
    auto export_path = std::make_shared<std::string>("trajectory.csv");
    cmd->add_option("--config", *config_path,
                    "Pipeline config JSON (stand context)");
    cmd->add_option("--preset", *preset,
                    "handheld-loop, ground-rows or aerial-grid");
    cmd->add_option("--height", *height, "Override path height, metres");
    cmd->add_option("--step", *step, "Override pose spacing, metres");
    cmd->add_option("--export", *export_path, "Output CSV");
    cmd->callback([=, &action] {
      action = [=] {
        return guarded([=] {
          StandContext ctx;
          ctx.is_orchard = true;
          ctx.orchard = preset_orchard_6x10();
          if (auto loaded = maybe_config(*config_path)) {
            const PipelineConfig cfg = parse_pipeline_config(*loaded);
            ctx = cfg.stand.is_orchard ? orchard_context(cfg.stand.orchard)
                                       : forest_context(cfg.stand.forest);
          }
          Json spec;
          spec["kind"] = *preset;
          if (*height > 0.0) spec["height"] = *height;
          if (*step > 0.0) spec["step"] = *step;
          const Trajectory traj = trajectory_from_json(spec, ctx);
          write_file(*export_path, trajectory_to_csv(traj));
          Json effective;
          effective["trajectory"] = spec;
          write_sidecar(*export_path, effective, 0, "trajectory", 0,
                        traj.size());
          std::cout << *export_path << ": " << traj.size() << " poses ("
                    << traj.kind << ")\n";
        });
      };
    });
  }

  // ---- scan ------------------------------------------------------------
  {
    auto* cmd = app.add_subcommand(
        "scan", "Simulate a scan of a stand cloud along a trajectory");
    auto stand_path = std::make_shared<std::string>();
    auto traj_path = std::make_shared<std::string>();
    auto flags = std::make_shared<SensorFlags>();
    flags->preset = "plane-270";
    auto search_radius = std::make_shared<double>(0.02);
    auto noise_sigma = std::make_shared<double>(0.0);
    auto dedupe = std::make_shared<bool>(false);
    auto seed = std::make_shared<std::uint64_t>(1);
    auto workers = std::make_shared<unsigned>(1);
    auto name = std::make_shared<std::string>("scan");
    auto out_dir = std::make_shared<std::string>(".");
    auto format = std::make_shared<std::string>("ply");
    cmd->add_option("--stand", *stand_path, "Stand cloud file")->required();
    cmd->add_option("--trajectory", *traj_path, "Trajectory CSV")->required();
    flags->add_to(cmd);
    cmd->add_option("--search-radius", *search_radius,
                    "Match radius around each sample, metres");
    cmd->add_option("--noise-sigma", *noise_sigma,
                    "Gaussian noise sigma, metres");
    cmd->add_flag("--dedupe", *dedupe, "Drop repeated hits of a source point");
    cmd->add_option("--seed", *seed, "Noise seed");
    auto* workers_opt =
        cmd->add_option("--workers", *workers, "Worker threads");
    cmd->add_option("--name", *name, "Artifact name");
    cmd->add_option("--out", *out_dir, "Output directory");
    cmd->add_option("--format", *format, "Cloud format: ply or csv")
        ->check(CLI::IsMember({"ply", "csv"}));
    cmd->callback([=, &action] {
      action = [=] {
        return guarded([=] {
          const LabelledCloud stand = read_cloud(*stand_path);
          const Trajectory traj = trajectory_from_csv(read_file(*traj_path));
          const SensorShape sensor = flags->build();
          ScanParams params;
          params.search_radius = *search_radius;
          params.noise_sigma = *noise_sigma;
          params.dedupe = *dedupe;
          params.seed = *seed;
          const unsigned n_workers =
              effective_workers(*workers, workers_opt->count() > 0, 1);
          const ScanResult scan =
              simulate_scan(stand, sensor, traj, params, n_workers);
          std::filesystem::create_directories(*out_dir);
          const std::string cloud_file =
              *out_dir + "/scan_" + *name + "." + *format;
          write_cloud(cloud_file, scan.cloud);
          Json stats;
          stats["params_hash"] = hash_hex(scan.cloud.meta.params_hash);
          stats["total_returns"] = scan.stats.total_returns;
          stats["pose_count"] = scan.stats.pose_count;
          stats["returns_per_pose"] = scan.stats.returns_per_pose;
          stats["hits_per_scanline"] = scan.stats.hits_per_scanline;
          write_file(*out_dir + "/scan_" + *name + ".stats.json",
                     stats.dump(2) + "\n");
          Json effective;
          effective["stand"] = *stand_path;
          effective["trajectory"] = *traj_path;
          effective["sensor"] = flags->describe();
          effective["scan"] = {{"search_radius", *search_radius},
                               {"noise_sigma", *noise_sigma},
                               {"dedupe", *dedupe}};
          effective["seed"] = *seed;
          write_sidecar(cloud_file, effective, *seed, "scan",
                        scan.cloud.meta.params_hash, scan.cloud.size());
          std::cout << cloud_file << ": " << scan.stats.total_returns
                    << " returns over " << scan.stats.pose_count
                    << " poses\n";
        });
      };
    });
  }

  // ---- control ---------------------------------------------------------
  {
    auto* cmd = app.add_subcommand(
        "control", "Uniform subsample of a stand cloud (sampling control)");
    auto stand_path = std::make_shared<std::string>();
    auto target = std::make_shared<std::size_t>(0);
    auto seed = std::make_shared<std::uint64_t>(1);
    auto export_path = std::make_shared<std::string>("control.ply");
    cmd->add_option("--stand", *stand_path, "Stand cloud file")->required();
    cmd->add_option("--target", *target, "Points to keep")->required();
    cmd->add_option("--seed", *seed, "Sampling seed");
    cmd->add_option("--export", *export_path, "Output cloud");
    cmd->callback([=, &action] {
      action = [=] {
        return guarded([=] {
          const LabelledCloud stand = read_cloud(*stand_path);
          const LabelledCloud control = control_sample(stand, *target, *seed);
          write_cloud(*export_path, control);
          Json effective;
          effective["stand"] = *stand_path;
          effective["target"] = *target;
          effective["seed"] = *seed;
          write_sidecar(*export_path, effective, *seed, "control",
                        control.meta.params_hash, control.size());
          std::cout << *export_path << ": " << control.size() << " points\n";
        });
      };
    });
  }

  // ---- analyze ---------------------------------------------------------
  {
    auto* cmd = app.add_subcommand("analyze", "Cloud analyses");
    cmd->require_subcommand(1);

    auto* density = cmd->add_subcommand("density", "Voxel density stats");
    auto d_cloud = std::make_shared<std::string>();
    auto d_edge = std::make_shared<double>(kDefaultVoxelEdge);
    auto d_export = std::make_shared<std::string>();
    density->add_option("--cloud", *d_cloud, "Cloud file")->required();
    density->add_option("--voxel-edge", *d_edge, "Voxel edge, metres");
    density->add_option("--export", *d_export, "Optional JSON output");
    density->callback([=, &action] {
      action = [=] {
        return guarded([=] {
          const LabelledCloud cloud = read_cloud(*d_cloud);
          const DensityStats stats = density_stats(cloud, *d_edge);
          Json out;
          out["voxel_edge"] = stats.voxel_edge;
          out["occupied_voxels"] = stats.occupied_voxels;
          out["total_points"] = stats.total_points;
          out["mean_density"] = stats.mean_density;
          out["stddev_density"] = stats.stddev_density;
          out["ratio"] = stats.ratio();
          std::cout << out.dump(2) << "\n";
          if (!d_export->empty()) write_file(*d_export, out.dump(2) + "\n");
        });
      };
    });

    auto* profile = cmd->add_subcommand("profile", "Density profile");
    auto p_cloud = std::make_shared<std::string>();
    auto p_axis = std::make_shared<std::string>("radial");
    auto p_bins = std::make_shared<std::size_t>(10);
    auto p_export = std::make_shared<std::string>();
    profile->add_option("--cloud", *p_cloud, "Cloud file")->required();
    profile->add_option("--axis", *p_axis, "radial or height")
        ->check(CLI::IsMember({"radial", "height"}));
    profile->add_option("--bins", *p_bins, "Bin count (>= 2)");
    profile->add_option("--export", *p_export, "CSV output");
    profile->callback([=, &action] {
      action = [=] {
        return guarded([=] {
          const LabelledCloud cloud = read_cloud(*p_cloud);
          const DensityProfile prof = density_profile(
              cloud,
              *p_axis == "radial" ? ProfileAxis::radial_xy
                                  : ProfileAxis::height,
              *p_bins);
          const std::string csv = profile_to_csv(prof);
          if (p_export->empty())
            std::cout << csv;
          else
            write_file(*p_export, csv);
        });
      };
    });

    auto* occl = cmd->add_subcommand("occlusion",
                                     "Visible/occluded map of a source cloud");
    auto o_source = std::make_shared<std::string>();
    auto o_scan = std::make_shared<std::string>();
    auto o_radius = std::make_shared<double>(0.04);
    auto o_export = std::make_shared<std::string>();
    occl->add_option("--source", *o_source, "Source stand cloud")->required();
    occl->add_option("--scan", *o_scan, "Scan cloud")->required();
    occl->add_option("--match-radius", *o_radius, "Match radius, metres");
    occl->add_option("--export", *o_export, "Annotated CSV output");
    occl->callback([=, &action] {
      action = [=] {
        return guarded([=] {
          const LabelledCloud source = read_cloud(*o_source);
          const LabelledCloud scan = read_cloud(*o_scan);
          const OcclusionMap map = occlusion_map(source, scan, *o_radius);
          std::cout << "occluded_fraction " << map.occluded_fraction << "\n";
          if (!o_export->empty())
            write_file(*o_export, occlusion_to_csv(source, map));
        });
      };
    });
  }

  // ---- report ----------------------------------------------------------
  {
    auto* cmd = app.add_subcommand(
        "report", "Summary table over a source, control and scans");
    auto source_path = std::make_shared<std::string>();
    auto control_path = std::make_shared<std::string>();
    auto scans = std::make_shared<std::vector<std::string>>();
    auto edge = std::make_shared<double>(kDefaultVoxelEdge);
    auto radius = std::make_shared<double>(0.04);
    auto out_dir = std::make_shared<std::string>(".");
    auto stand_name = std::make_shared<std::string>("stand");
    cmd->add_option("--source", *source_path, "Source stand cloud")
        ->required();
    cmd->add_option("--control", *control_path, "Control cloud");
    cmd->add_option("--scan", *scans, "Scan entry as NAME=FILE (repeatable)");
    cmd->add_option("--voxel-edge", *edge, "Voxel edge, metres");
    cmd->add_option("--match-radius", *radius, "Occlusion match radius");
    cmd->add_option("--name", *stand_name, "Stand label in the table");
    cmd->add_option("--out", *out_dir, "Output directory");
    cmd->callback([=, &action] {
      action = [=] {
        return guarded([=] {
          const LabelledCloud source = read_cloud(*source_path);
          std::vector<std::pair<std::string, LabelledCloud>> derived;
          if (!control_path->empty())
            derived.emplace_back("control", read_cloud(*control_path));
          for (const std::string& entry : *scans) {
            const auto eq = entry.find('=');
            if (eq == std::string::npos || eq == 0 ||
                eq + 1 == entry.size())
              throw ConfigError("--scan expects NAME=FILE, got '" + entry +
                                "'");
            derived.emplace_back(entry.substr(0, eq),
                                 read_cloud(entry.substr(eq + 1)));
          }
          ReportStand stand;
          stand.name = *stand_name;
          stand.source = &source;
          for (const auto& [label, cloud] : derived)
            stand.derived.emplace_back(label, &cloud);
          const SummaryReport report = summary_report({stand}, *edge, *radius);
          std::filesystem::create_directories(*out_dir);
          write_file(*out_dir + "/report.csv", report.to_csv());
          write_file(*out_dir + "/report.txt", report.to_text());
          std::cout << report.to_text();
        });
      };
    });
  }

  // ---- pipeline --------------------------------------------------------
  {
    auto* cmd = app.add_subcommand(
        "pipeline", "Full run: stand, scans, control, analyses, report");
    auto config_path = std::make_shared<std::string>();
    auto seed = std::make_shared<std::uint64_t>(0);
    auto workers = std::make_shared<unsigned>(1);
    auto out_dir = std::make_shared<std::string>();
    cmd->add_option("--config", *config_path, "Pipeline config JSON")
        ->required();
    auto* seed_opt = cmd->add_option("--seed", *seed, "Override config seed");
    auto* workers_opt =
        cmd->add_option("--workers", *workers, "Worker threads");
    cmd->add_option("--out", *out_dir, "Override output directory");
    cmd->callback([=, &action] {
      action = [=] {
        return guarded([=] {
          PipelineConfig cfg =
              parse_pipeline_config(load_json_file(*config_path));
          if (seed_opt->count() > 0) {
            cfg.seed = *seed;
            cfg.scan.seed = *seed;
          }
          cfg.workers =
              effective_workers(*workers, workers_opt->count() > 0,
                                cfg.workers);
          if (!out_dir->empty()) cfg.out_dir = *out_dir;
          const PipelineResult result = run_pipeline(cfg);
          std::cout << result.report.to_text();
          std::cout << "artifacts (" << result.artifacts.size() << "):\n";
          for (const auto& path : result.artifacts)
            std::cout << "  " << path << "\n";
        });
      };
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }
  return action ? action() : kExitUsage;
}
