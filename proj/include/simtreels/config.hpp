#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "simtreels/analysis.hpp"
#include "simtreels/errors.hpp"
#include "simtreels/presets.hpp"
#include "simtreels/scanner.hpp"

namespace simtreels {

using Json = nlohmann::json;

inline Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw IoError("config file " + path + " is not valid JSON: " + e.what());
  }
}

/// Content hash of a config: FNV-1a over the sorted-key compact dump, so
/// key order in the source file does not matter.
inline std::uint64_t canonical_hash(const Json& j) {
  const std::string dump = j.dump();
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

inline std::string hash_hex(std::uint64_t h) {
  std::ostringstream os;
  os << "0x" << std::hex << h;
  return os.str();
}

namespace config_detail {

template <typename T>
T get_or(const Json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw ConfigError("config field '" + key + "' has the wrong type");
  }
}

template <typename T>
T get_req(const Json& j, const std::string& key) {
  if (!j.contains(key)) throw ConfigError("config field '" + key +
                                          "' is required");
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw ConfigError("config field '" + key + "' has the wrong type");
  }
}

}  // namespace config_detail

/// A stochastic parameter is either a plain number (no jitter) or a
/// [mean, jitter] pair.
inline Param param_from_json(const Json& v) {
  if (v.is_number()) return {v.get<double>(), 0.0};
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
    return {v[0].get<double>(), v[1].get<double>()};
  throw ConfigError("parameter must be a number or a [mean, jitter] pair");
}

inline TreeDefinition tree_from_json(const Json& j) {
  using config_detail::get_or;
  if (!j.is_object()) throw ConfigError("tree definition must be an object");
  TreeDefinition def;
  def.name = get_or<std::string>(j, "name", "custom");
  def.levels = get_or<int>(j, "levels", def.levels);
  def.trunk_height = get_or<double>(j, "trunk_height", def.trunk_height);
  def.trunk_base_radius =
      get_or<double>(j, "trunk_base_radius", def.trunk_base_radius);
  def.leaves_per_tip = get_or<int>(j, "leaves_per_tip", def.leaves_per_tip);
  def.leaf_radius = get_or<double>(j, "leaf_radius", def.leaf_radius);
  def.sample_spacing = get_or<double>(j, "sample_spacing", def.sample_spacing);
  def.level_params.resize(def.levels >= 1 ? def.levels : 0);
  if (j.contains("level_params")) {
    const Json& lp = j.at("level_params");
    if (!lp.is_array())
      throw ConfigError("level_params must be an array of objects");
    def.level_params.clear();
    for (const Json& e : lp) {
      LevelParams p;
      if (e.contains("child_count")) p.child_count = param_from_json(e.at("child_count"));
      if (e.contains("length_ratio")) p.length_ratio = param_from_json(e.at("length_ratio"));
      if (e.contains("base_radius_ratio"))
        p.base_radius_ratio = param_from_json(e.at("base_radius_ratio"));
      if (e.contains("taper")) p.taper = param_from_json(e.at("taper"));
      if (e.contains("down_angle")) p.down_angle = param_from_json(e.at("down_angle"));
      if (e.contains("curvature")) p.curvature = param_from_json(e.at("curvature"));
      if (e.contains("start_fraction"))
        p.start_fraction = param_from_json(e.at("start_fraction"));
      def.level_params.push_back(p);
    }
  }
  def.validate();
  return def;
}

/// Preset name or inline definition object.
inline TreeDefinition resolve_tree(const Json& v) {
  if (v.is_string()) return preset_tree(v.get<std::string>());
  return tree_from_json(v);
}

inline SensorShape sensor_from_json(const Json& j) {
  using config_detail::get_or;
  using config_detail::get_req;
  if (!j.is_object()) throw ConfigError("sensor must be an object");
  const std::string kind = get_or<std::string>(j, "kind", "single_plane");
  const double range = get_or<double>(j, "max_range_m", 15.0);
  const double step = get_or<double>(j, "range_step_m", 0.02);
  if (kind == "single_plane")
    return build_single_plane(get_req<double>(j, "fov_deg"),
                              get_req<double>(j, "angular_res_deg"), range,
                              step);
  if (kind == "multi_plane")
    return build_multi_plane(get_req<double>(j, "fov_deg"),
                             get_req<double>(j, "angular_res_deg"), range,
                             step, get_req<int>(j, "n_planes"),
                             get_req<double>(j, "vertical_fov_deg"));
  if (kind == "spherical")
    return build_spherical(get_req<double>(j, "res_az_deg"),
                           get_req<double>(j, "res_el_deg"), range, step);
  throw ConfigError("unknown sensor kind '" + kind + "'");
}

inline SensorShape resolve_sensor(const Json& v) {
  if (v.is_string()) return preset_sensor(v.get<std::string>());
  return sensor_from_json(v);
}

inline Trajectory trajectory_from_json(const Json& j,
                                       const StandContext& ctx) {
  using config_detail::get_or;
  if (!j.is_object()) throw ConfigError("trajectory must be an object");
  const std::string kind = config_detail::get_req<std::string>(j, "kind");
  if (kind == "handheld-loop") {
    Eigen::Vector3d target = Eigen::Vector3d::Zero();
    if (j.contains("target")) {
      const Json& t = j.at("target");
      if (!t.is_array() || t.size() != 3)
        throw ConfigError("trajectory target must be [x, y, z]");
      target = {t[0].get<double>(), t[1].get<double>(), t[2].get<double>()};
    }
    return traj_handheld_loop(target, get_or<double>(j, "r_wide", 7.0),
                              get_or<double>(j, "r_close", 2.5),
                              get_or<double>(j, "height", 1.5),
                              get_or<double>(j, "step", 0.02),
                              get_or<double>(j, "osc_amp_deg", 45.0),
                              get_or<double>(j, "osc_period_m", 0.5));
  }
  if (kind == "ground-rows") {
    if (!ctx.is_orchard)
      throw ConfigError("ground-rows trajectory needs an orchard stand");
    return traj_ground_rows(ctx.orchard, get_or<double>(j, "height", 1.8),
                            get_or<double>(j, "step", 0.02));
  }
  if (kind == "aerial-grid")
    return traj_aerial_grid(get_or<double>(j, "extent_x", ctx.extent_x),
                            get_or<double>(j, "extent_y", ctx.extent_y),
                            get_or<double>(j, "altitude", 30.0),
                            get_or<double>(j, "line_spacing", 5.0),
                            get_or<double>(j, "step", 0.1));
  throw ConfigError("unknown trajectory kind '" + kind + "'");
}

inline Trajectory resolve_trajectory(const Json& v, const StandContext& ctx) {
  if (v.is_string()) return preset_trajectory(v.get<std::string>(), ctx);
  return trajectory_from_json(v, ctx);
}

struct StandSpec {
  bool is_orchard = true;
  OrchardParams orchard;
  ForestParams forest;
};

inline StandSpec resolve_stand(const Json& v) {
  using config_detail::get_or;
  StandSpec spec;
  if (v.is_string()) {
    const std::string name = v.get<std::string>();
    if (name == "orchard-6x10") {
      spec.orchard = preset_orchard_6x10();
      return spec;
    }
    if (name == "forest-min6") {
      spec.is_orchard = false;
      spec.forest = preset_forest_min6();
      return spec;
    }
    throw ConfigError("unknown stand preset '" + name + "'");
  }
  if (!v.is_object()) throw ConfigError("stand must be a preset name or object");
  const std::string kind = get_or<std::string>(v, "kind", "orchard");
  if (kind == "orchard") {
    spec.orchard.rows = get_or<int>(v, "rows", spec.orchard.rows);
    spec.orchard.trees_per_row =
        get_or<int>(v, "trees_per_row", spec.orchard.trees_per_row);
    spec.orchard.tree_spacing =
        get_or<double>(v, "tree_spacing", spec.orchard.tree_spacing);
    spec.orchard.row_spacing =
        get_or<double>(v, "row_spacing", spec.orchard.row_spacing);
    spec.orchard.row_azimuth_deg =
        get_or<double>(v, "row_azimuth_deg", spec.orchard.row_azimuth_deg);
    return spec;
  }
  if (kind == "forest") {
    spec.is_orchard = false;
    spec.forest.extent_x = get_or<double>(v, "extent_x", spec.forest.extent_x);
    spec.forest.extent_y = get_or<double>(v, "extent_y", spec.forest.extent_y);
    spec.forest.tree_count = get_or<int>(v, "tree_count", spec.forest.tree_count);
    spec.forest.min_spacing =
        get_or<double>(v, "min_spacing", spec.forest.min_spacing);
    spec.forest.max_attempts =
        get_or<std::uint64_t>(v, "max_attempts", spec.forest.max_attempts);
    return spec;
  }
  throw ConfigError("unknown stand kind '" + kind + "'");
}

struct RunSpec {
  std::string name;
  Json sensor;
  Json trajectory;
};

struct PipelineConfig {
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  unsigned workers = 1;
  std::string cloud_format = "ply";  // or "csv"
  Json tree = "avocado";
  StandSpec stand;
  ScanParams scan;
  double voxel_edge = kDefaultVoxelEdge;
  double match_radius = 0.0;  // 0 = 2 x search_radius
  std::size_t profile_bins = 10;
  std::vector<RunSpec> runs;
  std::uint64_t config_hash = 0;

  double effective_match_radius() const {
    return match_radius > 0.0
               ? match_radius
               : kDefaultMatchRadiusFactor * scan.search_radius;
  }
};

inline PipelineConfig parse_pipeline_config(const Json& j) {
  using config_detail::get_or;
  if (!j.is_object()) throw ConfigError("pipeline config must be an object");
  PipelineConfig cfg;
  cfg.config_hash = canonical_hash(j);
  cfg.seed = get_or<std::uint64_t>(j, "seed", cfg.seed);
  cfg.out_dir = get_or<std::string>(j, "out_dir", cfg.out_dir);
  cfg.workers = get_or<unsigned>(j, "workers", cfg.workers);
  cfg.cloud_format = get_or<std::string>(j, "cloud_format", cfg.cloud_format);
  if (cfg.cloud_format != "ply" && cfg.cloud_format != "csv")
    throw ConfigError("cloud_format must be 'ply' or 'csv'");
  if (j.contains("tree")) cfg.tree = j.at("tree");
  resolve_tree(cfg.tree);  // fail early on a bad definition
  cfg.stand = resolve_stand(j.contains("stand") ? j.at("stand")
                                                : Json("orchard-6x10"));
  if (j.contains("scan")) {
    const Json& s = j.at("scan");
    cfg.scan.search_radius =
        get_or<double>(s, "search_radius", cfg.scan.search_radius);
    cfg.scan.noise_sigma =
        get_or<double>(s, "noise_sigma", cfg.scan.noise_sigma);
    cfg.scan.dedupe = get_or<bool>(s, "dedupe", cfg.scan.dedupe);
  }
  cfg.scan.seed = cfg.seed;
  if (j.contains("analysis")) {
    const Json& a = j.at("analysis");
    cfg.voxel_edge = get_or<double>(a, "voxel_edge", cfg.voxel_edge);
    cfg.match_radius = get_or<double>(a, "match_radius", cfg.match_radius);
    const auto bins = get_or<std::int64_t>(
        a, "profile_bins", static_cast<std::int64_t>(cfg.profile_bins));
    if (bins < 2) throw ConfigError("analysis profile_bins must be >= 2");
    cfg.profile_bins = static_cast<std::size_t>(bins);
  }
  if (j.contains("runs")) {
    const Json& runs = j.at("runs");
    if (!runs.is_array()) throw ConfigError("runs must be an array");
    for (const Json& r : runs) {
      RunSpec spec;
      spec.name = config_detail::get_req<std::string>(r, "name");
      if (spec.name.empty() ||
          spec.name.find_first_not_of(
              "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
              "0123456789_-") != std::string::npos)
        throw ConfigError("run name '" + spec.name +
                          "' must be nonempty [A-Za-z0-9_-]");
      spec.sensor = r.contains("sensor") ? r.at("sensor") : Json("plane-270");
      spec.trajectory =
          r.contains("trajectory") ? r.at("trajectory") : Json("handheld-loop");
      resolve_sensor(spec.sensor);  // validate eagerly
      for (const auto& other : cfg.runs)
        if (other.name == spec.name)
          throw ConfigError("duplicate run name '" + spec.name + "'");
      cfg.runs.push_back(std::move(spec));
    }
  }
  if (cfg.runs.empty()) {
    RunSpec spec;
    spec.name = "handheld";
    spec.sensor = "plane-270";
    spec.trajectory = "handheld-loop";
    cfg.runs.push_back(std::move(spec));
  }
  return cfg;
}

}  // namespace simtreels
