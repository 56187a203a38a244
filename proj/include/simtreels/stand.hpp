#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <atomic>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "simtreels/cloud.hpp"
#include "simtreels/cloud_io.hpp"
#include "simtreels/errors.hpp"
#include "simtreels/rng.hpp"
#include "simtreels/treegen.hpp"

namespace simtreels {

/// Regular grid: trees march along +Y ("north") within a row, rows repeat
/// along +X, the whole grid is centred on the origin and then rotated by
/// the compass azimuth (0 = rows north-aligned, 90 = rows east-aligned).
struct OrchardParams {
  int rows = 5;
  int trees_per_row = 5;
  double tree_spacing = 6.0;
  double row_spacing = 10.0;
  double row_azimuth_deg = 0.0;
};

/// Dart-thrown random placements inside a centred rectangle, with a hard
/// minimum pairwise distance.
struct ForestParams {
  double extent_x = 30.0;
  double extent_y = 30.0;
  int tree_count = 9;
  double min_spacing = 6.0;
  std::uint64_t seed = 0;
  std::uint64_t max_attempts = 0;  // 0: default of 10000 * tree_count
};

/// One tree instance: where it stands, how it is turned, which definition
/// grows there and with which seed (the seed doubles as the tree ID).
struct TreePlacement {
  Eigen::Vector3d position{0, 0, 0};  // ground plane, z = 0
  double yaw_deg = 0.0;
  std::uint32_t tree_seed = 0;
  std::string definition_ref;
};

namespace stand_detail {

inline constexpr std::uint64_t kPlacementBase = 0x706C6163u;

/// Compass rotation in the ground plane: azimuth is measured clockwise
/// when looking down, so +Y rotates onto +X at 90 degrees.
inline Eigen::Vector2d rotate_azimuth(const Eigen::Vector2d& p,
                                      double azimuth_deg) {
  const double a = azimuth_deg * std::numbers::pi / 180.0;
  const double c = std::cos(a), s = std::sin(a);
  return {p.x() * c + p.y() * s, -p.x() * s + p.y() * c};
}

/// Yaw and a unique 32-bit tree seed for placement `index`, drawn from a
/// per-placement sub-stream so the values depend only on (seed, index).
inline void draw_identity(const Rng& root, std::size_t index,
                          std::set<std::uint32_t>& used, double& yaw_deg,
                          std::uint32_t& tree_seed) {
  Rng rng = root.child(kPlacementBase + index);
  yaw_deg = rng.uniform(0.0, 360.0);
  for (;;) {
    const auto candidate =
        static_cast<std::uint32_t>(rng.next_u64() & 0xFFFFFFFFull);
    if (candidate != 0 && used.insert(candidate).second) {
      tree_seed = candidate;
      return;
    }
  }
}

}  // namespace stand_detail

/// Grid placements in row-major order (row by row, then along the row).
inline std::vector<TreePlacement> layout_orchard(
    const OrchardParams& p, std::uint64_t seed,
    const std::string& definition_ref = "default") {
  if (p.rows < 1 || p.trees_per_row < 1)
    throw ConfigError("orchard counts must be >= 1");
  if (!(p.tree_spacing > 0.0) || !(p.row_spacing > 0.0))
    throw ConfigError("orchard spacings must be > 0");

  const Rng root(seed);
  std::set<std::uint32_t> used;
  std::vector<TreePlacement> out;
  out.reserve(static_cast<std::size_t>(p.rows) * p.trees_per_row);
  const double cx = 0.5 * (p.rows - 1) * p.row_spacing;
  const double cy = 0.5 * (p.trees_per_row - 1) * p.tree_spacing;
  for (int row = 0; row < p.rows; ++row)
    for (int k = 0; k < p.trees_per_row; ++k) {
      const Eigen::Vector2d grid(row * p.row_spacing - cx,
                                 k * p.tree_spacing - cy);
      const Eigen::Vector2d xy =
          stand_detail::rotate_azimuth(grid, p.row_azimuth_deg);
      TreePlacement tp;
      tp.position = {xy.x(), xy.y(), 0.0};
      tp.definition_ref = definition_ref;
      stand_detail::draw_identity(root, out.size(), used, tp.yaw_deg,
                                  tp.tree_seed);
      out.push_back(std::move(tp));
    }
  return out;
}

/// Seeded dart throwing: uniform candidate positions, rejected when closer
/// than min_spacing to any accepted tree. Gives up (PlacementFailure) once
/// the attempt budget is spent, which is how an over-full extent surfaces.
inline std::vector<TreePlacement> layout_forest(
    const ForestParams& p, const std::string& definition_ref = "default") {
  if (p.tree_count < 1) throw ConfigError("forest tree_count must be >= 1");
  if (!(p.extent_x > 0.0) || !(p.extent_y > 0.0))
    throw ConfigError("forest extent must be > 0");
  if (!(p.min_spacing > 0.0))
    throw ConfigError("forest min_spacing must be > 0");

  const std::uint64_t budget =
      p.max_attempts ? p.max_attempts
                     : 10000ull * static_cast<std::uint64_t>(p.tree_count);
  const Rng root(p.seed);
  Rng darts = root.child(1);
  std::set<std::uint32_t> used;
  std::vector<TreePlacement> out;
  std::uint64_t attempts = 0;
  const double min2 = p.min_spacing * p.min_spacing;
  while (out.size() < static_cast<std::size_t>(p.tree_count)) {
    if (attempts++ >= budget)
      throw PlacementFailureError(
          "could not fit " + std::to_string(p.tree_count) + " trees in " +
          std::to_string(p.extent_x) + "x" + std::to_string(p.extent_y) +
          " m with min spacing " + std::to_string(p.min_spacing) + " m after " +
          std::to_string(budget) + " attempts");
    const Eigen::Vector2d xy(
        darts.uniform(-0.5 * p.extent_x, 0.5 * p.extent_x),
        darts.uniform(-0.5 * p.extent_y, 0.5 * p.extent_y));
    bool clear = true;
    for (const auto& t : out)
      if ((t.position.head<2>() - xy).squaredNorm() < min2) {
        clear = false;
        break;
      }
    if (!clear) continue;
    TreePlacement tp;
    tp.position = {xy.x(), xy.y(), 0.0};
    tp.definition_ref = definition_ref;
    stand_detail::draw_identity(root, out.size(), used, tp.yaw_deg,
                                tp.tree_seed);
    out.push_back(std::move(tp));
  }
  return out;
}

/// Generates every placed tree (optionally across worker threads), turns
/// it about its own trunk axis, moves it into place and concatenates in
/// placement order so the result does not depend on scheduling.
inline LabelledCloud assemble_stand(
    const std::vector<TreePlacement>& placements,
    const std::map<std::string, TreeDefinition>& definitions,
    unsigned workers = 1) {
  if (placements.empty()) throw ConfigError("stand has no placements");
  std::set<std::uint32_t> seeds;
  for (const auto& tp : placements) {
    if (!definitions.count(tp.definition_ref))
      throw ConfigError("placement references unknown tree definition '" +
                        tp.definition_ref + "'");
    if (!seeds.insert(tp.tree_seed).second)
      throw ConfigError("duplicate tree_seed " +
                        std::to_string(tp.tree_seed) + " in stand");
  }

  std::vector<LabelledCloud> parts(placements.size());
  auto build = [&](std::size_t i) {
    const TreePlacement& tp = placements[i];
    LabelledCloud tree =
        generate_tree(definitions.at(tp.definition_ref), tp.tree_seed);
    const Eigen::AngleAxisd yaw(tp.yaw_deg * std::numbers::pi / 180.0,
                                Eigen::Vector3d::UnitZ());
    const Eigen::Matrix3d rot = yaw.toRotationMatrix();
    for (auto& pos : tree.positions) pos = rot * pos + tp.position;
    parts[i] = std::move(tree);
  };

  if (workers <= 1 || placements.size() == 1) {
    for (std::size_t i = 0; i < placements.size(); ++i) build(i);
  } else {
    std::atomic<std::size_t> next{0};
    auto run = [&] {
      for (std::size_t i = next.fetch_add(1); i < placements.size();
           i = next.fetch_add(1))
        build(i);
    };
    std::vector<std::thread> pool;
    const unsigned n = std::min<std::size_t>(workers, placements.size());
    pool.reserve(n);
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(run);
    for (auto& t : pool) t.join();
  }

  LabelledCloud stand;
  std::size_t total = 0;
  for (const auto& part : parts) total += part.size();
  stand.reserve(total);
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    treegen_detail::hash_mix(h, parts[i].meta.params_hash);
    treegen_detail::hash_mix(h, placements[i].tree_seed);
    treegen_detail::hash_mix(
        h, treegen_detail::double_bits(placements[i].yaw_deg));
    stand.append_cloud(parts[i]);
  }
  stand.meta.stage = "stand";
  stand.meta.params_hash = h;
  return stand;
}

/// Placement table as CSV (`x,y,yaw_deg,tree_seed,definition`).
inline constexpr const char* kPlacementCsvHeader =
    "x,y,yaw_deg,tree_seed,definition";

inline std::string placements_to_csv(
    const std::vector<TreePlacement>& placements) {
  using namespace io_detail;
  std::string out = kPlacementCsvHeader;
  out.push_back('\n');
  for (const auto& tp : placements) {
    append_double(out, tp.position.x());
    out.push_back(',');
    append_double(out, tp.position.y());
    out.push_back(',');
    append_double(out, tp.yaw_deg);
    out.push_back(',');
    append_uint(out, tp.tree_seed);
    out.push_back(',');
    out += tp.definition_ref;
    out.push_back('\n');
  }
  return out;
}

inline std::vector<TreePlacement> placements_from_csv(std::string_view text) {
  using namespace io_detail;
  std::vector<TreePlacement> out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line_no == 1) {
      if (line != kPlacementCsvHeader)
        throw IoError("placement CSV must start with '" +
                      std::string(kPlacementCsvHeader) + "'");
      continue;
    }
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != 5)
      throw IoError("placement CSV line " + std::to_string(line_no) +
                    ": expected 5 fields, got " +
                    std::to_string(fields.size()));
    TreePlacement tp;
    tp.position = {parse_double(fields[0], "x"), parse_double(fields[1], "y"),
                   0.0};
    tp.yaw_deg = parse_double(fields[2], "yaw_deg");
    tp.tree_seed =
        static_cast<std::uint32_t>(parse_uint(fields[3], "tree_seed"));
    tp.definition_ref = std::string(fields[4]);
    out.push_back(std::move(tp));
  }
  return out;
}

}  // namespace simtreels
