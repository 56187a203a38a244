#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "simtreels/cloud.hpp"
#include "simtreels/errors.hpp"
#include "simtreels/rng.hpp"

namespace simtreels {

/// A stochastic scalar: realised values are uniform in [mean - jitter,
/// mean + jitter]. Always consumes exactly one draw so a definition edit
/// never shifts unrelated streams.
struct Param {
  double mean = 0.0;
  double jitter = 0.0;

  double sample(Rng& rng) const {
    return mean + jitter * (2.0 * rng.uniform() - 1.0);
  }
  double lo() const { return mean - jitter; }
  double hi() const { return mean + jitter; }
};

/// Per-level branching parameters. Level 0 is the trunk, which uses only
/// `taper` and `curvature`; levels >= 1 use the full set. `child_count` of
/// level L is how many level-L elements sprout from each level-(L-1)
/// parent.
struct LevelParams {
  Param child_count{0.0, 0.0};
  Param length_ratio{0.5, 0.1};       // fraction of parent length
  Param base_radius_ratio{0.6, 0.1};  // fraction of parent radius at attach
  Param taper{0.6, 0.1};              // tip radius / base radius
  Param down_angle{45.0, 10.0};       // degrees off the parent axis
  Param curvature{15.0, 10.0};        // degrees of bend along the element
  Param start_fraction{0.6, 0.3};     // attach position along the parent
};

/// Recursive branching tree: trunk plus up to three branch orders, leaves
/// as flat disks at terminal tips, surfaces sampled at `sample_spacing`.
struct TreeDefinition {
  std::string name = "tree";
  int levels = 3;  // 1..4, including the trunk
  std::vector<LevelParams> level_params;  // one entry per level
  double trunk_height = 2.0;
  double trunk_base_radius = 0.1;
  int leaves_per_tip = 0;
  double leaf_radius = 0.05;
  double sample_spacing = 0.01;

  void validate() const;
};

namespace treegen_detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("tree definition: " + what);
}

inline void check_ratio(const Param& p, const std::string& what) {
  require(p.lo() > 0.0 && p.hi() <= 1.0, what + " must stay within (0, 1]");
}

inline void check_angle(const Param& p, const std::string& what) {
  require(p.lo() >= 0.0 && p.hi() < 180.0,
          what + " must stay within [0, 180) degrees");
}

}  // namespace treegen_detail

inline void TreeDefinition::validate() const {
  using treegen_detail::check_angle;
  using treegen_detail::check_ratio;
  using treegen_detail::require;
  require(levels >= 1 && levels <= 4, "levels must be in 1..4");
  require(static_cast<int>(level_params.size()) == levels,
          "level_params must have one entry per level");
  require(trunk_height > 0.0, "trunk_height must be > 0");
  require(trunk_base_radius > 0.0, "trunk_base_radius must be > 0");
  require(sample_spacing > 0.0, "sample_spacing must be > 0");
  require(leaves_per_tip >= 0, "leaves_per_tip must be >= 0");
  if (leaves_per_tip > 0)
    require(leaf_radius > 0.0, "leaf_radius must be > 0 when leaves are on");
  for (int lvl = 0; lvl < levels; ++lvl) {
    const LevelParams& lp = level_params[lvl];
    const std::string at = "level " + std::to_string(lvl) + " ";
    check_ratio(lp.taper, at + "taper");
    check_angle(lp.curvature, at + "curvature");
    if (lvl == 0) continue;  // trunk ignores the attachment params
    require(lp.child_count.lo() >= 0.0, at + "child_count must be >= 0");
    check_ratio(lp.length_ratio, at + "length_ratio");
    check_ratio(lp.base_radius_ratio, at + "base_radius_ratio");
    check_ratio(lp.start_fraction, at + "start_fraction");
    check_angle(lp.down_angle, at + "down_angle");
  }
}

/// Sample spacing that guarantees a beam with the given search radius
/// cannot slip between surface samples: half the radius, divided by the
/// extra safety factor.
inline double required_spacing(double search_radius, double safety = 1.0) {
  if (!(search_radius > 0.0)) throw ConfigError("search_radius must be > 0");
  if (!(safety >= 1.0)) throw ConfigError("safety factor must be >= 1");
  return search_radius / (2.0 * safety);
}

namespace treegen_detail {

inline constexpr std::uint64_t kTreeTag = 0x74726565u;
inline constexpr std::uint64_t kSurfaceTag = 1;
inline constexpr std::uint64_t kLeafTag = 2;
inline constexpr std::uint64_t kChildBase = 16;

constexpr double kDegToRad = std::numbers::pi / 180.0;

/// Any orthonormal pair perpendicular to unit vector d.
inline void frame(const Eigen::Vector3d& d, Eigen::Vector3d& u,
                  Eigen::Vector3d& v) {
  const Eigen::Vector3d ref = std::abs(d.x()) < 0.9
                                  ? Eigen::Vector3d::UnitX()
                                  : Eigen::Vector3d::UnitY();
  u = (ref - ref.dot(d) * d).normalized();
  v = d.cross(u);
}

/// One straight piece of a (possibly curved) element axis.
struct Segment {
  Eigen::Vector3d base;
  Eigen::Vector3d dir;  // unit
  Eigen::Vector3d u, v;
  double h = 0.0;   // axial length
  double r0 = 0.0;  // radius at base
  double r1 = 0.0;  // radius at top
};

/// Uniform point on a frustum lateral surface: axial coordinate drawn with
/// density proportional to the local radius, angle uniform.
inline Eigen::Vector3d frustum_point(const Segment& s, Rng& rng) {
  const double dr = s.r1 - s.r0;
  const double w = rng.uniform();
  double t;
  if (std::abs(dr) < 1e-12) {
    t = w;
  } else {
    const double m = w * (s.r0 + 0.5 * dr);  // target CDF mass
    t = (-s.r0 + std::sqrt(s.r0 * s.r0 + 2.0 * dr * m)) / dr;
  }
  const double r = s.r0 + dr * t;
  const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
  return s.base + t * s.h * s.dir +
         r * (std::cos(phi) * s.u + std::sin(phi) * s.v);
}

struct Builder {
  const TreeDefinition& def;
  std::uint32_t tree_id;
  LabelledCloud& out;
  double inv_sp2;

  void element(int level, const Eigen::Vector3d& start,
               const Eigen::Vector3d& dir, double length, double base_r,
               const Rng& stream_in) {
    Rng stream = stream_in;
    const LevelParams& lp = def.level_params[level];
    const double taper = lp.taper.sample(stream);
    const double curve = lp.curvature.sample(stream) * kDegToRad;
    const double roll = stream.uniform(0.0, 2.0 * std::numbers::pi);

    // Polyline axis: bend `curve` radians in one plane across n short
    // frusta. The bend axis is rolled randomly about the element axis.
    const int n_seg =
        std::max(1, std::min(10, static_cast<int>(std::ceil(
                                     curve / (10.0 * kDegToRad)))));
    Eigen::Vector3d u0, v0;
    frame(dir, u0, v0);
    const Eigen::Vector3d bend_axis = std::cos(roll) * u0 + std::sin(roll) * v0;
    const Eigen::AngleAxisd step(curve / n_seg, bend_axis);

    const double tip_r = base_r * taper;
    std::vector<Segment> segs(n_seg);
    Eigen::Vector3d p = start;
    Eigen::Vector3d d = dir;
    for (int j = 0; j < n_seg; ++j) {
      Segment& s = segs[j];
      s.base = p;
      s.dir = d;
      s.h = length / n_seg;
      s.r0 = base_r + (tip_r - base_r) * (static_cast<double>(j) / n_seg);
      s.r1 = base_r + (tip_r - base_r) * (static_cast<double>(j + 1) / n_seg);
      frame(d, s.u, s.v);
      p += s.h * d;
      if (j + 1 < n_seg) d = (step * d).normalized();
    }

    // Surface points for this element.
    const std::uint8_t label = static_cast<std::uint8_t>(std::min(level, 2));
    Rng srng = stream.child(kSurfaceTag);
    for (const Segment& s : segs) {
      const double slant = std::hypot(s.h, s.r0 - s.r1);
      const double area = std::numbers::pi * (s.r0 + s.r1) * slant;
      const std::uint64_t n = srng.poisson(area * inv_sp2);
      for (std::uint64_t k = 0; k < n; ++k)
        out.append_source(frustum_point(s, srng), tree_id, label);
    }

    // Children: geometry placed from the child's own stream so siblings
    // are insensitive to each other and to the child count.
    std::uint64_t n_children = 0;
    if (level + 1 < def.levels) {
      const LevelParams& cp = def.level_params[level + 1];
      const double raw = cp.child_count.sample(stream);
      n_children = raw <= 0.0 ? 0 : static_cast<std::uint64_t>(raw + 0.5);
      for (std::uint64_t i = 0; i < n_children; ++i) {
        Rng cstream = stream.child(kChildBase + i);
        const double f = cp.start_fraction.sample(cstream);
        const double az = cstream.uniform(0.0, 2.0 * std::numbers::pi);
        const double down = cp.down_angle.sample(cstream) * kDegToRad;
        const double l_ratio = cp.length_ratio.sample(cstream);
        const double r_ratio = cp.base_radius_ratio.sample(cstream);

        const double arc = f * length;
        int j = std::min(n_seg - 1,
                         static_cast<int>(arc / (length / n_seg)));
        const Segment& s = segs[j];
        const double local = arc / (length / n_seg) - j;  // in [0, 1)
        const double r_here = s.r0 + (s.r1 - s.r0) * local;
        const Eigen::Vector3d radial =
            std::cos(az) * s.u + std::sin(az) * s.v;
        const Eigen::Vector3d c_start =
            s.base + local * s.h * s.dir + r_here * radial;
        const Eigen::Vector3d c_dir =
            std::cos(down) * s.dir + std::sin(down) * radial;
        element(level + 1, c_start, c_dir, length * l_ratio,
                std::max(r_here * r_ratio, 1e-5), cstream);
      }
    }

    // Leaf disks cluster around tips that carry no further branches.
    if (n_children == 0 && def.leaves_per_tip > 0) {
      Rng lrng = stream.child(kLeafTag);
      const Eigen::Vector3d tip = p;
      const double R = def.leaf_radius;
      const double disk_area = std::numbers::pi * R * R;
      for (int leaf = 0; leaf < def.leaves_per_tip; ++leaf) {
        double raw[3];
        lrng.normal3(1.0, raw);
        Eigen::Vector3d offset(raw[0], raw[1], raw[2]);
        offset.normalize();
        const Eigen::Vector3d centre = tip + lrng.uniform(0.0, R) * offset;
        lrng.normal3(1.0, raw);
        const Eigen::Vector3d normal =
            Eigen::Vector3d(raw[0], raw[1], raw[2]).normalized();
        Eigen::Vector3d a, b;
        frame(normal, a, b);
        const std::uint64_t n = lrng.poisson(disk_area * inv_sp2);
        for (std::uint64_t k = 0; k < n; ++k) {
          const double rho = R * std::sqrt(lrng.uniform());
          const double psi = lrng.uniform(0.0, 2.0 * std::numbers::pi);
          out.append_source(
              centre + rho * (std::cos(psi) * a + std::sin(psi) * b), tree_id,
              3);
        }
      }
    }
  }
};

inline void hash_mix(std::uint64_t& h, std::uint64_t v) {
  h ^= v;
  h *= 0x100000001B3ull;  // FNV-1a on 64-bit blocks
}

inline std::uint64_t double_bits(double d) {
  std::uint64_t u;
  std::memcpy(&u, &d, sizeof u);
  return u;
}

}  // namespace treegen_detail

/// Stable content hash of a definition; recorded in cloud metadata so
/// outputs can be traced back to their exact parameters.
inline std::uint64_t definition_hash(const TreeDefinition& def) {
  using treegen_detail::double_bits;
  using treegen_detail::hash_mix;
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (char c : def.name) hash_mix(h, static_cast<unsigned char>(c));
  hash_mix(h, static_cast<std::uint64_t>(def.levels));
  auto mix_param = [&](const Param& p) {
    hash_mix(h, double_bits(p.mean));
    hash_mix(h, double_bits(p.jitter));
  };
  for (const LevelParams& lp : def.level_params) {
    mix_param(lp.child_count);
    mix_param(lp.length_ratio);
    mix_param(lp.base_radius_ratio);
    mix_param(lp.taper);
    mix_param(lp.down_angle);
    mix_param(lp.curvature);
    mix_param(lp.start_fraction);
  }
  hash_mix(h, double_bits(def.trunk_height));
  hash_mix(h, double_bits(def.trunk_base_radius));
  hash_mix(h, static_cast<std::uint64_t>(def.leaves_per_tip));
  hash_mix(h, double_bits(def.leaf_radius));
  hash_mix(h, double_bits(def.sample_spacing));
  return h;
}

/// Procedurally generates one tree: trunk rooted at the origin growing up
/// +Z, recursive branch orders labelled 0..2, leaf disks labelled 3, all
/// surfaces sampled at the definition's spacing. Deterministic per
/// (definition, seed); tree_id = seed.
inline LabelledCloud generate_tree(const TreeDefinition& def,
                                   std::uint64_t seed) {
  def.validate();
  if (seed > 0xFFFFFFFFull)
    throw ConfigError("tree seed must fit in 32 bits (it becomes tree_id)");

  LabelledCloud cloud;
  cloud.meta.seed = seed;
  cloud.meta.stage = "tree";
  cloud.meta.params_hash = definition_hash(def);

  const Rng root = Rng(seed).child(treegen_detail::kTreeTag);
  treegen_detail::Builder builder{
      def, static_cast<std::uint32_t>(seed), cloud,
      1.0 / (def.sample_spacing * def.sample_spacing)};
  builder.element(0, Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitZ(),
                  def.trunk_height, def.trunk_base_radius,
                  root.child(treegen_detail::kChildBase));
  return cloud;
}

}  // namespace simtreels
