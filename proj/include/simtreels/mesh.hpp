#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <array>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "simtreels/cloud.hpp"
#include "simtreels/errors.hpp"
#include "simtreels/rng.hpp"

namespace simtreels {

/// Indexed triangle soup with a branch level and tree ID per face.
/// Parallel arrays follow the same column-wise layout as LabelledCloud.
struct TriangleMesh {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<std::array<std::uint32_t, 3>> faces;
  std::vector<std::uint8_t> face_levels;
  std::vector<std::uint32_t> face_tree_ids;

  std::size_t face_count() const { return faces.size(); }

  double face_area(std::size_t i) const {
    const auto& f = faces[i];
    const Eigen::Vector3d e1 = vertices[f[1]] - vertices[f[0]];
    const Eigen::Vector3d e2 = vertices[f[2]] - vertices[f[0]];
    return 0.5 * e1.cross(e2).norm();
  }

  double total_area() const {
    double a = 0.0;
    for (std::size_t i = 0; i < faces.size(); ++i) a += face_area(i);
    return a;
  }

  void validate() const {
    if (faces.empty()) throw ConfigError("mesh has no faces");
    if (face_levels.size() != faces.size() ||
        face_tree_ids.size() != faces.size())
      throw ConfigError("mesh face attribute arrays must match face count");
    for (const auto& f : faces)
      for (std::uint32_t idx : f)
        if (idx >= vertices.size())
          throw ConfigError("mesh face index " + std::to_string(idx) +
                            " out of range");
    for (const auto& v : vertices)
      if (!v.allFinite())
        throw ConfigError("mesh vertex coordinates must be finite");
    for (std::uint8_t lvl : face_levels)
      if (lvl > kMaxLevel)
        throw ConfigError("mesh face level out of range 0..3");
  }
};

namespace mesh_detail {

inline constexpr std::uint64_t kSampleTag = 0x6D657368u;  // stream namespace

}  // namespace mesh_detail

/// Area-weighted uniform surface sampling at expected density 1/spacing^2
/// points per square metre. Per-face counts are Poisson so small faces
/// contribute without bias; each sample inherits its face's level and tree
/// ID. Deterministic per seed, independent of how often other faces draw.
inline LabelledCloud sample_mesh(const TriangleMesh& mesh, double spacing,
                                 std::uint64_t seed) {
  mesh.validate();
  if (!(spacing > 0.0)) throw ConfigError("sample spacing must be > 0");
  if (!(mesh.total_area() > 0.0))
    throw DegenerateMeshError("mesh has zero total surface area");

  const double inv_sp2 = 1.0 / (spacing * spacing);
  const Rng root = Rng(seed).child(mesh_detail::kSampleTag);

  LabelledCloud cloud;
  cloud.meta.seed = seed;
  cloud.meta.stage = "mesh";
  for (std::size_t i = 0; i < mesh.face_count(); ++i) {
    const double area = mesh.face_area(i);
    if (!(area > 0.0)) continue;
    Rng rng = root.child(i);
    const std::uint64_t n = rng.poisson(area * inv_sp2);
    const auto& f = mesh.faces[i];
    const Eigen::Vector3d& a = mesh.vertices[f[0]];
    const Eigen::Vector3d e1 = mesh.vertices[f[1]] - a;
    const Eigen::Vector3d e2 = mesh.vertices[f[2]] - a;
    for (std::uint64_t k = 0; k < n; ++k) {
      double u = rng.uniform();
      double v = rng.uniform();
      if (u + v > 1.0) {  // fold the unit square onto the triangle
        u = 1.0 - u;
        v = 1.0 - v;
      }
      cloud.append_source(a + u * e1 + v * e2, mesh.face_tree_ids[i],
                          mesh.face_levels[i]);
    }
  }
  return cloud;
}

namespace mesh_detail {

/// Group/material name -> branch level. Explicit overrides win; otherwise
/// a heuristic keyed on common tree-mesh naming: "trunk" -> 0, "leaf" -> 3,
/// "stem"/"branch" with a digit -> that digit clamped to {1, 2}.
inline std::uint8_t resolve_label(
    const std::string& name,
    const std::map<std::string, std::uint8_t>& overrides) {
  if (auto it = overrides.find(name); it != overrides.end()) {
    if (it->second > kMaxLevel)
      throw ConfigError("label override for '" + name + "' out of range 0..3");
    return it->second;
  }
  std::string low;
  low.reserve(name.size());
  for (char c : name)
    low.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (low.find("trunk") != std::string::npos) return 0;
  if (low.find("leaf") != std::string::npos ||
      low.find("leaves") != std::string::npos)
    return 3;
  if (low.find("stem") != std::string::npos ||
      low.find("branch") != std::string::npos) {
    for (char c : low)
      if (c >= '0' && c <= '9') {
        int d = c - '0';
        if (d < 1) d = 1;
        if (d > 2) d = 2;
        return static_cast<std::uint8_t>(d);
      }
  }
  throw ConfigError("cannot map OBJ group '" + name +
                    "' to a branch level; add an explicit label override");
}

/// One face-vertex reference ("7", "7/2", "7//3", "-1"); only the vertex
/// index matters here. OBJ indices are 1-based, negatives count from the
/// end of the vertex list so far.
inline std::uint32_t parse_vertex_ref(const std::string& token,
                                      std::size_t vertex_count) {
  const std::string head = token.substr(0, token.find('/'));
  long idx = 0;
  try {
    idx = std::stol(head);
  } catch (const std::exception&) {
    throw IoError("malformed OBJ face reference '" + token + "'");
  }
  if (idx < 0) idx += static_cast<long>(vertex_count) + 1;
  if (idx < 1 || idx > static_cast<long>(vertex_count))
    throw IoError("OBJ face reference '" + token + "' out of range");
  return static_cast<std::uint32_t>(idx - 1);
}

}  // namespace mesh_detail

/// Wavefront OBJ import: `v` and `f` records; `g` / `usemtl` records open
/// label groups resolved to branch levels (see resolve_label). Polygons
/// with more than three vertices are fan-triangulated. Every face carries
/// `tree_id`.
inline TriangleMesh load_obj(
    const std::string& path,
    const std::map<std::string, std::uint8_t>& label_overrides = {},
    std::uint32_t tree_id = 0) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open OBJ file: " + path);

  TriangleMesh mesh;
  bool have_label = false;
  std::uint8_t label = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string rec;
    if (!(ls >> rec) || rec[0] == '#') continue;
    if (rec == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z))
        throw IoError("malformed OBJ vertex at line " +
                      std::to_string(line_no));
      mesh.vertices.emplace_back(x, y, z);
    } else if (rec == "g" || rec == "usemtl" || rec == "o") {
      std::string name;
      ls >> name;
      if (rec == "o") continue;  // object names carry no label meaning
      label = mesh_detail::resolve_label(name, label_overrides);
      have_label = true;
    } else if (rec == "f") {
      std::vector<std::uint32_t> poly;
      std::string token;
      while (ls >> token)
        poly.push_back(
            mesh_detail::parse_vertex_ref(token, mesh.vertices.size()));
      if (poly.size() < 3)
        throw IoError("OBJ face with fewer than 3 vertices at line " +
                      std::to_string(line_no));
      if (!have_label)
        throw ConfigError("OBJ face before any g/usemtl label group at line " +
                          std::to_string(line_no));
      for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
        mesh.faces.push_back({poly[0], poly[k], poly[k + 1]});
        mesh.face_levels.push_back(label);
        mesh.face_tree_ids.push_back(tree_id);
      }
    }
    // All other record types (vn, vt, s, mtllib, ...) are ignored.
  }
  if (mesh.faces.empty())
    throw IoError("OBJ file contains no faces: " + path);
  mesh.validate();
  return mesh;
}

}  // namespace simtreels
