#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "simtreels/cloud.hpp"
#include "simtreels/errors.hpp"
#include "simtreels/rng.hpp"

namespace simtreels {

/// Uniform hash-grid over a LabelledCloud for small fixed-radius queries.
///
/// Immutable after construction; concurrent queries are safe. The index
/// keeps a pointer to the cloud, which must outlive it. Pick `cell_size`
/// equal to the dominant query radius; queries with any r > 0 are exact
/// regardless, larger radii just touch more cells.
///
/// Results are deterministic: ties on distance resolve to the lowest point
/// index, and `all_within` sorts by (distance, index).
class SpatialIndex {
public:
  struct Hit {
    std::uint32_t index;
    double distance;
  };

  SpatialIndex(const LabelledCloud& cloud, double cell_size)
      : cloud_(&cloud), cell_(cell_size) {
    if (cloud.empty()) throw EmptyCloudError("cannot index an empty cloud");
    if (!(cell_size > 0.0)) throw ConfigError("cell_size must be > 0");
    inv_cell_ = 1.0 / cell_;
    build();
  }

  SpatialIndex(const SpatialIndex&) = delete;
  SpatialIndex& operator=(const SpatialIndex&) = delete;
  SpatialIndex(SpatialIndex&&) = default;
  SpatialIndex& operator=(SpatialIndex&&) = default;

  const LabelledCloud& cloud() const { return *cloud_; }
  double cell_size() const { return cell_; }

  /// Closest point with distance <= r, or nothing. Equal distances resolve
  /// to the lowest source index.
  std::optional<Hit> nearest_within(const Eigen::Vector3d& q, double r) const {
    double best_d2 = std::numeric_limits<double>::infinity();
    std::uint32_t best_idx = 0;
    bool found = false;
    const double r2 = r * r;
    visit_candidates(q, r, [&](std::uint32_t idx, double d2) {
      if (d2 <= r2 && (d2 < best_d2 || (d2 == best_d2 && idx < best_idx))) {
        best_d2 = d2;
        best_idx = idx;
        found = true;
      }
      return false;
    });
    if (!found) return std::nullopt;
    return Hit{best_idx, std::sqrt(best_d2)};
  }

  /// All points with distance <= r, sorted by (distance, index).
  std::vector<Hit> all_within(const Eigen::Vector3d& q, double r) const {
    std::vector<std::pair<double, std::uint32_t>> found;
    const double r2 = r * r;
    visit_candidates(q, r, [&](std::uint32_t idx, double d2) {
      if (d2 <= r2) found.emplace_back(d2, idx);
      return false;
    });
    std::sort(found.begin(), found.end());
    std::vector<Hit> hits;
    hits.reserve(found.size());
    for (const auto& [d2, idx] : found) hits.push_back({idx, std::sqrt(d2)});
    return hits;
  }

  /// True iff any point lies within r of q (early exit).
  bool any_within(const Eigen::Vector3d& q, double r) const {
    const double r2 = r * r;
    bool found = false;
    visit_candidates(q, r, [&](std::uint32_t, double d2) {
      if (d2 <= r2) {
        found = true;
        return true;
      }
      return false;
    });
    return found;
  }

  /// Constant-time negative test: false guarantees no point lies within
  /// `cell_size` of q. Only valid for query radii <= cell_size.
  bool occupied_near(const Eigen::Vector3d& q) const {
    const Eigen::Vector3d rel = q - macro_origin_;
    const int mx = static_cast<int>(std::floor(rel.x() * inv_macro_));
    const int my = static_cast<int>(std::floor(rel.y() * inv_macro_));
    const int mz = static_cast<int>(std::floor(rel.z() * inv_macro_));
    if (mx < 0 || my < 0 || mz < 0 || mx >= macro_dims_[0] ||
        my >= macro_dims_[1] || mz >= macro_dims_[2])
      return false;
    return macro_occupied_[(static_cast<std::size_t>(mx) * macro_dims_[1] +
                            my) *
                               macro_dims_[2] +
                           mz] != 0;
  }

  /// Data bounds padded by cell_size: any query that can match a point lies
  /// inside this box.
  void padded_bounds(Eigen::Vector3d& lo, Eigen::Vector3d& hi) const {
    lo = bbox_lo_ - Eigen::Vector3d::Constant(cell_);
    hi = bbox_hi_ + Eigen::Vector3d::Constant(cell_);
  }

private:
  struct Cell {
    std::uint64_t key;
    std::uint32_t begin;
    std::uint32_t count;
  };

  static constexpr int kCoordBias = 1 << 20;
  static constexpr std::uint32_t kEmptySlot = 0xFFFFFFFFu;

  int coord_to_cell(double c) const {
    return static_cast<int>(std::floor(c * inv_cell_));
  }

  static std::uint64_t pack(int ix, int iy, int iz) {
    return (static_cast<std::uint64_t>(ix + kCoordBias) << 42) |
           (static_cast<std::uint64_t>(iy + kCoordBias) << 21) |
           static_cast<std::uint64_t>(iz + kCoordBias);
  }

  void build() {
    const auto& pts = cloud_->positions;
    const std::size_t n = pts.size();
    cloud_->bounds(bbox_lo_, bbox_hi_);

    std::vector<std::pair<std::uint64_t, std::uint32_t>> keyed(n);
    for (std::size_t i = 0; i < n; ++i) {
      const int ix = coord_to_cell(pts[i].x());
      const int iy = coord_to_cell(pts[i].y());
      const int iz = coord_to_cell(pts[i].z());
      if (std::abs(ix) >= kCoordBias || std::abs(iy) >= kCoordBias ||
          std::abs(iz) >= kCoordBias)
        throw ConfigError("cell_size too small for cloud extent");
      keyed[i] = {pack(ix, iy, iz), static_cast<std::uint32_t>(i)};
    }
    std::sort(keyed.begin(), keyed.end());

    order_.resize(n);
    for (std::size_t i = 0; i < n; ++i) order_[i] = keyed[i].second;
    for (std::size_t i = 0; i < n;) {
      std::size_t j = i;
      while (j < n && keyed[j].first == keyed[i].first) ++j;
      cells_.push_back({keyed[i].first, static_cast<std::uint32_t>(i),
                        static_cast<std::uint32_t>(j - i)});
      i = j;
    }

    std::size_t cap = 16;
    while (cap < cells_.size() * 2) cap <<= 1;
    table_mask_ = cap - 1;
    table_.assign(cap, kEmptySlot);
    for (std::size_t c = 0; c < cells_.size(); ++c) {
      std::size_t slot = mix64(cells_[c].key) & table_mask_;
      while (table_[slot] != kEmptySlot) slot = (slot + 1) & table_mask_;
      table_[slot] = static_cast<std::uint32_t>(c);
    }

    build_macro();
  }

  void build_macro() {
    // Occupancy at 8x cell granularity, dilated by one cell so a negative
    // lookup rules out any point within cell_size of the query.
    macro_ = 8.0 * cell_;
    inv_macro_ = 1.0 / macro_;
    const double pad = cell_;
    macro_origin_ = bbox_lo_ - Eigen::Vector3d::Constant(pad + macro_);
    const Eigen::Vector3d span =
        bbox_hi_ + Eigen::Vector3d::Constant(pad + macro_) - macro_origin_;
    for (int a = 0; a < 3; ++a)
      macro_dims_[a] = static_cast<int>(std::floor(span[a] * inv_macro_)) + 1;
    macro_occupied_.assign(static_cast<std::size_t>(macro_dims_[0]) *
                               macro_dims_[1] * macro_dims_[2],
                           0);
    for (const auto& p : cloud_->positions) {
      int lo[3], hi[3];
      for (int a = 0; a < 3; ++a) {
        lo[a] = static_cast<int>(
            std::floor((p[a] - pad - macro_origin_[a]) * inv_macro_));
        hi[a] = static_cast<int>(
            std::floor((p[a] + pad - macro_origin_[a]) * inv_macro_));
      }
      for (int x = lo[0]; x <= hi[0]; ++x)
        for (int y = lo[1]; y <= hi[1]; ++y)
          for (int z = lo[2]; z <= hi[2]; ++z)
            macro_occupied_[(static_cast<std::size_t>(x) * macro_dims_[1] + y) *
                                macro_dims_[2] +
                            z] = 1;
    }
  }

  const Cell* find_cell(std::uint64_t key) const {
    std::size_t slot = mix64(key) & table_mask_;
    while (true) {
      const std::uint32_t c = table_[slot];
      if (c == kEmptySlot) return nullptr;
      if (cells_[c].key == key) return &cells_[c];
      slot = (slot + 1) & table_mask_;
    }
  }

  /// Calls fn(point_index, squared_distance) for every point in cells that
  /// can intersect the query sphere; fn returning true stops the visit.
  template <typename Fn>
  void visit_candidates(const Eigen::Vector3d& q, double r, Fn&& fn) const {
    if (!(r > 0.0)) throw ConfigError("query radius must be > 0");
    const auto& pts = cloud_->positions;
    int lo[3], hi[3];
    std::size_t range_cells = 1;
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::max(coord_to_cell(q[a] - r), coord_to_cell(bbox_lo_[a]));
      hi[a] = std::min(coord_to_cell(q[a] + r), coord_to_cell(bbox_hi_[a]));
      if (lo[a] > hi[a]) return;
      range_cells *= static_cast<std::size_t>(hi[a] - lo[a] + 1);
    }

    auto scan_cell = [&](const Cell& cell) -> bool {
      const std::uint32_t end = cell.begin + cell.count;
      for (std::uint32_t k = cell.begin; k < end; ++k) {
        const std::uint32_t idx = order_[k];
        const double d2 = (pts[idx] - q).squaredNorm();
        if (fn(idx, d2)) return true;
      }
      return false;
    };

    if (range_cells <= cells_.size()) {
      for (int x = lo[0]; x <= hi[0]; ++x)
        for (int y = lo[1]; y <= hi[1]; ++y)
          for (int z = lo[2]; z <= hi[2]; ++z) {
            const Cell* cell = find_cell(pack(x, y, z));
            if (cell && scan_cell(*cell)) return;
          }
    } else {
      // Wide radius: walking the occupied cell list beats enumerating the
      // cell range.
      for (const auto& cell : cells_) {
        const int ix = static_cast<int>(cell.key >> 42) - kCoordBias;
        const int iy =
            static_cast<int>((cell.key >> 21) & 0x1FFFFF) - kCoordBias;
        const int iz = static_cast<int>(cell.key & 0x1FFFFF) - kCoordBias;
        if (ix < lo[0] || ix > hi[0] || iy < lo[1] || iy > hi[1] ||
            iz < lo[2] || iz > hi[2])
          continue;
        if (scan_cell(cell)) return;
      }
    }
  }

  const LabelledCloud* cloud_;
  double cell_;
  double inv_cell_;
  Eigen::Vector3d bbox_lo_{0, 0, 0}, bbox_hi_{0, 0, 0};

  std::vector<std::uint32_t> order_;
  std::vector<Cell> cells_;
  std::vector<std::uint32_t> table_;
  std::size_t table_mask_ = 0;

  double macro_ = 0, inv_macro_ = 0;
  Eigen::Vector3d macro_origin_{0, 0, 0};
  int macro_dims_[3] = {0, 0, 0};
  std::vector<std::uint8_t> macro_occupied_;
};

/// Free-function alias: build a radius-query index over a cloud.
inline SpatialIndex build_index(const LabelledCloud& cloud, double cell_size) {
  return SpatialIndex(cloud, cell_size);
}

}  // namespace simtreels
