#include <catch2/catch_amalgamated.hpp>

#include <limits>
#include <optional>
#include <vector>

#include "simtreels/cloud.hpp"
#include "simtreels/rng.hpp"
#include "simtreels/spatial_index.hpp"

using namespace simtreels;

namespace {

// Independent exhaustive reference for radius queries; mirrors the
// contract, not the implementation.
std::optional<SpatialIndex::Hit> brute_nearest(const LabelledCloud& cloud,
                                               const Eigen::Vector3d& q,
                                               double r) {
  double best_d2 = std::numeric_limits<double>::infinity();
  std::uint32_t best = 0;
  bool found = false;
  const double r2 = r * r;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const double d2 = (cloud.positions[i] - q).squaredNorm();
    if (d2 <= r2 && (d2 < best_d2)) {
      best_d2 = d2;
      best = static_cast<std::uint32_t>(i);
      found = true;
    }
  }
  if (!found) return std::nullopt;
  return SpatialIndex::Hit{best, std::sqrt(best_d2)};
}

std::vector<SpatialIndex::Hit> brute_all(const LabelledCloud& cloud,
                                         const Eigen::Vector3d& q, double r) {
  std::vector<std::pair<double, std::uint32_t>> found;
  const double r2 = r * r;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const double d2 = (cloud.positions[i] - q).squaredNorm();
    if (d2 <= r2) found.emplace_back(d2, static_cast<std::uint32_t>(i));
  }
  std::sort(found.begin(), found.end());
  std::vector<SpatialIndex::Hit> out;
  for (auto& [d2, i] : found) out.push_back({i, std::sqrt(d2)});
  return out;
}

LabelledCloud random_cloud(std::size_t n, double extent, std::uint64_t seed) {
  LabelledCloud cloud;
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::Vector3d p(rng.uniform(-extent, extent), rng.uniform(-extent, extent),
                      rng.uniform(-extent, extent));
    cloud.append_source(p, static_cast<std::uint32_t>(i % 5),
                        static_cast<std::uint8_t>(i % 4));
  }
  return cloud;
}

}  // namespace

TEST_CASE("index over three points retrieves each") {
  LabelledCloud cloud;
  cloud.append_source({0, 0, 0}, 1, 0);
  cloud.append_source({1, 0, 0}, 1, 1);
  cloud.append_source({0, 2, 0}, 1, 2);
  SpatialIndex index(cloud, 0.02);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    auto hit = index.nearest_within(cloud.positions[i], 0.01);
    REQUIRE(hit.has_value());
    REQUIRE(hit->index == i);
    REQUIRE(hit->distance == 0.0);
  }
}

TEST_CASE("empty cloud cannot be indexed") {
  LabelledCloud cloud;
  REQUIRE_THROWS_AS(SpatialIndex(cloud, 0.02), EmptyCloudError);
}

TEST_CASE("invalid cell size is rejected") {
  LabelledCloud cloud;
  cloud.append_source({0, 0, 0}, 0, 0);
  REQUIRE_THROWS_AS(SpatialIndex(cloud, 0.0), ConfigError);
  REQUIRE_THROWS_AS(SpatialIndex(cloud, -1.0), ConfigError);
}

TEST_CASE("nearest misses outside the radius") {
  LabelledCloud cloud;
  cloud.append_source({0, 0, 0}, 0, 0);
  SpatialIndex index(cloud, 0.02);
  REQUIRE_FALSE(index.nearest_within({0.05, 0, 0}, 0.02).has_value());
}

TEST_CASE("equal distances break ties to the lower index") {
  LabelledCloud cloud;
  cloud.append_source({0.01, 0, 0}, 0, 0);
  cloud.append_source({-0.01, 0, 0}, 0, 0);
  SpatialIndex index(cloud, 0.02);
  auto hit = index.nearest_within({0, 0, 0}, 0.02);
  REQUIRE(hit.has_value());
  REQUIRE(hit->index == 0);

  // same cloud, reversed order: still the lower index
  LabelledCloud rev;
  rev.append_source({-0.01, 0, 0}, 0, 0);
  rev.append_source({0.01, 0, 0}, 0, 0);
  SpatialIndex index2(rev, 0.02);
  auto hit2 = index2.nearest_within({0, 0, 0}, 0.02);
  REQUIRE(hit2->index == 0);
}

TEST_CASE("all_within returns the enclosed subset sorted") {
  LabelledCloud cloud;
  cloud.append_source({0, 0, 0}, 0, 0);
  cloud.append_source({0.5, 0, 0}, 0, 0);
  cloud.append_source({1.0, 0, 0}, 0, 0);
  cloud.append_source({5.0, 0, 0}, 0, 0);
  cloud.append_source({6.0, 0, 0}, 0, 0);
  SpatialIndex index(cloud, 0.5);
  auto hits = index.all_within({0, 0, 0}, 1.5);
  REQUIRE(hits.size() == 3);
  REQUIRE(hits[0].index == 0);
  REQUIRE(hits[1].index == 1);
  REQUIRE(hits[2].index == 2);
  for (std::size_t i = 1; i < hits.size(); ++i)
    REQUIRE(hits[i - 1].distance <= hits[i].distance);
}

TEST_CASE("huge radius returns every point") {
  auto cloud = random_cloud(500, 10.0, 99);
  SpatialIndex index(cloud, 0.5);
  auto hits = index.all_within({3, -2, 1}, 1e6);
  REQUIRE(hits.size() == cloud.size());
}

TEST_CASE("grid queries match the exhaustive oracle") {
  auto cloud = random_cloud(10000, 5.0, 1234);
  SpatialIndex index(cloud, 0.1);
  Rng rng(777);
  for (int k = 0; k < 500; ++k) {
    Eigen::Vector3d q(rng.uniform(-5.5, 5.5), rng.uniform(-5.5, 5.5),
                      rng.uniform(-5.5, 5.5));
    const double r = rng.uniform(0.01, 0.8);

    auto got = index.nearest_within(q, r);
    auto want = brute_nearest(cloud, q, r);
    REQUIRE(got.has_value() == want.has_value());
    if (got) {
      REQUIRE(got->index == want->index);
      REQUIRE(got->distance == want->distance);
    }

    auto got_all = index.all_within(q, r);
    auto want_all = brute_all(cloud, q, r);
    REQUIRE(got_all.size() == want_all.size());
    for (std::size_t i = 0; i < got_all.size(); ++i) {
      REQUIRE(got_all[i].index == want_all[i].index);
      REQUIRE(got_all[i].distance == want_all[i].distance);
    }

    REQUIRE(index.any_within(q, r) == want.has_value());
  }
}

TEST_CASE("large cloud spot-check against the oracle") {
  auto cloud = random_cloud(1000000, 20.0, 4242);
  SpatialIndex index(cloud, 0.02);
  Rng rng(55);
  for (int k = 0; k < 20; ++k) {
    Eigen::Vector3d q(rng.uniform(-20, 20), rng.uniform(-20, 20),
                      rng.uniform(-20, 20));
    const double r = rng.uniform(0.01, 0.3);
    auto got = index.nearest_within(q, r);
    auto want = brute_nearest(cloud, q, r);
    REQUIRE(got.has_value() == want.has_value());
    if (got) REQUIRE(got->index == want->index);
  }
}

TEST_CASE("queries are pure and repeatable") {
  auto cloud = random_cloud(2000, 3.0, 17);
  SpatialIndex index(cloud, 0.1);
  const Eigen::Vector3d q(0.3, -0.2, 0.1);
  auto first = index.all_within(q, 0.5);
  for (int i = 0; i < 5; ++i) {
    auto again = index.all_within(q, 0.5);
    REQUIRE(again.size() == first.size());
    for (std::size_t j = 0; j < first.size(); ++j) {
      REQUIRE(again[j].index == first[j].index);
      REQUIRE(again[j].distance == first[j].distance);
    }
  }
}

TEST_CASE("occupied_near never rejects a reachable point") {
  auto cloud = random_cloud(3000, 2.0, 31);
  const double cell = 0.05;
  SpatialIndex index(cloud, cell);
  Rng rng(77);
  for (int k = 0; k < 2000; ++k) {
    Eigen::Vector3d q(rng.uniform(-2.2, 2.2), rng.uniform(-2.2, 2.2),
                      rng.uniform(-2.2, 2.2));
    const double r = rng.uniform(0.005, cell);
    if (!index.occupied_near(q)) {
      REQUIRE_FALSE(index.nearest_within(q, r).has_value());
    }
  }
}
