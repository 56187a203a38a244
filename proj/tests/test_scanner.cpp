#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Geometry>
#include <cmath>
#include <set>
#include <vector>

#include "simtreels/scanner.hpp"
#include "simtreels/sensor.hpp"
#include "simtreels/spatial_index.hpp"
#include "simtreels/trajectory.hpp"

using namespace simtreels;

namespace {

// Vertical line of points at (x, 0, z) for z in [-half, half].
LabelledCloud make_wall(double x, double half, double spacing,
                        std::uint32_t tree_id) {
  LabelledCloud cloud;
  const int n = static_cast<int>(std::floor(half / spacing));
  for (int k = -n; k <= n; ++k)
    cloud.append_source({x, 0.0, k * spacing}, tree_id, 2);
  cloud.meta.stage = "stand";
  return cloud;
}

LabelledCloud make_random_stand(std::uint64_t seed, std::size_t count,
                                double extent) {
  Rng rng(seed);
  LabelledCloud cloud;
  for (std::size_t i = 0; i < count; ++i) {
    Eigen::Vector3d p(rng.uniform(-extent, extent),
                      rng.uniform(-extent, extent),
                      rng.uniform(0.0, extent));
    cloud.append_source(p, static_cast<std::uint32_t>(rng.uniform_below(4)),
                        static_cast<std::uint8_t>(rng.uniform_below(4)));
  }
  cloud.meta.stage = "stand";
  cloud.meta.params_hash = seed;
  return cloud;
}

Trajectory make_random_trajectory(std::uint64_t seed, std::size_t count,
                                  double extent) {
  Rng rng(seed);
  Trajectory traj;
  traj.kind = "test";
  for (std::size_t i = 0; i < count; ++i) {
    Pose pose;
    pose.position = {rng.uniform(-extent, extent), rng.uniform(-extent, extent),
                     rng.uniform(0.2, 3.0)};
    double a, b, c, d;
    rng.normal_pair(a, b);
    rng.normal_pair(c, d);
    Eigen::Quaterniond q(a, b, c, d);
    if (q.norm() < 1e-9) q = Eigen::Quaterniond::Identity();
    pose.orientation = q.normalized();
    traj.poses.push_back(pose);
  }
  return traj;
}

void require_identical(const ScanResult& a, const ScanResult& b) {
  REQUIRE(a.cloud.size() == b.cloud.size());
  for (std::size_t i = 0; i < a.cloud.size(); ++i) {
    REQUIRE(a.cloud.positions[i].x() == b.cloud.positions[i].x());
    REQUIRE(a.cloud.positions[i].y() == b.cloud.positions[i].y());
    REQUIRE(a.cloud.positions[i].z() == b.cloud.positions[i].z());
    REQUIRE(a.cloud.tree_ids[i] == b.cloud.tree_ids[i]);
    REQUIRE(a.cloud.levels[i] == b.cloud.levels[i]);
    REQUIRE(a.cloud.scanline_ids[i] == b.cloud.scanline_ids[i]);
    REQUIRE(a.cloud.pose_indices[i] == b.cloud.pose_indices[i]);
  }
  REQUIRE(a.stats.total_returns == b.stats.total_returns);
  REQUIRE(a.stats.pose_count == b.stats.pose_count);
  REQUIRE(a.stats.returns_per_pose == b.stats.returns_per_pose);
  REQUIRE(a.stats.hits_per_scanline == b.stats.hits_per_scanline);
}

}  // namespace

TEST_CASE("first_return picks the closest sample range") {
  std::vector<BeamCandidate> candidates{{7.5, 2, 0.001}, {3.2, 5, 0.010}};
  auto chosen = first_return(candidates);
  REQUIRE(chosen.has_value());
  REQUIRE(chosen->sample_range == 3.2);
  REQUIRE(chosen->point_index == 5);
}

TEST_CASE("first_return breaks range ties by match distance then index") {
  std::vector<BeamCandidate> by_distance{{3.2, 9, 0.011}, {3.2, 4, 0.004}};
  auto chosen = first_return(by_distance);
  REQUIRE(chosen.has_value());
  REQUIRE(chosen->point_index == 4);
  REQUIRE(chosen->match_distance == 0.004);

  std::vector<BeamCandidate> by_index{{3.2, 9, 0.004}, {3.2, 4, 0.004}};
  chosen = first_return(by_index);
  REQUIRE(chosen.has_value());
  REQUIRE(chosen->point_index == 4);

  REQUIRE_FALSE(first_return({}).has_value());
}

TEST_CASE("closer wall occludes the farther wall entirely") {
  LabelledCloud stand = make_wall(3.0, 1.5, 0.01, 1);
  stand.append_cloud(make_wall(6.0, 1.5, 0.01, 2));

  // Fan narrow enough that every beam crosses both walls' interiors.
  SensorShape shape = build_single_plane(40.0, 2.0, 10.0, 0.02);
  Trajectory traj;
  traj.poses.push_back(Pose{});  // at origin looking along +x

  ScanParams params;
  params.search_radius = 0.02;
  ScanResult result = simulate_scan(stand, shape, traj, params);

  REQUIRE(result.stats.total_returns == shape.scan_lines.size());
  for (std::size_t i = 0; i < result.cloud.size(); ++i) {
    REQUIRE(result.cloud.tree_ids[i] == 1);
    REQUIRE(result.cloud.positions[i].x() == 3.0);
  }
  for (const auto& line : shape.scan_lines)
    REQUIRE(result.stats.hit_rate(line.scanline_id) == 1.0);
}

TEST_CASE("noise-free returns coincide exactly with source points") {
  LabelledCloud stand = make_random_stand(11, 600, 4.0);
  SensorShape shape = build_single_plane(180.0, 5.0, 8.0, 0.02);
  Trajectory traj = make_random_trajectory(12, 4, 2.0);

  ScanParams params;
  params.search_radius = 0.05;
  ScanResult result = simulate_scan(stand, shape, traj, params);
  REQUIRE(result.stats.total_returns > 0);

  for (std::size_t i = 0; i < result.cloud.size(); ++i) {
    bool matched = false;
    for (std::size_t j = 0; j < stand.size(); ++j) {
      if (stand.positions[j].x() == result.cloud.positions[i].x() &&
          stand.positions[j].y() == result.cloud.positions[i].y() &&
          stand.positions[j].z() == result.cloud.positions[i].z() &&
          stand.tree_ids[j] == result.cloud.tree_ids[i] &&
          stand.levels[j] == result.cloud.levels[i]) {
        matched = true;
        break;
      }
    }
    REQUIRE(matched);
  }
}

TEST_CASE("indexed scan matches the brute-force oracle bit for bit") {
  std::size_t grand_total = 0;
  for (std::uint64_t instance = 0; instance < 6; ++instance) {
    LabelledCloud stand = make_random_stand(100 + instance, 900, 3.0);
    SensorShape shape =
        build_single_plane(120.0, 15.0, 6.0, 0.02 + 0.005 * instance);
    Trajectory traj = make_random_trajectory(200 + instance, 3, 2.0);

    ScanParams params;
    params.search_radius = 0.04 + 0.01 * (instance % 3);
    params.noise_sigma = (instance % 2) ? 0.01 : 0.0;
    params.seed = 7000 + instance;
    params.dedupe = (instance % 3) == 0;

    ScanResult fast = simulate_scan(stand, shape, traj, params);
    ScanResult slow = brute_force_scan(stand, shape, traj, params);
    require_identical(fast, slow);
    grand_total += fast.stats.total_returns;
  }
  REQUIRE(grand_total > 0);
}

TEST_CASE("oracle equivalence holds for any index cell size") {
  LabelledCloud stand = make_random_stand(31, 500, 3.0);
  SensorShape shape = build_multi_plane(90.0, 10.0, 6.0, 0.02, 3, 20.0);
  Trajectory traj = make_random_trajectory(32, 3, 2.0);

  ScanParams params;
  params.search_radius = 0.05;
  params.seed = 99;

  ScanResult reference = brute_force_scan(stand, shape, traj, params);
  for (double cell : {0.05, 0.025, 0.2}) {
    SpatialIndex index(stand, cell);
    ScanResult fast = simulate_scan(index, shape, traj, params);
    require_identical(fast, reference);
  }
}

TEST_CASE("empty stand produces an empty result in both kernels") {
  LabelledCloud stand;
  SensorShape shape = build_single_plane(90.0, 10.0, 5.0, 0.02);
  Trajectory traj = make_random_trajectory(5, 3, 1.0);
  ScanParams params;
  params.search_radius = 0.05;

  ScanResult fast = simulate_scan(stand, shape, traj, params);
  ScanResult slow = brute_force_scan(stand, shape, traj, params);
  REQUIRE(fast.stats.total_returns == 0);
  REQUIRE(fast.cloud.empty());
  REQUIRE(fast.stats.returns_per_pose == std::vector<std::size_t>{0, 0, 0});
  require_identical(fast, slow);
}

TEST_CASE("single point stand is hit once per pose unless deduped") {
  LabelledCloud stand;
  stand.append_source({4.0, 0.0, 0.0}, 7, 1);

  SensorShape shape = build_single_plane(20.0, 5.0, 6.0, 0.02);
  Trajectory traj;
  for (int i = 0; i < 3; ++i) traj.poses.push_back(Pose{});

  ScanParams params;
  params.search_radius = 0.05;
  ScanResult plain = simulate_scan(stand, shape, traj, params);
  // Only the central beam passes within range of the point.
  REQUIRE(plain.stats.total_returns == 3);
  REQUIRE(plain.stats.returns_per_pose == std::vector<std::size_t>{1, 1, 1});
  for (std::size_t i = 0; i < 3; ++i) {
    REQUIRE(plain.cloud.tree_ids[i] == 7);
    REQUIRE(plain.cloud.pose_indices[i] == i);
  }

  params.dedupe = true;
  ScanResult deduped = simulate_scan(stand, shape, traj, params);
  REQUIRE(deduped.stats.total_returns == 1);
  REQUIRE(deduped.stats.returns_per_pose == std::vector<std::size_t>{1, 0, 0});
  require_identical(deduped, brute_force_scan(stand, shape, traj, params));
}

TEST_CASE("each pose and scan line pair yields at most one return") {
  LabelledCloud stand = make_random_stand(55, 800, 3.0);
  SensorShape shape = build_multi_plane(180.0, 10.0, 6.0, 0.02, 4, 30.0);
  Trajectory traj = make_random_trajectory(56, 5, 2.0);

  ScanParams params;
  params.search_radius = 0.06;
  ScanResult result = simulate_scan(stand, shape, traj, params);
  REQUIRE(result.stats.total_returns > 0);

  std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
  for (std::size_t i = 0; i < result.cloud.size(); ++i) {
    auto key = std::make_pair(result.cloud.pose_indices[i],
                              result.cloud.scanline_ids[i]);
    REQUIRE(seen.insert(key).second);
  }

  std::size_t per_pose_sum = 0;
  for (auto n : result.stats.returns_per_pose) per_pose_sum += n;
  std::size_t per_line_sum = 0;
  for (auto n : result.stats.hits_per_scanline) per_line_sum += n;
  REQUIRE(per_pose_sum == result.stats.total_returns);
  REQUIRE(per_line_sum == result.stats.total_returns);
  REQUIRE(result.cloud.size() == result.stats.total_returns);
  for (const auto& line : shape.scan_lines) {
    REQUIRE(result.stats.hit_rate(line.scanline_id) >= 0.0);
    REQUIRE(result.stats.hit_rate(line.scanline_id) <= 1.0);
  }
}

TEST_CASE("noise displaces matched points by the expected amount") {
  LabelledCloud stand = make_wall(5.0, 2.0, 0.01, 1);
  SensorShape shape = build_single_plane(40.0, 0.1, 8.0, 0.02);
  // Repeated poses: every (pose, line) pair owns its own noise stream, so
  // identical geometry still yields independent draws.
  Trajectory traj;
  for (int i = 0; i < 60; ++i) traj.poses.push_back(Pose{});

  ScanParams clean;
  clean.search_radius = 0.03;
  clean.seed = 424242;
  ScanParams noisy = clean;
  noisy.noise_sigma = 0.02;

  ScanResult a = simulate_scan(stand, shape, traj, clean);
  ScanResult b = simulate_scan(stand, shape, traj, noisy);
  REQUIRE(a.cloud.size() == b.cloud.size());
  REQUIRE(a.cloud.size() > 20000);

  // |N(0, sigma^2 I3)| has mean 2*sigma*sqrt(2/pi).
  double sum = 0.0;
  Eigen::Vector3d mean_vec = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < a.cloud.size(); ++i) {
    Eigen::Vector3d d = b.cloud.positions[i] - a.cloud.positions[i];
    sum += d.norm();
    mean_vec += d;
  }
  const double n = static_cast<double>(a.cloud.size());
  const double mean_disp = sum / n;
  const double expected = 2.0 * 0.02 * std::sqrt(2.0 / M_PI);
  REQUIRE(mean_disp == Catch::Approx(expected).epsilon(0.02));
  mean_vec /= n;
  REQUIRE(mean_vec.norm() < 4.0 * 0.02 / std::sqrt(n) * 3.0);
}

TEST_CASE("point spacing from required_spacing guarantees returns") {
  const double radius = 0.02;
  LabelledCloud stand = make_wall(5.0, 1.2, required_spacing(radius), 1);
  SensorShape shape = build_single_plane(20.0, 1.0, 8.0, radius);
  Trajectory traj;
  traj.poses.push_back(Pose{});

  ScanParams params;
  params.search_radius = radius;
  ScanResult result = simulate_scan(stand, shape, traj, params);
  // 5 * tan(10 deg) = 0.88 < 1.2, so every beam crosses the wall.
  REQUIRE(result.stats.total_returns == shape.scan_lines.size());
}

TEST_CASE("worker count does not change the scan") {
  LabelledCloud stand = make_random_stand(77, 900, 3.0);
  SensorShape shape = build_single_plane(180.0, 6.0, 6.0, 0.02);
  Trajectory traj = make_random_trajectory(78, 9, 2.0);

  ScanParams params;
  params.search_radius = 0.05;
  params.noise_sigma = 0.01;
  params.seed = 5;
  params.dedupe = true;

  ScanResult one = simulate_scan(stand, shape, traj, params, 1);
  ScanResult four = simulate_scan(stand, shape, traj, params, 4);
  ScanResult eight = simulate_scan(stand, shape, traj, params, 8);
  require_identical(one, four);
  require_identical(one, eight);
}

TEST_CASE("scan validation rejects bad inputs") {
  LabelledCloud stand = make_random_stand(1, 50, 2.0);
  SensorShape shape = build_single_plane(90.0, 10.0, 5.0, 0.02);
  Trajectory traj;
  traj.poses.push_back(Pose{});

  ScanParams params;
  params.search_radius = 0.05;

  SECTION("non-positive search radius") {
    params.search_radius = 0.0;
    REQUIRE_THROWS_AS(simulate_scan(stand, shape, traj, params), ConfigError);
  }
  SECTION("negative noise sigma") {
    params.noise_sigma = -0.1;
    REQUIRE_THROWS_AS(simulate_scan(stand, shape, traj, params), ConfigError);
  }
  SECTION("empty trajectory") {
    Trajectory empty;
    REQUIRE_THROWS_AS(simulate_scan(stand, shape, empty, params), ConfigError);
  }
  SECTION("empty sensor shape") {
    SensorShape none;
    REQUIRE_THROWS_AS(simulate_scan(stand, none, traj, params), ConfigError);
  }
  SECTION("range step above twice the search radius") {
    params.search_radius = 0.009;
    REQUIRE_THROWS_AS(simulate_scan(stand, shape, traj, params), ConfigError);
    REQUIRE_THROWS_AS(brute_force_scan(stand, shape, traj, params),
                      ConfigError);
  }
  SECTION("range step between one and two search radii still runs") {
    params.search_radius = 0.015;
    REQUIRE_NOTHROW(simulate_scan(stand, shape, traj, params));
  }
  SECTION("stand spacing hint only warns") {
    ScanResult without = simulate_scan(stand, shape, traj, params);
    ScanResult with = simulate_scan(stand, shape, traj, params, 1, 0.5);
    require_identical(without, with);
  }
}

TEST_CASE("control sample draws exactly the target without replacement") {
  LabelledCloud stand;
  for (int i = 0; i < 100; ++i)
    stand.append_source({static_cast<double>(i), 0.0, 0.0},
                        static_cast<std::uint32_t>(i % 5),
                        static_cast<std::uint8_t>(i % 4));

  LabelledCloud sub = control_sample(stand, 40, 8);
  REQUIRE(sub.size() == 40);
  REQUIRE(sub.meta.stage == "control");
  for (std::size_t i = 1; i < sub.size(); ++i)
    REQUIRE(sub.positions[i].x() > sub.positions[i - 1].x());  // source order
  for (std::size_t i = 0; i < sub.size(); ++i) {
    const int src = static_cast<int>(sub.positions[i].x());
    REQUIRE(sub.tree_ids[i] == static_cast<std::uint32_t>(src % 5));
    REQUIRE(sub.levels[i] == static_cast<std::uint8_t>(src % 4));
  }

  LabelledCloud all = control_sample(stand, 100, 8);
  REQUIRE(all.size() == 100);
  for (std::size_t i = 0; i < 100; ++i)
    REQUIRE(all.positions[i].x() == static_cast<double>(i));

  LabelledCloud one = control_sample(stand, 1, 8);
  REQUIRE(one.size() == 1);
  REQUIRE(one.positions[0].x() >= 0.0);
  REQUIRE(one.positions[0].x() < 100.0);
}

TEST_CASE("control sample is deterministic and seed sensitive") {
  LabelledCloud stand = make_random_stand(9, 300, 2.0);
  LabelledCloud a = control_sample(stand, 50, 77);
  LabelledCloud b = control_sample(stand, 50, 77);
  REQUIRE(a.positions.size() == b.positions.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    REQUIRE(a.positions[i] == b.positions[i]);

  LabelledCloud c = control_sample(stand, 50, 78);
  bool differs = false;
  for (std::size_t i = 0; i < a.size() && !differs; ++i)
    differs = a.positions[i] != c.positions[i];
  REQUIRE(differs);
}

TEST_CASE("control sample selection is roughly uniform") {
  LabelledCloud stand;
  for (int i = 0; i < 10; ++i)
    stand.append_source({static_cast<double>(i), 0.0, 0.0}, 0, 0);

  std::vector<int> counts(10, 0);
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    LabelledCloud pick = control_sample(stand, 1, seed);
    counts[static_cast<int>(pick.positions[0].x())]++;
  }
  for (int c : counts) {
    REQUIRE(c > 50);
    REQUIRE(c < 160);
  }
}

TEST_CASE("control sample rejects impossible targets") {
  LabelledCloud stand = make_random_stand(3, 20, 1.0);
  REQUIRE_THROWS_AS(control_sample(stand, 0, 1), ConfigError);
  REQUIRE_THROWS_AS(control_sample(stand, 21, 1), ConfigError);
  LabelledCloud empty;
  REQUIRE_THROWS_AS(control_sample(empty, 1, 1), ConfigError);
}
