#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace {

namespace fs = std::filesystem;

const fs::path kWork = fs::temp_directory_path() / "simtreels_cli_test";

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SIMTREELS_BIN) + " " + args +
                          " >" + (kWork / "stdout.txt").string() + " 2>" +
                          (kWork / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  if (status == -1) return -1;
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  return -2;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t line_count(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) ++n;
  return n;
}

void write_mini_config(const fs::path& path, const std::string& out_dir) {
  std::ofstream out(path);
  out << R"({
  "seed": 7,
  "out_dir": ")" << out_dir << R"(",
  "cloud_format": "csv",
  "tree": {"name": "mini", "levels": 2, "trunk_height": 1.5,
           "trunk_base_radius": 0.08, "sample_spacing": 0.02,
           "leaves_per_tip": 4, "leaf_radius": 0.06,
           "level_params": [
             {"taper": [0.6, 0.05], "curvature": [8, 4]},
             {"child_count": [5, 1], "length_ratio": [0.6, 0.1],
              "base_radius_ratio": [0.5, 0.05], "taper": [0.55, 0.05],
              "down_angle": [50, 10], "curvature": [20, 10],
              "start_fraction": [0.5, 0.3]}]},
  "stand": {"kind": "orchard", "rows": 2, "trees_per_row": 2,
            "tree_spacing": 4, "row_spacing": 4},
  "scan": {"search_radius": 0.04, "noise_sigma": 0, "dedupe": false},
  "runs": [{"name": "hand",
            "sensor": {"kind": "single_plane", "fov_deg": 90,
                       "angular_res_deg": 3, "max_range_m": 8,
                       "range_step_m": 0.04},
            "trajectory": {"kind": "handheld-loop", "r_wide": 4,
                           "r_close": 2, "step": 0.5}}],
  "analysis": {"voxel_edge": 0.5, "profile_bins": 6}
})";
}

struct Workspace {
  Workspace() {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
  }
};

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

}  // namespace

TEST_CASE("cli sensor export writes the full sampling shape") {
  Workspace ws;
  const fs::path shape = kWork / "shape.csv";
  REQUIRE(run_cli("sensor --fov 270 --res 0.675 --range 15 --step 0.02 "
                  "--export " + q(shape)) == 0);
  REQUIRE(fs::exists(shape));
  REQUIRE(line_count(shape) == 300751);  // header + 401 x 750 samples
  REQUIRE(fs::exists(kWork / "shape.csv.meta.json"));
}

TEST_CASE("cli stage chain: stand, trajectory, scan, control, report") {
  Workspace ws;
  const fs::path cfg = kWork / "mini.json";
  write_mini_config(cfg, (kWork / "unused").string());

  REQUIRE(run_cli("stand --config " + q(cfg) + " --out " + q(kWork) +
                  " --format csv --seed 7") == 0);
  REQUIRE(fs::exists(kWork / "stand.csv"));
  REQUIRE(fs::exists(kWork / "placements.csv"));
  REQUIRE(line_count(kWork / "placements.csv") == 5);  // header + 4 trees

  REQUIRE(run_cli("trajectory --config " + q(cfg) +
                  " --preset handheld-loop --step 0.5 --export " +
                  q(kWork / "traj.csv")) == 0);
  REQUIRE(fs::exists(kWork / "traj.csv"));

  REQUIRE(run_cli("scan --stand " + q(kWork / "stand.csv") +
                  " --trajectory " + q(kWork / "traj.csv") +
                  " --kind single_plane --fov 90 --res 3 --range 8 "
                  "--step 0.04 --search-radius 0.04 --seed 7 --name t1 "
                  "--out " + q(kWork) + " --format csv") == 0);
  REQUIRE(fs::exists(kWork / "scan_t1.csv"));
  REQUIRE(fs::exists(kWork / "scan_t1.stats.json"));
  const std::size_t returns = line_count(kWork / "scan_t1.csv") - 1;
  REQUIRE(returns > 50);

  REQUIRE(run_cli("control --stand " + q(kWork / "stand.csv") +
                  " --target " + std::to_string(returns) + " --seed 7 "
                  "--export " + q(kWork / "control.csv")) == 0);
  REQUIRE(line_count(kWork / "control.csv") == returns + 1);

  REQUIRE(run_cli("analyze density --cloud " + q(kWork / "scan_t1.csv") +
                  " --voxel-edge 0.5 --export " +
                  q(kWork / "density.json")) == 0);
  REQUIRE(slurp(kWork / "density.json").find("mean_density") !=
          std::string::npos);

  REQUIRE(run_cli("analyze profile --cloud " + q(kWork / "scan_t1.csv") +
                  " --axis radial --bins 6 --export " +
                  q(kWork / "profile.csv")) == 0);
  REQUIRE(line_count(kWork / "profile.csv") == 7);

  REQUIRE(run_cli("analyze occlusion --source " + q(kWork / "stand.csv") +
                  " --scan " + q(kWork / "scan_t1.csv") +
                  " --match-radius 0.08 --export " +
                  q(kWork / "occl.csv")) == 0);
  const std::string occl_out = slurp(kWork / "stdout.txt");
  REQUIRE(occl_out.find("occluded_fraction") != std::string::npos);

  REQUIRE(run_cli("report --source " + q(kWork / "stand.csv") +
                  " --control " + q(kWork / "control.csv") +
                  " --scan t1=" + (kWork / "scan_t1.csv").string() +
                  " --voxel-edge 0.5 --match-radius 0.08 --out " +
                  q(kWork)) == 0);
  const std::string report = slurp(kWork / "report.csv");
  REQUIRE(report.find("stand,label,points") == 0);
  REQUIRE(report.find("control") != std::string::npos);
  REQUIRE(report.find("t1") != std::string::npos);
}

TEST_CASE("cli pipeline produces the full artifact set and reruns "
          "byte-identically") {
  Workspace ws;
  const fs::path cfg = kWork / "mini.json";
  write_mini_config(cfg, (kWork / "out_a").string());
  REQUIRE(run_cli("pipeline --config " + q(cfg)) == 0);
  for (const char* name :
       {"stand.csv", "placements.csv", "scan_hand.csv",
        "scan_hand.stats.json", "control.csv", "traj_hand.csv",
        "occlusion_hand.csv", "profile_hand_radial.csv",
        "profile_control_height.csv", "report.csv", "report.txt",
        "stand.csv.meta.json", "report.csv.meta.json"})
    REQUIRE(fs::exists(kWork / "out_a" / name));

  // Same config into a second directory, then with extra workers.
  REQUIRE(run_cli("pipeline --config " + q(cfg) + " --out " +
                  q(kWork / "out_b")) == 0);
  REQUIRE(run_cli("pipeline --config " + q(cfg) + " --out " +
                  q(kWork / "out_c") + " --workers 3") == 0);
  for (const char* name : {"stand.csv", "scan_hand.csv", "control.csv",
                           "report.csv", "occlusion_hand.csv"}) {
    const std::string a = slurp(kWork / "out_a" / name);
    REQUIRE(a == slurp(kWork / "out_b" / name));
    REQUIRE(a == slurp(kWork / "out_c" / name));
    REQUIRE_FALSE(a.empty());
  }

  const std::string meta = slurp(kWork / "out_a" / "stand.csv.meta.json");
  REQUIRE(meta.find("config_hash") != std::string::npos);
  REQUIRE(meta.find("\"seed\": 7") != std::string::npos);
}

TEST_CASE("cli workers env variable acts as the flag default") {
  Workspace ws;
  const fs::path cfg = kWork / "mini.json";
  write_mini_config(cfg, (kWork / "env_out").string());
  const std::string cmd =
      "SIMTREELS_WORKERS=3 " + std::string(SIMTREELS_BIN) +
      " pipeline --config " + q(cfg) + " >/dev/null 2>/dev/null";
  REQUIRE(std::system(cmd.c_str()) == 0);
  REQUIRE(run_cli("pipeline --config " + q(cfg) + " --out " +
                  q(kWork / "one_out")) == 0);
  REQUIRE(slurp(kWork / "env_out" / "scan_hand.csv") ==
          slurp(kWork / "one_out" / "scan_hand.csv"));
}

TEST_CASE("cli exit codes distinguish usage, config and io errors") {
  Workspace ws;
  const fs::path cfg = kWork / "mini.json";
  write_mini_config(cfg, (kWork / "x").string());

  SECTION("usage errors exit 2") {
    REQUIRE(run_cli("") == 2);
    REQUIRE(run_cli("bogus-subcommand") == 2);
    REQUIRE(run_cli("stand --rows 0") == 2);
    REQUIRE(run_cli("sensor --no-such-flag 1") == 2);
    REQUIRE(run_cli("--help") == 0);
  }
  SECTION("config errors exit 3") {
    REQUIRE(run_cli("tree --def not-a-species --export " +
                    q(kWork / "t.csv")) == 3);
    std::ofstream(kWork / "bad.json")
        << R"({"out_dir": ")" << (kWork / "bad_out").string()
        << R"(", "stand": {"kind": "orchard", "rows": -1}})";
    REQUIRE(run_cli("pipeline --config " + q(kWork / "bad.json")) == 3);
  }
  SECTION("io errors exit 4 and name the path") {
    REQUIRE(run_cli("scan --stand " + q(kWork / "missing.ply") +
                    " --trajectory " + q(kWork / "missing.csv")) == 4);
    REQUIRE(slurp(kWork / "stderr.txt").find("missing.ply") !=
            std::string::npos);
    REQUIRE(slurp(kWork / "stderr.txt").find("simtreels: error: io:") !=
            std::string::npos);
    std::ofstream(kWork / "broken.json") << "{ not json";
    REQUIRE(run_cli("pipeline --config " + q(kWork / "broken.json")) == 4);
  }
  SECTION("machine-parsable error prefix on config errors") {
    REQUIRE(run_cli("control --stand " + q(kWork / "nothing.csv") +
                    " --target 5") == 4);
    const std::string err = slurp(kWork / "stderr.txt");
    REQUIRE(err.rfind("simtreels: error: ", 0) == 0);
  }
}

TEST_CASE("cli tree subcommand is deterministic") {
  Workspace ws;
  REQUIRE(run_cli("tree --def aspen --seed 5 --spacing 0.05 --export " +
                  q(kWork / "a.csv")) == 0);
  REQUIRE(run_cli("tree --def aspen --seed 5 --spacing 0.05 --export " +
                  q(kWork / "b.csv")) == 0);
  REQUIRE(run_cli("tree --def aspen --seed 6 --spacing 0.05 --export " +
                  q(kWork / "c.csv")) == 0);
  const std::string a = slurp(kWork / "a.csv");
  REQUIRE(a == slurp(kWork / "b.csv"));
  REQUIRE(a != slurp(kWork / "c.csv"));
  REQUIRE(slurp(kWork / "a.csv.meta.json") ==
          slurp(kWork / "b.csv.meta.json"));
}
