#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "test_support.hpp"
#include "vlnmine/dataset.hpp"

using namespace vlnmine;
namespace fs = std::filesystem;
namespace ts = vlnmine::testsupport;
using nlohmann::json;

namespace {

ViewState looking(const Eigen::Vector3d& position,
                  const Eigen::Vector3d& direction) {
  return {position, direction.normalized()};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "vlnmine_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::size_t line_count(const fs::path& file) {
  std::ifstream in(file);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    n += line.empty() ? 0 : 1;
  }
  return n;
}

TrajectoryRecord sample_description_record() {
  return make_description_record(
      "vid", {0, 6, 12}, {{"There is a door."}, {}, {"There is a sofa."}},
      {"hallway", "hallway", "living room"}, "walk forward",
      GenerationProvenance{"mock-gpt", 0.7, "abc", 1}, "cfg");
}

}  // namespace

TEST_CASE("explicit geometry distance and heading") {
  const ViewState origin_z = looking({0, 0, 0}, {0, 0, 1});

  SUBCASE("coincident candidate is (0, 0) by convention") {
    const GeometryFeature geo =
        explicit_geometry(origin_z, looking({0, 0, 5e-4}, {1, 0, 0}));
    CHECK(geo.distance_m == 0.0);
    CHECK(geo.heading_deg == 0.0);
  }

  SUBCASE("straight ahead at 1.6 m") {
    const GeometryFeature geo =
        explicit_geometry(origin_z, looking({0, 0, 1.6}, {0, 0, 1}));
    CHECK(geo.distance_m == doctest::Approx(1.6));
    CHECK(geo.heading_deg == doctest::Approx(0.0));
  }

  SUBCASE("orthogonal candidate at 2 m") {
    const GeometryFeature geo =
        explicit_geometry(origin_z, looking({2, 0, 0}, {0, 0, 1}));
    CHECK(geo.distance_m == doctest::Approx(2.0));
    CHECK(geo.heading_deg == doctest::Approx(90.0));
  }

  SUBCASE("distance is symmetric, heading rigid-invariant") {
    std::mt19937 rng(103);
    for (int trial = 0; trial < 50; ++trial) {
      const ViewState a = looking(5.0 * Eigen::Vector3d::Random(),
                                  ts::random_unit(rng));
      const ViewState b = looking(5.0 * Eigen::Vector3d::Random(),
                                  ts::random_unit(rng));
      CHECK(explicit_geometry(a, b).distance_m ==
            doctest::Approx(explicit_geometry(b, a).distance_m));

      SimilarityTransform rigid;
      rigid.scale = 1.0;
      rigid.rotation = ts::random_rotation(rng);
      rigid.translation = 10.0 * Eigen::Vector3d::Random();
      const ViewState ra = {rigid.apply(a.position),
                            rigid.rotation * a.direction};
      const ViewState rb = {rigid.apply(b.position),
                            rigid.rotation * b.direction};
      const GeometryFeature base = explicit_geometry(a, b);
      const GeometryFeature moved = explicit_geometry(ra, rb);
      CHECK(moved.distance_m == doctest::Approx(base.distance_m));
      CHECK(moved.heading_deg == doctest::Approx(base.heading_deg));
    }
  }
}

TEST_CASE("record ids are deterministic functions of their inputs") {
  CHECK(description_record_id("v", 0, 30, "h") ==
        description_record_id("v", 0, 30, "h"));
  CHECK(description_record_id("v", 0, 30, "h") !=
        description_record_id("v", 0, 30, "other"));
  CHECK(action_record_id("v", 4, "h") == action_record_id("v", 4, "h"));
  CHECK(action_record_id("v", 4, "h") != action_record_id("v", 5, "h"));
  CHECK(description_record_id("v", 0, 30, "h").size() == 16);
}

TEST_CASE("straight three-step walk emits two moves and a stop") {
  Trajectory traj;
  traj.video_id = "walk";
  traj.scaled = true;
  for (int i = 0; i < 9; ++i) {
    traj.frames.push_back(
        {i, looking({i * 0.5, 0.0, 0.0}, {1, 0, 0})});
  }
  const std::vector<int> steps = {0, 4, 8};
  const auto records = make_action_records(traj, steps, {}, 1.0, "cfg");
  REQUIRE(records.size() == 3);

  CHECK(records[0].history.empty());
  REQUIRE(records[0].candidates.size() == 1);
  CHECK(records[0].candidates[0].positive);
  CHECK(records[0].candidates[0].frame_index == 4);
  CHECK(records[0].candidates[0].distance_m == doctest::Approx(2.0));
  CHECK(records[0].candidates[0].heading_deg == doctest::Approx(0.0));
  CHECK(records[0].ground_truth == 0);

  CHECK(records[1].history == std::vector<int>{0});
  CHECK(records[2].history == std::vector<int>{0, 4});
  CHECK(records[2].candidates.empty());
  CHECK(!records[2].ground_truth.has_value());
}

TEST_CASE("corner negatives attach within eps of the cluster centroid") {
  // L-shaped walk with one side-watching cluster at the corner.
  Trajectory traj;
  traj.video_id = "corner";
  traj.scaled = true;
  // approach along +x, corner at (2,0,0), then +y
  traj.frames.push_back({0, looking({0, 0, 0}, {1, 0, 0})});
  traj.frames.push_back({4, looking({2, 0, 0}, {1, 0, 0})});
  traj.frames.push_back({6, looking({2, 0, 0}, {0, -1, 0})});  // side glance
  traj.frames.push_back({10, looking({2, 2, 0}, {0, 1, 0})});
  traj.frames.push_back({14, looking({2, 4, 0}, {0, 1, 0})});

  ActionCandidateSet cluster;
  cluster.cluster_id = 0;
  cluster.positive = 10;
  cluster.negatives = {6};
  cluster.member_frames = {4, 6, 10};
  cluster.centroid = {2.0, 0.1, 0.0};

  const std::vector<int> steps = {0, 4, 10, 14};
  const auto records = make_action_records(
      traj, steps, std::vector<ActionCandidateSet>{cluster}, 1.0, "cfg");
  REQUIRE(records.size() == 4);

  // Step at frame 4 sits on the centroid: next step plus the negative.
  REQUIRE(records[1].candidates.size() == 2);
  CHECK(records[1].candidates[0].positive);
  CHECK(records[1].candidates[0].frame_index == 10);
  CHECK(records[1].candidates[0].distance_m == doctest::Approx(2.0));
  CHECK(records[1].candidates[0].heading_deg == doctest::Approx(90.0));
  CHECK(!records[1].candidates[1].positive);
  CHECK(records[1].candidates[1].frame_index == 6);
  CHECK(records[1].candidates[1].distance_m == doctest::Approx(0.0));
  CHECK(records[1].ground_truth == 0);

  // Step at frame 0 is 2 m from the centroid: no negatives there.
  CHECK(records[0].candidates.size() == 1);

  // Far step sees no cluster either.
  CHECK(records[2].candidates.size() == 1);
}

TEST_CASE("record json passes its own schema validation") {
  const TrajectoryRecord desc = sample_description_record();
  CHECK_NOTHROW(validate_description_record(to_json(desc)));

  TrajectoryRecord no_instruction = desc;
  no_instruction.instruction.reset();
  no_instruction.generation.reset();
  CHECK_NOTHROW(validate_description_record(to_json(no_instruction)));

  TrajectoryRecord scored = desc;
  scored.relevance_score = 4;
  CHECK_NOTHROW(validate_description_record(to_json(scored)));
}

TEST_CASE("schema violations are rejected") {
  const TrajectoryRecord desc = sample_description_record();

  SUBCASE("instruction without provenance") {
    json j = to_json(desc);
    j.erase("generation");
    CHECK_THROWS_AS(validate_description_record(j), SchemaError);
  }

  SUBCASE("non-increasing frames") {
    json j = to_json(desc);
    j["frame_indices"] = {0, 6, 6};
    CHECK_THROWS_AS(validate_description_record(j), SchemaError);
  }

  SUBCASE("relevance score out of scale") {
    json j = to_json(desc);
    j["relevance_score"] = 5;
    CHECK_THROWS_AS(validate_description_record(j), SchemaError);
  }

  SUBCASE("caption arity mismatch") {
    json j = to_json(desc);
    j["captions"] = {j["captions"][0]};
    CHECK_THROWS_AS(validate_description_record(j), SchemaError);
  }
}

TEST_CASE("action record validation") {
  Trajectory traj;
  traj.video_id = "v";
  traj.scaled = true;
  for (int i = 0; i < 3; ++i) {
    traj.frames.push_back({i * 4, looking({i * 2.0, 0, 0}, {1, 0, 0})});
  }
  const auto records =
      make_action_records(traj, std::vector<int>{0, 4, 8}, {}, 1.0, "cfg");
  for (const auto& record : records) {
    CHECK_NOTHROW(validate_action_record(to_json(record)));
  }

  SUBCASE("ground truth must point at the positive") {
    json j = to_json(records[0]);
    j["ground_truth"] = 5;
    CHECK_THROWS_AS(validate_action_record(j), SchemaError);
  }

  SUBCASE("stop records cannot carry a positive") {
    json j = to_json(records[0]);
    j["ground_truth"] = "STOP";
    CHECK_THROWS_AS(validate_action_record(j), SchemaError);
  }

  SUBCASE("heading must stay within [0, 180]") {
    json j = to_json(records[0]);
    j["candidates"][0]["heading_deg"] = 181.0;
    CHECK_THROWS_AS(validate_action_record(j), SchemaError);
  }

  SUBCASE("two positives are rejected") {
    json j = to_json(records[0]);
    j["candidates"].push_back(j["candidates"][0]);
    CHECK_THROWS_AS(validate_action_record(j), SchemaError);
  }
}

TEST_CASE("emission validates, appends and recounts") {
  const fs::path dir = fresh_dir("emit");
  const fs::path desc_file = dir / "description.jsonl";
  const fs::path act_file = dir / "action.jsonl";

  const TrajectoryRecord desc = sample_description_record();
  CHECK(emit_description_records(std::vector<TrajectoryRecord>{desc},
                                 desc_file) == 1);
  CHECK(line_count(desc_file) == 1);

  Trajectory traj;
  traj.video_id = "vid";
  traj.scaled = true;
  for (int i = 0; i < 3; ++i) {
    traj.frames.push_back({i * 4, looking({i * 2.0, 0, 0}, {1, 0, 0})});
  }
  const auto actions =
      make_action_records(traj, std::vector<int>{0, 4, 8}, {}, 1.0, "cfg");
  CHECK(emit_action_records(actions, act_file) == 3);

  CorpusManifest manifest;
  manifest.toolkit_version = "test";
  manifest.config_snapshot = nlohmann::ordered_json::object();
  manifest.videos["vid"] = {100, 4, 2, 1, 3, 0};
  CHECK_NOTHROW(write_manifest(manifest, dir / "manifest.json", desc_file,
                               act_file));
  CHECK(fs::exists(dir / "manifest.json"));

  SUBCASE("count mismatches abort the manifest") {
    manifest.videos["vid"].action_records = 7;
    CHECK_THROWS_AS(write_manifest(manifest, dir / "manifest2.json", desc_file,
                                   act_file),
                    ConsistencyError);
    CHECK(!fs::exists(dir / "manifest2.json"));
  }

  SUBCASE("records from unlisted videos abort the manifest") {
    CorpusManifest empty;
    empty.toolkit_version = "test";
    empty.config_snapshot = nlohmann::ordered_json::object();
    CHECK_THROWS_AS(write_manifest(empty, dir / "manifest3.json", desc_file,
                                   act_file),
                    ConsistencyError);
  }
}
