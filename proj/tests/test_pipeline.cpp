#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "mock_endpoint.hpp"
#include "test_support.hpp"
#include "vlnmine/config.hpp"
#include "vlnmine/dataset.hpp"
#include "vlnmine/mini_scene.hpp"
#include "vlnmine/pipeline.hpp"

using namespace vlnmine;
namespace fs = std::filesystem;
namespace ts = vlnmine::testsupport;
using nlohmann::json;
using vlnmine::testsupport::MockEndpoint;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "vlnmine_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<json> read_jsonl(const fs::path& file) {
  std::ifstream in(file);
  REQUIRE(in.good());
  std::vector<json> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) {
      lines.push_back(json::parse(line));
    }
  }
  return lines;
}

}  // namespace

TEST_CASE("config parsing and validation") {
  const fs::path dir = fresh_dir("config");
  const auto write_config = [&](const std::string& body) {
    const fs::path file = dir / "config.ini";
    std::ofstream out(file, std::ios::trunc);
    out << body;
    out.close();
    return file;
  };

  SUBCASE("defaults carry the published constants") {
    const PipelineConfig cfg = load_config(write_config("fps = 3\n"));
    CHECK(cfg.turn_threshold_deg == 45.0);
    CHECK(cfg.step_interval_m == 1.5);
    CHECK(cfg.description_period_s == 2.0);
    CHECK(cfg.walking_speed_mps == 1.42);
    CHECK(cfg.clip_length_s == 100.0);
    CHECK(cfg.clip_overlap_s == 10.0);
    CHECK(cfg.min_shared_frames == 3);
    CHECK(cfg.min_duration_s == 180.0);
    CHECK(cfg.min_shots == 9);
    CHECK(cfg.min_coverage == 0.8);
    CHECK(cfg.overlap_threshold == 0.3);
    CHECK(cfg.room_types.size() == 16);
    CHECK(cfg.success_threshold_m == 3.0);
  }

  SUBCASE("comments, overrides and scale overrides") {
    const PipelineConfig cfg = load_config(write_config(
        "# tuned\n"
        "turn_threshold_deg = 50  # tighter turns\n"
        "scale_override.tour007 = 2.5\n"
        "room_types = kitchen, hallway\n"));
    CHECK(cfg.turn_threshold_deg == 50.0);
    CHECK(cfg.scale_overrides.at("tour007") == 2.5);
    CHECK(cfg.room_types == std::vector<std::string>{"kitchen", "hallway"});
  }

  SUBCASE("unknown keys name the offender") {
    try {
      load_config(write_config("turn_treshold_deg = 50\n"));
      FAIL("expected ConfigError");
    } catch (const ConfigError& err) {
      CHECK(std::string(err.what()).find("turn_treshold_deg") !=
            std::string::npos);
    }
  }

  SUBCASE("range violations name the key") {
    try {
      load_config(write_config("turn_threshold_deg = 181\n"));
      FAIL("expected ConfigError");
    } catch (const ConfigError& err) {
      CHECK(std::string(err.what()).find("turn_threshold_deg") !=
            std::string::npos);
    }
    CHECK_THROWS_AS(load_config(write_config("workers = 0\n")), ConfigError);
    CHECK_THROWS_AS(load_config(write_config("room_smoothing_window = 4\n")),
                    ConfigError);
    CHECK_THROWS_AS(load_config(write_config("fps = three\n")), ConfigError);
  }

  SUBCASE("semantic hash ignores paths but tracks constants") {
    const PipelineConfig a = load_config(write_config("fps = 3\n"));
    const PipelineConfig b =
        load_config(write_config("fps = 3\noutput_dir = /elsewhere\n"));
    const PipelineConfig c = load_config(write_config("fps = 6\n"));
    CHECK(a.semantic_hash() == b.semantic_hash());
    CHECK(a.semantic_hash() != c.semantic_hash());
  }
}

TEST_CASE("mini scene pipeline end to end") {
  setenv("VLNMINE_API_KEY", "test-key", 1);
  MockEndpoint mock(
      [](const json&, httplib::Response& res) {
        MockEndpoint::ok(res, kMiniSceneInstruction);
      },
      1);

  const fs::path dir = fresh_dir("mini_e2e");
  const MiniScene scene = generate_mini_scene(dir, mock.url());
  const PipelineConfig cfg = load_config(scene.config_file);
  const StageOptions opts;

  SUBCASE("stages run in order and agree") {
    REQUIRE(run_ingest(cfg, opts).ok());
    const json accepted = json::parse(
        ts::slurp(cfg.output_dir / "ingest" / "accepted.json"));
    CHECK(accepted["accepted"] == json::array({"tour001"}));

    REQUIRE(run_merge(cfg, opts).ok());
    const json report = json::parse(
        ts::slurp(cfg.output_dir / "merged" / "tour001" /
                  "merge_report.json"));
    CHECK(report["components"].size() == 1);
    CHECK(report["frames_registered"] == scene.num_frames);
    CHECK(report["frames_dropped"] == 0);
    // the perturbed clip folds back: residuals stay tiny
    for (const auto& r : report["components"][0]["alignment_residuals"]) {
      CHECK(r[2].get<double>() < 1e-9);
    }

    REQUIRE(run_mine(cfg, opts).ok());
    const json mine = json::parse(
        ts::slurp(cfg.output_dir / "mine" / "tour001.json"));
    CHECK(mine["scale"].get<double>() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(mine["decision_points"].size() == 4);
    REQUIRE(mine["candidate_sets"].size() == 1);
    CHECK(mine["candidate_sets"][0]["negatives"].size() == 3);
    CHECK(mine["candidate_sets"][0]["positive"] == 21);
    CHECK(mine["description_frames"] ==
          json::array({0, 6, 12, 18, 24, 30}));

    REQUIRE(run_caption(cfg, opts).ok());
    const json caption = json::parse(
        ts::slurp(cfg.output_dir / "caption" / "tour001.json"));
    CHECK(caption["frames"].size() == scene.num_frames);
    // the mislabeled frame 14 is smoothed back to hallway
    for (const auto& entry : caption["rooms_smoothed"]) {
      if (entry[0].get<int>() == 14) {
        CHECK(entry[1] == "hallway");
      }
    }

    REQUIRE(run_instruct(cfg, opts).ok());
    CHECK(mock.hits() == 1);

    REQUIRE(run_emit(cfg, opts).ok());
    const auto desc_records =
        read_jsonl(cfg.output_dir / "records" / "description.jsonl");
    REQUIRE(desc_records.size() == 1);
    CHECK_NOTHROW(validate_description_record(desc_records[0]));
    CHECK(desc_records[0]["instruction"] == kMiniSceneInstruction);
    CHECK(desc_records[0]["rooms"].back() == "living room");

    const auto action_records =
        read_jsonl(cfg.output_dir / "records" / "action.jsonl");
    REQUIRE(action_records.size() == 6);
    int with_negatives = 0;
    for (const auto& record : action_records) {
      CHECK_NOTHROW(validate_action_record(record));
      int negatives = 0;
      for (const auto& c : record["candidates"]) {
        negatives += c["role"] == "negative" ? 1 : 0;
      }
      if (negatives > 0) {
        ++with_negatives;
        CHECK(negatives == 3);  // the corner record carries A, B and C
      }
    }
    CHECK(with_negatives == 1);
    CHECK(action_records.back()["ground_truth"] == "STOP");

    const json manifest = json::parse(ts::slurp(cfg.output_dir /
                                                "manifest.json"));
    CHECK(manifest["videos"]["tour001"]["description_records"] == 1);
    CHECK(manifest["videos"]["tour001"]["action_records"] == 6);
    CHECK(manifest["videos"]["tour001"]["generation_failures"] == 0);
    CHECK(manifest["config"]["semantic_hash"] == cfg.semantic_hash());

    // instruct is resume-idempotent: no new calls on rerun
    REQUIRE(run_instruct(cfg, opts).ok());
    CHECK(mock.hits() == 1);

    // Stage isolation: the stage-by-stage run produces the same bytes as
    // the one-shot CLI run frozen in the goldens.
    const char* golden_env = std::getenv("VLNMINE_GOLDEN_DIR");
    const fs::path golden_dir =
        golden_env != nullptr ? fs::path(golden_env)
                              : fs::path(__FILE__).parent_path() / "golden";
    const fs::path golden_scene = golden_dir / "mini_scene";
    if (fs::exists(golden_scene / "description.jsonl")) {
      CHECK(ts::slurp(cfg.output_dir / "records" / "description.jsonl") ==
            ts::slurp(golden_scene / "description.jsonl"));
      CHECK(ts::slurp(cfg.output_dir / "records" / "action.jsonl") ==
            ts::slurp(golden_scene / "action.jsonl"));
    }
  }

  SUBCASE("mine before merge names the missing artifact") {
    REQUIRE(run_ingest(cfg, opts).ok());
    const StageResult result = run_mine(cfg, opts);
    REQUIRE(result.failures.size() == 1);
    CHECK(result.failures[0].second.find("merge") != std::string::npos);
    CHECK(result.failures[0].second.find("missing artifact") !=
          std::string::npos);
  }

  SUBCASE("dry runs write nothing") {
    StageOptions dry;
    dry.dry_run = true;
    REQUIRE(run_ingest(cfg, dry).ok());
    CHECK(!fs::exists(cfg.output_dir / "ingest" / "accepted.json"));

    REQUIRE(run_ingest(cfg, opts).ok());
    REQUIRE(run_merge(cfg, dry).ok());
    CHECK(!fs::exists(cfg.output_dir / "merged"));
  }

  SUBCASE("run_all drives the whole chain") {
    const StageResult result = run_all(cfg, opts);
    REQUIRE(result.ok());
    CHECK(fs::exists(cfg.output_dir / "manifest.json"));
    CHECK(mock.hits() == 1);
  }
}

TEST_CASE("eval stage scores a path-record export") {
  const fs::path dir = fresh_dir("eval_stage");
  const fs::path episodes = dir / "episodes.jsonl";
  {
    std::ofstream out(episodes, std::ios::trunc);
    out << R"({"episode_id":"e1","predicted_path":[[0,0,0],[5,0,0]],)"
        << R"("reference_path":[[0,0,0],[5,0,0]],"goal":[5,0,0]})" << "\n";
    out << R"({"episode_id":"e2","predicted_path":[[0,0,0],[1,0,0]],)"
        << R"("reference_path":[[0,0,0],[9,0,0]],"goal":[9,0,0]})" << "\n";
  }
  const fs::path config_file = dir / "config.ini";
  {
    std::ofstream out(config_file, std::ios::trunc);
    out << "output_dir = " << (dir / "out").string() << "\n"
        << "path_records = " << episodes.string() << "\n";
  }
  const PipelineConfig cfg = load_config(config_file);
  REQUIRE(run_eval(cfg, {}).ok());
  const json metrics =
      json::parse(ts::slurp(dir / "out" / "eval" / "metrics.json"));
  CHECK(metrics["episodes"] == 2);
  CHECK(metrics["sr"].get<double>() == doctest::Approx(0.5));
  CHECK(metrics["gp_m"].get<double>() == doctest::Approx((5.0 + 1.0) / 2.0));

  PipelineConfig no_input = cfg;
  no_input.path_records.clear();
  CHECK_THROWS_AS(run_eval(no_input, {}), ConfigError);
}

TEST_CASE("video filters and unknown videos") {
  setenv("VLNMINE_API_KEY", "test-key", 1);
  MockEndpoint mock(
      [](const json&, httplib::Response& res) {
        MockEndpoint::ok(res, kMiniSceneInstruction);
      },
      1);
  const fs::path dir = fresh_dir("mini_filters");
  const MiniScene scene = generate_mini_scene(dir, mock.url());
  const PipelineConfig cfg = load_config(scene.config_file);

  StageOptions unknown;
  unknown.videos = {"no_such_video"};
  CHECK_THROWS_AS(run_ingest(cfg, unknown), Error);

  StageOptions known;
  known.videos = {"tour001"};
  CHECK(run_ingest(cfg, known).ok());
}
