#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "test_support.hpp"
#include "vlnmine/metrics.hpp"

using namespace vlnmine;
namespace fs = std::filesystem;
namespace ts = vlnmine::testsupport;

namespace {

PathRecord straight_record(const std::string& id, double start_to_goal,
                           double end_to_goal, double predicted_len) {
  // Walk along +x; the goal sits ahead on the axis.
  PathRecord r;
  r.episode_id = id;
  r.goal = {start_to_goal, 0.0, 0.0};
  const double end_x = start_to_goal - end_to_goal;
  const int hops = 8;
  for (int i = 0; i <= hops; ++i) {
    // zig-zag in y to inflate the predicted arc length when asked
    const double x = end_x * i / hops;
    const double extra = predicted_len - std::abs(end_x);
    const double amp = extra > 0 ? extra / (2.0 * hops) : 0.0;
    r.predicted_path.push_back({x, i % 2 == 1 ? amp * hops : 0.0, 0.0});
  }
  r.predicted_path.back() = {end_x, 0.0, 0.0};
  r.reference_path = {{0, 0, 0}, r.goal};
  return r;
}

}  // namespace

TEST_CASE("success is inclusive at the threshold") {
  PathRecord at_goal;
  at_goal.episode_id = "a";
  at_goal.predicted_path = {{0, 0, 0}, {8, 0, 0}};
  at_goal.reference_path = {{0, 0, 0}, {8, 0, 0}};
  at_goal.goal = {8, 0, 0};
  CHECK(success(at_goal) == 1);

  PathRecord boundary = at_goal;
  boundary.predicted_path.back() = {5, 0, 0};  // exactly 3 m short
  CHECK(success(boundary) == 1);

  PathRecord miss = at_goal;
  miss.predicted_path.back() = {3, 0, 0};  // 5 m short
  CHECK(success(miss) == 0);
}

TEST_CASE("spl formula") {
  SUBCASE("optimal path scores 1") {
    PathRecord r;
    r.episode_id = "opt";
    r.predicted_path = {{0, 0, 0}, {5, 0, 0}};
    r.reference_path = {{0, 0, 0}, {5, 0, 0}};
    r.goal = {5, 0, 0};
    CHECK(spl(std::vector<PathRecord>{r}) == doctest::Approx(1.0));
  }

  SUBCASE("doubled path length halves the score") {
    // Out-and-back detour: 10 m traveled for a 5 m reference.
    PathRecord r;
    r.episode_id = "detour";
    r.predicted_path = {{0, 0, 0}, {2.5, 0, 0}, {0, 0, 0}, {5, 0, 0}};
    r.reference_path = {{0, 0, 0}, {5, 0, 0}};
    r.goal = {5, 0, 0};
    CHECK(path_length(r.predicted_path) == doctest::Approx(10.0));
    CHECK(spl(std::vector<PathRecord>{r}) == doctest::Approx(0.5));
  }

  SUBCASE("failures contribute zero regardless of length") {
    PathRecord r;
    r.episode_id = "fail";
    r.predicted_path = {{0, 0, 0}, {1, 0, 0}};
    r.reference_path = {{0, 0, 0}, {50, 0, 0}};
    r.goal = {50, 0, 0};
    CHECK(spl(std::vector<PathRecord>{r}) == 0.0);
  }

  SUBCASE("zero-length reference is rejected") {
    PathRecord r;
    r.episode_id = "bad";
    r.predicted_path = {{0, 0, 0}, {1, 0, 0}};
    r.reference_path = {{2, 2, 2}};
    r.goal = {1, 0, 0};
    CHECK_THROWS_AS(spl(std::vector<PathRecord>{r}), InvalidReference);
  }
}

TEST_CASE("goal progress in meters") {
  PathRecord r;
  r.episode_id = "gp";
  r.reference_path = {{0, 0, 0}, {8, 0, 0}};
  r.goal = {8, 0, 0};

  r.predicted_path = {{0, 0, 0}, {5, 0, 0}};  // 8 m away -> 3 m away
  CHECK(goal_progress(std::vector<PathRecord>{r}) == doctest::Approx(5.0));

  r.predicted_path = {{0, 0, 0}, {0, 0, 0}};
  CHECK(goal_progress(std::vector<PathRecord>{r}) == doctest::Approx(0.0));

  r.predicted_path = {{5, 0, 0}, {0, 0, 0}};  // 3 m away -> 8 m away
  CHECK(goal_progress(std::vector<PathRecord>{r}) == doctest::Approx(-5.0));
}

TEST_CASE("all-success set with predicted equal to reference scores exactly 1") {
  std::vector<PathRecord> records;
  for (int i = 1; i <= 5; ++i) {
    PathRecord r;
    r.episode_id = std::to_string(i);
    r.predicted_path = {{0, 0, 0}, {0.5 * i, 0, 0}, {0.5 * i, 1.0 * i, 0}};
    r.reference_path = r.predicted_path;
    r.goal = r.predicted_path.back();
    records.push_back(std::move(r));
  }
  CHECK(spl(records) == 1.0);
  CHECK(success_rate(records) == 1.0);
}

TEST_CASE("spl never exceeds sr") {
  std::mt19937 rng(97);
  std::uniform_int_distribution<int> count(1, 12);
  std::uniform_real_distribution<double> coord(-10.0, 10.0);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<PathRecord> records;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) {
      PathRecord r;
      r.episode_id = std::to_string(i);
      const int hops = 2 + i % 4;
      for (int h = 0; h <= hops; ++h) {
        r.predicted_path.push_back({coord(rng), coord(rng), 0.0});
      }
      r.reference_path = {{coord(rng), coord(rng), 0.0},
                          {coord(rng), coord(rng), 0.0}};
      while (path_length(r.reference_path) <= 0.0) {
        r.reference_path.back() = {coord(rng), coord(rng), 0.0};
      }
      r.goal = {coord(rng), coord(rng), 0.0};
      records.push_back(std::move(r));
    }
    const double sr = success_rate(records);
    const double s = spl(records);
    CHECK(s >= 0.0);
    CHECK(s <= sr + 1e-12);
    CHECK(sr <= 1.0);
  }
}

TEST_CASE("metrics are invariant under rigid motion") {
  std::mt19937 rng(101);
  std::vector<PathRecord> records;
  for (int i = 0; i < 10; ++i) {
    // end distances stay clear of the 3 m success boundary so rounding
    // after the rigid motion cannot flip outcomes
    const double end_to_goal = i % 2 == 0 ? 0.3 * i : 5.0 + i;
    records.push_back(
        straight_record(std::to_string(i), 8.0, end_to_goal, 9.0 + i));
  }
  const MetricsSummary base = evaluate(records);
  CHECK(base.sr == doctest::Approx(0.5));

  for (int trial = 0; trial < 5; ++trial) {
    SimilarityTransform rigid;
    rigid.scale = 1.0;
    rigid.rotation = ts::random_rotation(rng);
    rigid.translation = 30.0 * Eigen::Vector3d::Random();

    std::vector<PathRecord> moved = records;
    for (PathRecord& r : moved) {
      for (auto& p : r.predicted_path) {
        p = rigid.apply(p);
      }
      for (auto& p : r.reference_path) {
        p = rigid.apply(p);
      }
      r.goal = rigid.apply(r.goal);
    }
    const MetricsSummary summary = evaluate(moved);
    CHECK(summary.sr == doctest::Approx(base.sr));
    CHECK(summary.spl == doctest::Approx(base.spl));
    CHECK(summary.gp_m == doctest::Approx(base.gp_m));
  }
}

TEST_CASE("path records round trip through json lines") {
  const fs::path dir = fs::temp_directory_path() / "vlnmine_tests" / "metrics";
  fs::create_directories(dir);
  const fs::path file = dir / "episodes.jsonl";
  {
    std::ofstream out(file, std::ios::trunc);
    out << R"({"episode_id":"e1","predicted_path":[[0,0,0],[5,0,0]],)"
        << R"("reference_path":[[0,0,0],[5,0,0]],"goal":[5,0,0]})" << "\n";
    out << R"({"episode_id":"e2","predicted_path":[[0,0,0],[1,0,0]],)"
        << R"("reference_path":[[0,0,0],[9,0,0]],"goal":[9,0,0],)"
        << R"("success_threshold_m":1.5})" << "\n";
  }
  const auto records = read_path_records(file, 3.0);
  REQUIRE(records.size() == 2);
  CHECK(records[0].success_threshold_m == 3.0);
  CHECK(records[1].success_threshold_m == 1.5);
  CHECK(success(records[0]) == 1);
  CHECK(success(records[1]) == 0);

  const MetricsSummary summary = evaluate(records);
  CHECK(summary.episodes == 2);
  write_metrics_summary(summary, dir / "metrics.json");
  CHECK(fs::exists(dir / "metrics.json"));

  {
    std::ofstream out(file, std::ios::trunc);
    out << R"({"episode_id":"bad","predicted_path":[],)"
        << R"("reference_path":[[0,0,0]],"goal":[0,0,0]})" << "\n";
  }
  CHECK_THROWS_AS(read_path_records(file, 3.0), SchemaError);
}
