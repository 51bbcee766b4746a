#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <vector>

#include "test_support.hpp"
#include "vlnmine/geometry.hpp"

using namespace vlnmine;
namespace ts = vlnmine::testsupport;

namespace {

SimilarityTransform align(const std::vector<Eigen::Vector3d>& src,
                          const std::vector<Eigen::Vector3d>& dst) {
  return umeyama_align<double>(std::span<const Eigen::Vector3d>(src),
                               std::span<const Eigen::Vector3d>(dst));
}

}  // namespace

TEST_CASE("view_state identity pose") {
  CameraPose pose;
  const ViewState v = view_state(pose);
  CHECK(v.position.norm() == doctest::Approx(0.0));
  CHECK((v.direction - Eigen::Vector3d::UnitZ()).norm() ==
        doctest::Approx(0.0));
}

TEST_CASE("view_state 90 degree yaw about +Y") {
  // Oracle: rotate the optical axis by the explicit camera-to-world matrix.
  const Eigen::Matrix3d cam_to_world =
      Eigen::AngleAxisd(rad_from_deg(90.0), Eigen::Vector3d::UnitY())
          .toRotationMatrix();
  CameraPose pose;
  pose.qvec = Eigen::Quaterniond(cam_to_world.transpose());
  const Eigen::Vector3d expected = cam_to_world * Eigen::Vector3d::UnitZ();
  CHECK((expected - Eigen::Vector3d(1, 0, 0)).norm() < 1e-12);
  const ViewState v = view_state(pose);
  CHECK((v.direction - expected).norm() < 1e-9);
}

TEST_CASE("view_state center from tvec") {
  CameraPose pose;
  pose.tvec = {0.0, 0.0, -2.0};
  const ViewState v = view_state(pose);
  CHECK((v.position - Eigen::Vector3d(0, 0, 2)).norm() < 1e-12);
}

TEST_CASE("view_state commutes with similarity transforms") {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    CameraPose pose;
    pose.qvec = ts::random_rotation(rng);
    pose.tvec = 5.0 * Eigen::Vector3d::Random();
    const SimilarityTransform t = ts::random_similarity(rng);

    const ViewState before = view_state(pose);
    const ViewState after = view_state(transformed(pose, t));
    CHECK((after.position - t.apply(before.position)).norm() < 1e-9);
    CHECK((after.direction - t.rotation * before.direction).norm() < 1e-9);
  }
}

TEST_CASE("angular change basics") {
  const Eigen::Vector3d x = Eigen::Vector3d::UnitX();
  const Eigen::Vector3d y = Eigen::Vector3d::UnitY();
  CHECK(angular_change_deg(x, x) == doctest::Approx(0.0));
  CHECK(angular_change_deg(x, y) == doctest::Approx(90.0));

  const double c = std::cos(rad_from_deg(45.0));
  const double s = std::sin(rad_from_deg(45.0));
  CHECK(angular_change_deg(x, Eigen::Vector3d(c, s, 0)) ==
        doctest::Approx(45.0).epsilon(1e-12));
}

TEST_CASE("angular change symmetry and rotation invariance") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Vector3d a = ts::random_unit(rng);
    const Eigen::Vector3d b = ts::random_unit(rng);
    const double ab = angular_change_deg(a, b);
    CHECK(ab >= 0.0);
    CHECK(ab <= 180.0);
    CHECK(ab == doctest::Approx(angular_change_deg(b, a)));

    const Eigen::Quaterniond r = ts::random_rotation(rng);
    const Eigen::Vector3d ra = r * a;
    const Eigen::Vector3d rb = r * b;
    CHECK(angular_change_deg(ra, rb) == doctest::Approx(ab).epsilon(1e-9));
  }
  // clamped at the antipodal boundary
  CHECK(angular_change_deg(Eigen::Vector3d::UnitX(),
                           Eigen::Vector3d(-1, 0, 0)) ==
        doctest::Approx(180.0));
}

TEST_CASE("similarity transform inverse and composition") {
  std::mt19937 rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const SimilarityTransform a = ts::random_similarity(rng);
    const SimilarityTransform b = ts::random_similarity(rng);
    const Eigen::Vector3d p = 4.0 * Eigen::Vector3d::Random();
    CHECK((a.inverse().apply(a.apply(p)) - p).norm() < 1e-9);
    CHECK(((a * b).apply(p) - a.apply(b.apply(p))).norm() < 1e-9);
  }
}

TEST_CASE("umeyama identity on equal point sets") {
  const std::vector<Eigen::Vector3d> pts = {
      {0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0.3, 0.2, 1.5}};
  const SimilarityTransform t = align(pts, pts);
  CHECK(t.scale == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(t.translation.norm() < 1e-9);
  CHECK(std::abs(t.rotation.w()) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("umeyama recovers a scale 2.5 transform") {
  std::mt19937 rng(17);
  SimilarityTransform truth = ts::random_similarity(rng);
  truth.scale = 2.5;
  std::vector<Eigen::Vector3d> src, dst;
  for (int i = 0; i < 20; ++i) {
    src.push_back(5.0 * Eigen::Vector3d::Random());
    dst.push_back(truth.apply(src.back()));
  }
  const SimilarityTransform t = align(src, dst);
  CHECK(t.scale == doctest::Approx(2.5).epsilon(1e-6));
  CHECK((t.translation - truth.translation).norm() < 1e-6);
  CHECK(t.rotation.angularDistance(truth.rotation) < 1e-6);
}

TEST_CASE("umeyama generate-and-recover across sizes") {
  std::mt19937 rng(19);
  std::uniform_int_distribution<int> size_dist(3, 1000);
  for (int trial = 0; trial < 50; ++trial) {
    const SimilarityTransform truth = ts::random_similarity(rng);
    const int n = size_dist(rng);
    std::vector<Eigen::Vector3d> src, dst;
    src.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      src.push_back(10.0 * Eigen::Vector3d::Random());
      dst.push_back(truth.apply(src.back()));
    }
    const SimilarityTransform t = align(src, dst);

    double rms = 0.0;
    for (std::size_t i = 0; i < src.size(); ++i) {
      rms += (t.apply(src[i]) - dst[i]).squaredNorm();
    }
    rms = std::sqrt(rms / static_cast<double>(src.size()));
    CHECK(rms <= 1e-6);
    CHECK(t.rotation.toRotationMatrix().determinant() ==
          doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("umeyama agrees with Eigen's reference implementation") {
  std::mt19937 rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 3 + trial;
    Eigen::Matrix3Xd src(3, n), dst(3, n);
    const SimilarityTransform truth = ts::random_similarity(rng);
    for (int i = 0; i < n; ++i) {
      const Eigen::Vector3d p = 5.0 * Eigen::Vector3d::Random();
      src.col(i) = p;
      dst.col(i) = truth.apply(p) + 0.01 * Eigen::Vector3d::Random();
    }
    const Eigen::Matrix4d reference = Eigen::umeyama(src, dst, true);

    std::vector<Eigen::Vector3d> src_v, dst_v;
    for (int i = 0; i < n; ++i) {
      src_v.push_back(src.col(i));
      dst_v.push_back(dst.col(i));
    }
    const SimilarityTransform t = align(src_v, dst_v);
    Eigen::Matrix4d mine = Eigen::Matrix4d::Identity();
    mine.topLeftCorner<3, 3>() = t.scale * t.rotation.toRotationMatrix();
    mine.topRightCorner<3, 1>() = t.translation;
    CHECK((mine - reference).norm() < 1e-9);
  }
}

TEST_CASE("umeyama rejects degenerate inputs") {
  const std::vector<Eigen::Vector3d> two = {{0, 0, 0}, {1, 0, 0}};
  CHECK_THROWS_AS(align(two, two), InsufficientOverlap);

  std::vector<Eigen::Vector3d> collinear;
  for (int i = 0; i < 6; ++i) {
    collinear.push_back({static_cast<double>(i), 0.0, 0.0});
  }
  CHECK_THROWS_AS(align(collinear, collinear), DegenerateConfiguration);

  const std::vector<Eigen::Vector3d> coincident(5, Eigen::Vector3d::Ones());
  CHECK_THROWS_AS(align(coincident, coincident), DegenerateConfiguration);

  std::vector<Eigen::Vector3d> four = {
      {0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 1}};
  std::vector<Eigen::Vector3d> three(four.begin(), four.begin() + 3);
  CHECK_THROWS_AS(align(four, three), InvalidInput);
}
