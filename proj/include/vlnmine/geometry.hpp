#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "vlnmine/colmap_model.hpp"
#include "vlnmine/errors.hpp"

namespace vlnmine {

template <typename Scalar>
constexpr Scalar deg_from_rad(Scalar rad) {
  return rad * Scalar(180) / std::numbers::pi_v<Scalar>;
}

template <typename Scalar>
constexpr Scalar rad_from_deg(Scalar deg) {
  return deg * std::numbers::pi_v<Scalar> / Scalar(180);
}

// Scaled rigid motion x -> scale * (rotation * x) + translation.
template <typename Scalar>
struct SimilarityTransformT {
  using Vec3 = Eigen::Matrix<Scalar, 3, 1>;

  Scalar scale = Scalar(1);
  Eigen::Quaternion<Scalar> rotation = Eigen::Quaternion<Scalar>::Identity();
  Vec3 translation = Vec3::Zero();

  static SimilarityTransformT Identity() { return {}; }

  Vec3 apply(const Vec3& p) const {
    return scale * (rotation * p) + translation;
  }

  SimilarityTransformT inverse() const {
    SimilarityTransformT inv;
    inv.scale = Scalar(1) / scale;
    inv.rotation = rotation.conjugate();
    inv.translation = -(inv.scale * (inv.rotation * translation));
    return inv;
  }

  // (a * b).apply(p) == a.apply(b.apply(p))
  friend SimilarityTransformT operator*(const SimilarityTransformT& a,
                                        const SimilarityTransformT& b) {
    SimilarityTransformT out;
    out.scale = a.scale * b.scale;
    out.rotation = (a.rotation * b.rotation).normalized();
    out.translation = a.apply(b.translation);
    return out;
  }
};

using SimilarityTransform = SimilarityTransformT<double>;

// World-frame camera position and optical axis.
template <typename Scalar>
struct ViewStateT {
  using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
  Vec3 position = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();
};

using ViewState = ViewStateT<double>;

// Position C = -R^T t, direction = R^T (0,0,1) for a world-to-camera pose.
inline ViewState view_state(const CameraPose& pose) {
  const Eigen::Matrix3d rot = pose.rotation();
  ViewState v;
  v.position = -(rot.transpose() * pose.tvec);
  v.direction = rot.row(2).transpose();
  return v;
}

// Angle between two unit vectors in degrees, clamped into [0, 180].
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar angular_change_deg(
    const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  const Scalar dot =
      std::clamp<Scalar>(a.derived().dot(b.derived()), Scalar(-1), Scalar(1));
  return deg_from_rad(std::acos(dot));
}

// Re-expresses a camera pose in transformed world coordinates so that the
// camera center maps through `t` and the optical axis through its rotation.
inline CameraPose transformed(const CameraPose& pose,
                              const SimilarityTransform& t) {
  CameraPose out = pose;
  const Eigen::Quaterniond rot =
      (pose.qvec * t.rotation.conjugate()).normalized();
  out.qvec = rot;
  out.tvec = t.scale * pose.tvec - rot * t.translation;
  return out;
}

// Closed-form least-squares similarity transform mapping src onto dst;
// reflections are rejected by construction. Throws InsufficientOverlap for
// fewer than 3 correspondences and DegenerateConfiguration for collinear or
// coincident source/target sets.
template <typename Scalar>
SimilarityTransformT<Scalar> umeyama_align(
    std::span<const Eigen::Matrix<Scalar, 3, 1>> src,
    std::span<const Eigen::Matrix<Scalar, 3, 1>> dst) {
  using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
  using Mat3 = Eigen::Matrix<Scalar, 3, 3>;

  if (src.size() != dst.size()) {
    throw InvalidInput("correspondence count mismatch: " +
                       std::to_string(src.size()) + " vs " +
                       std::to_string(dst.size()));
  }
  const auto n = src.size();
  if (n < 3) {
    throw InsufficientOverlap("need at least 3 correspondences, got " +
                              std::to_string(n));
  }

  const Scalar inv_n = Scalar(1) / static_cast<Scalar>(n);
  Vec3 mean_src = Vec3::Zero();
  Vec3 mean_dst = Vec3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    mean_src += src[i];
    mean_dst += dst[i];
  }
  mean_src *= inv_n;
  mean_dst *= inv_n;

  Scalar src_var = Scalar(0);
  Mat3 cov = Mat3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 ds = src[i] - mean_src;
    const Vec3 dd = dst[i] - mean_dst;
    src_var += ds.squaredNorm();
    cov += dd * ds.transpose();
  }
  src_var *= inv_n;
  cov *= inv_n;

  if (src_var <= Scalar(0)) {
    throw DegenerateConfiguration("source points are coincident");
  }

  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  if (sv(1) <= sv(0) * Scalar(1e-9)) {
    throw DegenerateConfiguration(
        "correspondences are collinear; similarity transform ill-posed");
  }

  Vec3 sign_fix = Vec3::Ones();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < Scalar(0)) {
    sign_fix(2) = Scalar(-1);
  }

  SimilarityTransformT<Scalar> t;
  const Mat3 rot = svd.matrixU() * sign_fix.asDiagonal() *
                   svd.matrixV().transpose();
  t.rotation = Eigen::Quaternion<Scalar>(rot).normalized();
  t.scale = sv.dot(sign_fix) / src_var;
  t.translation = mean_dst - t.scale * (rot * mean_src);
  return t;
}

}  // namespace vlnmine
