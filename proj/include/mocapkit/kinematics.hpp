#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "mocapkit/common.hpp"

namespace mocapkit {

template <typename Scalar>
using AxisAngleT = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using RotationT = Eigen::Matrix<Scalar, 3, 3>;
// One axis-angle (or point) per row.
template <typename Scalar>
using RowsT = Eigen::Matrix<Scalar, Eigen::Dynamic, 3, Eigen::RowMajor>;

using AxisAngle = AxisAngleT<double>;
using Rotation = RotationT<double>;
using AxisAngles = RowsT<double>;

// Tolerances for rotation matrices coming from outside (files, callers) and for
// rotations we compute ourselves.
inline constexpr double kInputRotationTol = 1e-6;
inline constexpr double kOutputRotationTol = 1e-9;
// Angles this close to pi use the axis sign rule of canonicalize().
inline constexpr double kHalfTurnTol = 1e-9;

template <typename Scalar>
RotationT<Scalar> skew(const Eigen::Matrix<Scalar, 3, 1>& v) {
  RotationT<Scalar> k;
  k << Scalar(0), -v.z(), v.y(),
       v.z(), Scalar(0), -v.x(),
       -v.y(), v.x(), Scalar(0);
  return k;
}

template <typename Scalar>
RotationT<Scalar> rodrigues(const AxisAngleT<Scalar>& aa) {
  using std::cos;
  using std::sin;
  const Scalar theta2 = aa.squaredNorm();
  const RotationT<Scalar> k = skew(aa);
  if (theta2 < Scalar(1e-16)) {
    return RotationT<Scalar>::Identity() + k + Scalar(0.5) * k * k;
  }
  const Scalar theta = std::sqrt(theta2);
  return RotationT<Scalar>::Identity() + (sin(theta) / theta) * k +
         ((Scalar(1) - cos(theta)) / theta2) * k * k;
}

// Left Jacobian of SO(3): d(rodrigues(v)) * rodrigues(v)^T = skew(left_jacobian(v) * dv).
template <typename Scalar>
RotationT<Scalar> left_jacobian(const AxisAngleT<Scalar>& aa) {
  using std::cos;
  using std::sin;
  const Scalar theta2 = aa.squaredNorm();
  const RotationT<Scalar> k = skew(aa);
  if (theta2 < Scalar(1e-12)) {
    return RotationT<Scalar>::Identity() + Scalar(0.5) * k + (Scalar(1) / Scalar(6)) * k * k;
  }
  const Scalar theta = std::sqrt(theta2);
  return RotationT<Scalar>::Identity() + ((Scalar(1) - cos(theta)) / theta2) * k +
         ((theta - sin(theta)) / (theta2 * theta)) * k * k;
}

// First nonzero component positive; used to pick one of the two axes of a half turn.
template <typename Scalar>
bool lexicographically_positive(const AxisAngleT<Scalar>& v) {
  for (int i = 0; i < 3; ++i) {
    if (v[i] > Scalar(0)) return true;
    if (v[i] < Scalar(0)) return false;
  }
  return true;
}

// Maps any axis-angle to the equivalent one with angle in [0, pi]. At exactly a
// half turn the axis with lexicographically positive first component is kept.
template <typename Scalar>
AxisAngleT<Scalar> canonicalize(const AxisAngleT<Scalar>& aa) {
  constexpr Scalar pi = std::numbers::pi_v<Scalar>;
  const Scalar theta = aa.norm();
  if (theta == Scalar(0)) return AxisAngleT<Scalar>::Zero();
  const AxisAngleT<Scalar> axis = aa / theta;
  Scalar wrapped = std::fmod(theta, Scalar(2) * pi);
  AxisAngleT<Scalar> out;
  if (wrapped > pi) {
    out = -axis * (Scalar(2) * pi - wrapped);
  } else {
    out = axis * wrapped;
  }
  if (std::abs(out.norm() - pi) <= Scalar(kHalfTurnTol) && !lexicographically_positive(out)) {
    out = -out;
  }
  return out;
}

template <typename Scalar>
bool is_rotation(const RotationT<Scalar>& r, double tol) {
  const Scalar err = (r.transpose() * r - RotationT<Scalar>::Identity()).cwiseAbs().maxCoeff();
  return err <= Scalar(tol) && std::abs(r.determinant() - Scalar(1)) <= Scalar(tol);
}

template <typename Scalar>
AxisAngleT<Scalar> rotation_to_axis_angle(const RotationT<Scalar>& r) {
  require(is_rotation(r, kInputRotationTol), ErrorCode::InvalidRotation,
          "matrix is not a rotation within tolerance");
  // Shepperd-style extraction through the quaternion stays accurate near 0 and pi.
  Eigen::Quaternion<Scalar> q(r);
  if (q.w() < Scalar(0)) q.coeffs() = -q.coeffs();
  const AxisAngleT<Scalar> v = q.vec();
  const Scalar s = v.norm();
  if (s == Scalar(0)) return AxisAngleT<Scalar>::Zero();
  const Scalar angle = Scalar(2) * std::atan2(s, q.w());
  return canonicalize<Scalar>(v / s * angle);
}

template <typename Scalar>
struct RigidTransformT {
  RotationT<Scalar> rotation = RotationT<Scalar>::Identity();
  Eigen::Matrix<Scalar, 3, 1> translation = Eigen::Matrix<Scalar, 3, 1>::Zero();

  static RigidTransformT identity() { return {}; }

  Eigen::Matrix<Scalar, 3, 1> operator*(const Eigen::Matrix<Scalar, 3, 1>& p) const {
    return rotation * p + translation;
  }

  RigidTransformT operator*(const RigidTransformT& rhs) const {
    return {rotation * rhs.rotation, rotation * rhs.translation + translation};
  }

  RigidTransformT inverse() const {
    const RotationT<Scalar> rt = rotation.transpose();
    return {rt, -(rt * translation)};
  }
};

using RigidTransform = RigidTransformT<double>;

// Joint hierarchy with parents stored before their children.
class SkeletonTree {
 public:
  SkeletonTree() = default;
  SkeletonTree(std::vector<int> parents, std::vector<std::string> names);

  int size() const { return static_cast<int>(parents_.size()); }
  int parent(int joint) const { return parents_[joint]; }
  const std::vector<int>& parents() const { return parents_; }
  const std::string& name(int joint) const { return names_[joint]; }
  const std::vector<std::string>& names() const { return names_; }

  // -1 when absent.
  int index_of(const std::string& name) const;
  // True when `ancestor` is `joint` or lies on its path to the root.
  bool is_ancestor_or_self(int ancestor, int joint) const;
  int depth(int joint) const;

 private:
  std::vector<int> parents_;
  std::vector<std::string> names_;
};

// World transform of every joint. local_poses holds one axis-angle per joint
// (row j rotates joint j about its rest position); the root is additionally
// rotated by global_orient. Each joint's translation is its world position.
template <typename Scalar>
std::vector<RigidTransformT<Scalar>> forward_kinematics(const SkeletonTree& tree,
                                                        const RowsT<Scalar>& rest_joints,
                                                        const AxisAngleT<Scalar>& global_orient,
                                                        const RowsT<Scalar>& local_poses) {
  const int n = tree.size();
  require(rest_joints.rows() == n && local_poses.rows() == n, ErrorCode::Dimension,
          "forward_kinematics: expected " + std::to_string(n) + " rest joints and poses");
  std::vector<RigidTransformT<Scalar>> world(n);
  for (int j = 0; j < n; ++j) {
    const RotationT<Scalar> local = rodrigues<Scalar>(local_poses.row(j).transpose());
    const int p = tree.parent(j);
    if (p < 0) {
      world[j].rotation = rodrigues<Scalar>(global_orient) * local;
      world[j].translation = rest_joints.row(j).transpose();
    } else {
      world[j].rotation = world[p].rotation * local;
      world[j].translation =
          world[p].rotation * (rest_joints.row(j) - rest_joints.row(p)).transpose() +
          world[p].translation;
    }
  }
  return world;
}

// Local axis-angle for target_joint such that its world rotation after forward
// kinematics equals target_global. Only ancestors of target_joint are read.
AxisAngle gamma_global_to_local(const SkeletonTree& tree, const AxisAngles& rest_joints,
                                const AxisAngle& global_orient, const AxisAngles& local_poses,
                                int target_joint, const Rotation& target_global);

}  // namespace mocapkit
