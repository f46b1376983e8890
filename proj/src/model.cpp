#include "mocapkit/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

namespace mocapkit {

namespace {

constexpr double kRowSumTol = 1e-6;

void check_stochastic_rows(const SparseMatrix& m, const std::string& what, bool nonnegative) {
  for (int r = 0; r < m.outerSize(); ++r) {
    double sum = 0.0;
    for (SparseMatrix::InnerIterator it(m, r); it; ++it) {
      require(std::isfinite(it.value()), ErrorCode::InvalidModel, what + " has non-finite entries");
      require(!nonnegative || it.value() >= 0.0, ErrorCode::InvalidModel,
              what + " row " + std::to_string(r) + " has a negative weight");
      sum += it.value();
    }
    require(std::abs(sum - 1.0) <= kRowSumTol, ErrorCode::InvalidModel,
            what + " row " + std::to_string(r) + " sums to " + std::to_string(sum));
  }
}

std::string fingertip_name(const ParametricModel& model, HandSide side, int finger) {
  const auto& ids = model.hand_joints(side);
  std::string name = model.tree.name(ids.at(1 + 3 * finger + 2));
  while (!name.empty() && std::isdigit(static_cast<unsigned char>(name.back()))) name.pop_back();
  return name + "_tip";
}

}  // namespace

const char* to_string(HandSide side) { return side == HandSide::Left ? "left" : "right"; }

HandSide hand_side_from_string(const std::string& s) {
  if (s == "left") return HandSide::Left;
  if (s == "right") return HandSide::Right;
  fail(ErrorCode::Input, "unknown hand side '" + s + "'");
}

void ParametricModel::validate() const {
  const int n = num_vertices();
  const int j = num_joints();
  require(n > 0, ErrorCode::InvalidModel, "model has no vertices");
  require(template_vertices.allFinite(), ErrorCode::InvalidModel, "template has non-finite vertices");
  require(faces.size() == 0 || (faces.minCoeff() >= 0 && faces.maxCoeff() < n),
          ErrorCode::InvalidModel, "face index out of range");
  require(shape_basis.rows() == 3 * n, ErrorCode::InvalidModel,
          "shape basis must have 3 * vertex count rows");
  require(shape_basis.allFinite(), ErrorCode::InvalidModel, "shape basis has non-finite entries");
  require(skin_weights.rows() == n && skin_weights.cols() == j, ErrorCode::InvalidModel,
          "skin weights must be vertices x joints");
  check_stochastic_rows(skin_weights, "skin weights", true);
  require(joint_regressor.cols() == n && joint_regressor.rows() >= j, ErrorCode::InvalidModel,
          "joint regressor must have vertex-count columns and at least one row per joint");
  require(static_cast<int>(regressor_names.size()) == joint_regressor.rows(),
          ErrorCode::InvalidModel, "regressor names do not match regressor rows");
  check_stochastic_rows(joint_regressor, "joint regressor", false);
  for (int side = 0; side < 2; ++side) {
    const auto& hj = hand_joint_ids[side];
    const auto& tips = fingertip_vertex_ids[side];
    require(hj.empty() || static_cast<int>(hj.size()) == kHandSkeletonJoints,
            ErrorCode::InvalidModel, "hand joint list must hold a wrist and 15 finger joints");
    require(tips.empty() || (static_cast<int>(tips.size()) == kFingertipsPerHand && !hj.empty()),
            ErrorCode::InvalidModel, "fingertip list must hold 5 vertices of a declared hand");
    for (int id : hj) {
      require(id > 0 && id < j, ErrorCode::InvalidModel, "hand joint index out of range");
    }
    for (int id : tips) {
      require(id >= 0 && id < n, ErrorCode::InvalidModel, "fingertip vertex out of range");
    }
    for (std::size_t k = 1; k < hj.size(); ++k) {
      require(tree.is_ancestor_or_self(hj[0], hj[k]), ErrorCode::InvalidModel,
              "finger joints must descend from their wrist");
    }
  }
  require(hand_joint_ids[0].empty() == hand_joint_ids[1].empty(), ErrorCode::InvalidModel,
          "hands must be declared for both sides or neither");
  require(knuckle_pair[0] >= 0 && knuckle_pair[0] < kHandKeypoints && knuckle_pair[1] >= 0 &&
              knuckle_pair[1] < kHandKeypoints && knuckle_pair[0] != knuckle_pair[1],
          ErrorCode::InvalidModel, "knuckle pair must name two distinct hand keypoints");
  require(std::isfinite(reference_knuckle_length) && reference_knuckle_length >= 0.0,
          ErrorCode::InvalidModel, "reference knuckle length must be finite and nonnegative");
}

PoseParams PoseParams::zero(const ParametricModel& model) {
  PoseParams p;
  p.joint_poses = AxisAngles::Zero(model.num_joints() - 1, 3);
  return p;
}

AxisAngles local_poses(const ParametricModel& model, const PoseParams& pose) {
  require(pose.joint_poses.rows() == model.num_joints() - 1, ErrorCode::Dimension,
          "pose has " + std::to_string(pose.joint_poses.rows()) + " joint rotations, model needs " +
              std::to_string(model.num_joints() - 1));
  AxisAngles local(model.num_joints(), 3);
  local.row(0).setZero();
  local.bottomRows(model.num_joints() - 1) = pose.joint_poses;
  return local;
}

std::vector<int> finger_joint_ids(const ParametricModel& model, HandSide side) {
  const auto& hj = model.hand_joints(side);
  require(!hj.empty(), ErrorCode::InvalidModel, "model declares no hand joints");
  return {hj.begin() + 1, hj.end()};
}

std::vector<int> body_joint_ids(const ParametricModel& model) {
  std::vector<bool> finger(model.num_joints(), false);
  for (int side = 0; side < 2; ++side) {
    const auto& hj = model.hand_joint_ids[side];
    for (std::size_t k = 1; k < hj.size(); ++k) finger[hj[k]] = true;
  }
  std::vector<int> ids;
  for (int j = 1; j < model.num_joints(); ++j) {
    if (!finger[j]) ids.push_back(j);
  }
  return ids;
}

Points3 shape_template(const ParametricModel& model, const Betas& beta) {
  require(beta.size() == model.num_betas(), ErrorCode::Dimension,
          "expected " + std::to_string(model.num_betas()) + " shape coefficients");
  Points3 shaped = model.template_vertices;
  if (beta.size() == 0) return shaped;
  const Eigen::VectorXd offsets = model.shape_basis * beta;
  shaped += Eigen::Map<const Points3>(offsets.data(), model.num_vertices(), 3);
  return shaped;
}

Points3 regress_joints(const SparseMatrix& regressor, const Points3& vertices) {
  require(regressor.cols() == vertices.rows(), ErrorCode::Dimension,
          "regressor columns must equal vertex count");
  return regressor * vertices;
}

Points3 rest_joints(const ParametricModel& model, const Points3& shaped_vertices) {
  require(shaped_vertices.rows() == model.num_vertices(), ErrorCode::Dimension,
          "vertex count does not match model");
  return model.joint_regressor.topRows(model.num_joints()) * shaped_vertices;
}

PosedMesh pose_model(const ParametricModel& model, const PoseParams& pose, const Betas& beta) {
  PosedMesh out;
  out.shaped = shape_template(model, beta);
  out.rest_joints = rest_joints(model, out.shaped);
  out.world = forward_kinematics<double>(model.tree, out.rest_joints, pose.global_orient,
                                         local_poses(model, pose));
  const int n = model.num_vertices();
  out.vertices.setZero(n, 3);
  for (int i = 0; i < n; ++i) {
    const Vec3 rest = out.shaped.row(i).transpose();
    Vec3 acc = Vec3::Zero();
    for (SparseMatrix::InnerIterator it(model.skin_weights, i); it; ++it) {
      const int j = static_cast<int>(it.col());
      const RigidTransform& g = out.world[j];
      acc += it.value() * (g.rotation * (rest - out.rest_joints.row(j).transpose()) + g.translation);
    }
    out.vertices.row(i) = acc.transpose();
  }
  return out;
}

Points3 pose_mesh(const ParametricModel& model, const PoseParams& pose, const Betas& beta) {
  return pose_model(model, pose, beta).vertices;
}

RigidTransform skinning_transform(const PosedMesh& posed, int joint) {
  const RigidTransform& g = posed.world.at(joint);
  return {g.rotation, g.translation - g.rotation * posed.rest_joints.row(joint).transpose()};
}

Points3 keypoints(const ParametricModel& model, const Points3& posed_vertices) {
  const Points3 joints = regress_joints(model.joint_regressor, posed_vertices);
  const int tips = static_cast<int>(model.fingertip_vertex_ids[0].size() +
                                    model.fingertip_vertex_ids[1].size());
  Points3 out(joints.rows() + tips, 3);
  out.topRows(joints.rows()) = joints;
  int row = static_cast<int>(joints.rows());
  for (int side = 0; side < 2; ++side) {
    for (int v : model.fingertip_vertex_ids[side]) out.row(row++) = posed_vertices.row(v);
  }
  return out;
}

std::vector<std::string> keypoint_names(const ParametricModel& model) {
  std::vector<std::string> names = model.regressor_names;
  for (int side = 0; side < 2; ++side) {
    for (std::size_t f = 0; f < model.fingertip_vertex_ids[side].size(); ++f) {
      names.push_back(fingertip_name(model, static_cast<HandSide>(side), static_cast<int>(f)));
    }
  }
  return names;
}

int num_keypoints(const ParametricModel& model) {
  return static_cast<int>(model.joint_regressor.rows() + model.fingertip_vertex_ids[0].size() +
                          model.fingertip_vertex_ids[1].size());
}

std::vector<int> hand_keypoint_rows(const ParametricModel& model, HandSide side) {
  std::vector<int> rows = model.hand_joints(side);
  require(!rows.empty(), ErrorCode::InvalidModel, "model declares no hand joints");
  const int s = static_cast<int>(side);
  int first_tip = static_cast<int>(model.joint_regressor.rows());
  if (s == 1) first_tip += static_cast<int>(model.fingertip_vertex_ids[0].size());
  for (std::size_t f = 0; f < model.fingertip_vertex_ids[s].size(); ++f) {
    rows.push_back(first_tip + static_cast<int>(f));
  }
  return rows;
}

std::vector<int> nearest_rest_joint(const ParametricModel& model) {
  const Points3 joints = rest_joints(model, model.template_vertices);
  std::vector<int> nearest(model.num_vertices(), 0);
  for (int i = 0; i < model.num_vertices(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < joints.rows(); ++j) {
      const double d = (model.template_vertices.row(i) - joints.row(j)).squaredNorm();
      if (d < best) {
        best = d;
        nearest[i] = j;
      }
    }
  }
  return nearest;
}

HandSubmodel extract_hand_submodel(const ParametricModel& model, HandSide side) {
  const auto& hand_joints = model.hand_joints(side);
  require(static_cast<int>(hand_joints.size()) == kHandSkeletonJoints, ErrorCode::InvalidModel,
          std::string("model declares no ") + to_string(side) + " hand joints");
  const auto& tips = model.fingertip_vertex_ids[static_cast<int>(side)];
  require(static_cast<int>(tips.size()) == kFingertipsPerHand, ErrorCode::InvalidModel,
          std::string("model declares no ") + to_string(side) + " fingertips");

  // Parent joint -> hand joint slot, -1 outside the hand.
  std::vector<int> joint_slot(model.num_joints(), -1);
  for (int k = 0; k < kHandSkeletonJoints; ++k) joint_slot[hand_joints[k]] = k;

  HandSubmodel hand;
  hand.side = side;
  hand.joint_index_map = hand_joints;

  const std::vector<int> nearest = nearest_rest_joint(model);
  std::vector<int> vertex_slot(model.num_vertices(), -1);
  for (int i = 0; i < model.num_vertices(); ++i) {
    if (joint_slot[nearest[i]] >= 0) {
      vertex_slot[i] = static_cast<int>(hand.vertex_index_map.size());
      hand.vertex_index_map.push_back(i);
    }
  }
  require(!hand.vertex_index_map.empty(), ErrorCode::DegenerateModel,
          "no vertex is closest to a hand joint");
  const int nh = static_cast<int>(hand.vertex_index_map.size());

  ParametricModel& sub = hand.model;
  sub.template_vertices.resize(nh, 3);
  sub.shape_basis.resize(3 * nh, model.num_betas());
  for (int v = 0; v < nh; ++v) {
    const int src = hand.vertex_index_map[v];
    sub.template_vertices.row(v) = model.template_vertices.row(src);
    sub.shape_basis.middleRows(3 * v, 3) = model.shape_basis.middleRows(3 * src, 3);
  }

  std::vector<Eigen::Vector3i> faces;
  for (int f = 0; f < model.faces.rows(); ++f) {
    const Eigen::Vector3i tri = model.faces.row(f).transpose();
    if (vertex_slot[tri[0]] >= 0 && vertex_slot[tri[1]] >= 0 && vertex_slot[tri[2]] >= 0) {
      faces.emplace_back(vertex_slot[tri[0]], vertex_slot[tri[1]], vertex_slot[tri[2]]);
    }
  }
  sub.faces.resize(static_cast<int>(faces.size()), 3);
  for (std::size_t f = 0; f < faces.size(); ++f) sub.faces.row(f) = faces[f].transpose();

  // Skinning weights restricted to hand joints and renormalized. A vertex with no
  // weight left on the hand follows the wrist rigidly.
  std::vector<Eigen::Triplet<double>> weights;
  for (int v = 0; v < nh; ++v) {
    std::vector<std::pair<int, double>> row;
    double sum = 0.0;
    for (SparseMatrix::InnerIterator it(model.skin_weights, hand.vertex_index_map[v]); it; ++it) {
      const int slot = joint_slot[it.col()];
      if (slot >= 0 && it.value() != 0.0) {
        row.emplace_back(slot, it.value());
        sum += it.value();
      }
    }
    if (sum <= 0.0) {
      weights.emplace_back(v, 0, 1.0);
      continue;
    }
    for (const auto& [slot, w] : row) weights.emplace_back(v, slot, w / sum);
  }
  sub.skin_weights.resize(nh, kHandSkeletonJoints);
  sub.skin_weights.setFromTriplets(weights.begin(), weights.end());

  // Wrist and finger rows of the body regressor, then one-hot fingertip rows.
  std::vector<Eigen::Triplet<double>> reg;
  for (int k = 0; k < kHandSkeletonJoints; ++k) {
    double sum = 0.0;
    std::vector<std::pair<int, double>> row;
    for (SparseMatrix::InnerIterator it(model.joint_regressor, hand_joints[k]); it; ++it) {
      const int slot = vertex_slot[it.col()];
      if (slot >= 0) {
        row.emplace_back(slot, it.value());
        sum += it.value();
      }
    }
    require(std::abs(sum) > kRowSumTol, ErrorCode::DegenerateModel,
            "regressor row of hand joint " + model.tree.name(hand_joints[k]) +
                " has no support inside the hand");
    for (const auto& [slot, w] : row) reg.emplace_back(k, slot, w / sum);
  }
  for (int f = 0; f < kFingertipsPerHand; ++f) {
    const int slot = vertex_slot[tips[f]];
    require(slot >= 0, ErrorCode::DegenerateModel, "fingertip vertex lies outside the hand");
    reg.emplace_back(kHandSkeletonJoints + f, slot, 1.0);
  }
  sub.joint_regressor.resize(kHandKeypoints, nh);
  sub.joint_regressor.setFromTriplets(reg.begin(), reg.end());

  std::vector<int> parents(kHandSkeletonJoints, -1);
  std::vector<std::string> names(kHandSkeletonJoints);
  for (int k = 0; k < kHandSkeletonJoints; ++k) {
    names[k] = model.tree.name(hand_joints[k]);
    if (k == 0) continue;
    parents[k] = joint_slot[model.tree.parent(hand_joints[k])];
    require(parents[k] >= 0, ErrorCode::InvalidModel,
            "finger joint " + names[k] + " has a parent outside the hand");
  }
  sub.tree = SkeletonTree(parents, names);
  sub.regressor_names = names;
  for (int f = 0; f < kFingertipsPerHand; ++f) {
    sub.regressor_names.push_back(fingertip_name(model, side, f));
  }
  sub.knuckle_pair = model.knuckle_pair;
  sub.reference_knuckle_length = model.reference_knuckle_length;
  return hand;
}

Points3 regress_hand_joints(const HandSubmodel& hand, const Points3& hand_vertices) {
  require(hand.model.joint_regressor.rows() == kHandKeypoints, ErrorCode::Dimension,
          "hand regressor must have 21 rows");
  return regress_joints(hand.model.joint_regressor, hand_vertices);
}

}  // namespace mocapkit
