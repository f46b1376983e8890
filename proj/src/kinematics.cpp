#include "mocapkit/kinematics.hpp"

namespace mocapkit {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::Dimension: return "dimension";
    case ErrorCode::InvalidRotation: return "invalid_rotation";
    case ErrorCode::InvalidJoint: return "invalid_joint";
    case ErrorCode::InvalidModel: return "invalid_model";
    case ErrorCode::DegenerateModel: return "degenerate_model";
    case ErrorCode::DegenerateKeypoints: return "degenerate_keypoints";
    case ErrorCode::Input: return "input";
    case ErrorCode::Unconstrained: return "unconstrained";
    case ErrorCode::Numeric: return "numeric";
    case ErrorCode::Schema: return "schema";
    case ErrorCode::Io: return "io";
  }
  return "unknown";
}

SkeletonTree::SkeletonTree(std::vector<int> parents, std::vector<std::string> names)
    : parents_(std::move(parents)), names_(std::move(names)) {
  require(!parents_.empty(), ErrorCode::InvalidModel, "skeleton has no joints");
  if (names_.empty()) {
    for (std::size_t j = 0; j < parents_.size(); ++j) names_.push_back("joint" + std::to_string(j));
  }
  require(names_.size() == parents_.size(), ErrorCode::InvalidModel,
          "skeleton joint names do not match parent count");
  require(parents_[0] == -1, ErrorCode::InvalidModel, "joint 0 must be the root");
  for (int j = 1; j < size(); ++j) {
    require(parents_[j] >= 0 && parents_[j] < j, ErrorCode::InvalidModel,
            "joint " + std::to_string(j) + " must have a parent with a smaller index");
  }
}

int SkeletonTree::index_of(const std::string& name) const {
  for (int j = 0; j < size(); ++j) {
    if (names_[j] == name) return j;
  }
  return -1;
}

bool SkeletonTree::is_ancestor_or_self(int ancestor, int joint) const {
  // Parents precede children, so the walk can stop once it passes below `ancestor`.
  while (joint > ancestor) joint = parents_[joint];
  return joint == ancestor;
}

int SkeletonTree::depth(int joint) const {
  int d = 0;
  while (parents_[joint] >= 0) {
    joint = parents_[joint];
    ++d;
  }
  return d;
}

AxisAngle gamma_global_to_local(const SkeletonTree& tree, const AxisAngles& rest_joints,
                                const AxisAngle& global_orient, const AxisAngles& local_poses,
                                int target_joint, const Rotation& target_global) {
  require(target_joint > 0 && target_joint < tree.size(), ErrorCode::InvalidJoint,
          "gamma_global_to_local: target joint must be a non-root joint");
  const auto world = forward_kinematics<double>(tree, rest_joints, global_orient, local_poses);
  const Rotation& parent_world = world[tree.parent(target_joint)].rotation;
  return rotation_to_axis_angle<double>(parent_world.transpose() * target_global);
}

}  // namespace mocapkit
