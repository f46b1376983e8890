#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mocapkit/common.hpp"
#include "mocapkit/kinematics.hpp"

namespace mocapkit {

enum class HandSide { Left = 0, Right = 1 };

inline constexpr int kFingerJointsPerHand = 15;
inline constexpr int kHandSkeletonJoints = 16;  // wrist + 15 finger joints
inline constexpr int kFingertipsPerHand = 5;
inline constexpr int kHandKeypoints = 21;       // skeleton joints + fingertips

const char* to_string(HandSide side);
HandSide hand_side_from_string(const std::string& s);

using Betas = Eigen::VectorXd;

// Shape blendshapes + linear blend skinning mesh model.
//
// The first tree.size() rows of the joint regressor give the skeleton's rest
// joints; extra rows (fingertips of a hand submodel) are keypoints only.
struct ParametricModel {
  Points3 template_vertices;        // (N, 3)
  Triangles faces;                  // (F, 3)
  Eigen::MatrixXd shape_basis;      // (3N, B), column k is a row-major (N, 3) displacement
  SparseMatrix skin_weights;        // (N, J)
  SparseMatrix joint_regressor;     // (R, N), R >= J
  std::vector<std::string> regressor_names;  // R entries
  SkeletonTree tree;

  // Indexed by HandSide. Empty for models without hands.
  std::array<std::vector<int>, 2> fingertip_vertex_ids;  // 5 per side
  std::array<std::vector<int>, 2> hand_joint_ids;        // wrist + 15 finger joints per side

  // Middle-finger knuckle bone in the 21-keypoint hand layout, and its length at rest.
  std::array<int, 2> knuckle_pair{4, 5};
  double reference_knuckle_length = 0.0;

  int num_vertices() const { return static_cast<int>(template_vertices.rows()); }
  int num_joints() const { return tree.size(); }
  int num_betas() const { return static_cast<int>(shape_basis.cols()); }
  bool has_hands() const { return !hand_joint_ids[0].empty() && !hand_joint_ids[1].empty(); }

  const std::vector<int>& hand_joints(HandSide side) const {
    return hand_joint_ids[static_cast<int>(side)];
  }
  int wrist_joint(HandSide side) const { return hand_joints(side).at(0); }

  // Throws InvalidModel when any structural invariant is broken.
  void validate() const;
};

// Global orientation plus one local axis-angle per non-root joint, ordered by
// joint index (row i is joint i + 1).
struct PoseParams {
  AxisAngle global_orient = AxisAngle::Zero();
  AxisAngles joint_poses;

  static PoseParams zero(const ParametricModel& model);
};

// Per-joint local rotations for forward_kinematics (root row left at zero).
AxisAngles local_poses(const ParametricModel& model, const PoseParams& pose);

// Non-root joints that are not finger joints of either hand (wrists included).
std::vector<int> body_joint_ids(const ParametricModel& model);
// The 15 finger joints of one hand, in skeleton order.
std::vector<int> finger_joint_ids(const ParametricModel& model, HandSide side);

Points3 shape_template(const ParametricModel& model, const Betas& beta);

Points3 regress_joints(const SparseMatrix& regressor, const Points3& vertices);

// Rest joints of the skeleton for a shaped mesh.
Points3 rest_joints(const ParametricModel& model, const Points3& shaped_vertices);

struct PosedMesh {
  Points3 shaped;                     // template after shape blendshapes
  Points3 rest_joints;                // skeleton joints of the shaped template
  std::vector<RigidTransform> world;  // per joint, translation = posed joint position
  Points3 vertices;                   // skinned vertices
};

PosedMesh pose_model(const ParametricModel& model, const PoseParams& pose, const Betas& beta);
Points3 pose_mesh(const ParametricModel& model, const PoseParams& pose, const Betas& beta);

// Skinning transform of a joint: rest position -> posed position for a vertex
// rigidly attached to that joint.
RigidTransform skinning_transform(const PosedMesh& posed, int joint);

// Regressor rows followed by the fingertip vertices (left, then right).
Points3 keypoints(const ParametricModel& model, const Points3& posed_vertices);
std::vector<std::string> keypoint_names(const ParametricModel& model);
int num_keypoints(const ParametricModel& model);
// Rows of keypoints() belonging to one hand: wrist, 15 finger joints, 5 tips.
std::vector<int> hand_keypoint_rows(const ParametricModel& model, HandSide side);

struct HandSubmodel {
  HandSide side = HandSide::Right;
  ParametricModel model;              // rooted at the wrist, 21-row regressor
  std::vector<int> vertex_index_map;  // submodel vertex -> parent vertex, ascending
  std::vector<int> joint_index_map;   // submodel joint -> parent joint
};

// Index of the rest joint closest to each vertex of the unshaped template. Ties
// go to the lower joint index.
std::vector<int> nearest_rest_joint(const ParametricModel& model);

HandSubmodel extract_hand_submodel(const ParametricModel& model, HandSide side);

// 21 hand keypoints: wrist, 15 finger joints, 5 fingertips.
Points3 regress_hand_joints(const HandSubmodel& hand, const Points3& hand_vertices);

}  // namespace mocapkit
