#pragma once

#include <optional>
#include <vector>

#include "mocapkit/camera.hpp"
#include "mocapkit/model.hpp"

namespace mocapkit {

// Output of the body regressor. theta_b holds one row per body joint
// (body_joint_ids order, wrists included).
struct BodyPrediction {
  AxisAngle phi = AxisAngle::Zero();
  AxisAngles theta;
  Betas beta;
  WeakPerspectiveCamera cam;
};

// Output of the hand regressor, already expressed in the model's space (left
// hands flipped back). phi is the global hand orientation; theta holds the 15
// finger joints in skeleton order.
struct HandPrediction {
  HandSide side = HandSide::Right;
  AxisAngle phi = AxisAngle::Zero();
  AxisAngles theta;
  Betas beta;
  WeakPerspectiveCamera cam;
};

struct WholeBodyParams {
  AxisAngle phi = AxisAngle::Zero();
  AxisAngles theta;  // one row per non-root joint, joint order
  Betas beta;
  WeakPerspectiveCamera cam;

  static WholeBodyParams zero(const ParametricModel& model);
  PoseParams pose() const { return {phi, theta}; }
};

bool operator==(const WholeBodyParams& a, const WholeBodyParams& b);

struct CopyPasteOptions {
  // When false the hand's global orientation is ignored and the body's wrist
  // angles are kept; this seeds the optimization-based integration.
  bool convert_wrist = true;
};

// Copy-and-paste fusion. Body angles, shape and camera come from the body;
// finger angles from each present hand; a present hand's wrist gets the local
// angle that reproduces the hand's global orientation under forward kinematics.
// A missing hand keeps the body's wrist angle and zeroes that hand's fingers.
// Hand shape and camera are never read.
WholeBodyParams copy_paste(const ParametricModel& model, const BodyPrediction& body,
                           const std::optional<HandPrediction>& left,
                           const std::optional<HandPrediction>& right,
                           const CopyPasteOptions& options = {});

// Same fusion from an unordered list of hand predictions; two hands of the same
// side are an input error.
WholeBodyParams copy_paste(const ParametricModel& model, const BodyPrediction& body,
                           const std::vector<HandPrediction>& hands,
                           const CopyPasteOptions& options = {});

// Inverse direction of the fusion, used to re-derive hand-module style outputs
// from whole-body parameters: global hand orientation via forward kinematics.
HandPrediction hand_from_whole_body(const ParametricModel& model, const WholeBodyParams& params,
                                    HandSide side);
BodyPrediction body_from_whole_body(const ParametricModel& model, const WholeBodyParams& params);

struct SquareBox {
  Vec2 center = Vec2::Zero();
  double size = 1.0;

  Vec2 min_corner() const { return center.array() - 0.5 * size; }
  Vec2 max_corner() const { return center.array() + 0.5 * size; }
};

inline constexpr double kMinBoxSize = 1.0;

// Square box centered on the 2D bounding box of the points, side equal to the
// larger extent grown by margin_ratio, never smaller than one pixel.
SquareBox square_box_around(const Points2& points, double margin_ratio);

SquareBox hand_bbox_from_body(const ParametricModel& model, const WholeBodyParams& params,
                              const WeakPerspectiveCamera& cam, HandSide side,
                              double margin_ratio = 0.2);

}  // namespace mocapkit
