#include "mocapkit/integration.hpp"

#include <algorithm>

namespace mocapkit {

namespace {

void check_hand(const ParametricModel& model, const HandPrediction& hand) {
  require(hand.theta.rows() == kFingerJointsPerHand, ErrorCode::Dimension,
          std::string(to_string(hand.side)) + " hand prediction needs 15 finger rotations");
  require(hand.phi.allFinite() && hand.theta.allFinite(), ErrorCode::Input,
          "hand prediction has non-finite rotations");
  require(model.has_hands(), ErrorCode::InvalidModel, "model declares no hands");
}

}  // namespace

WholeBodyParams WholeBodyParams::zero(const ParametricModel& model) {
  WholeBodyParams p;
  p.theta = AxisAngles::Zero(model.num_joints() - 1, 3);
  p.beta = Betas::Zero(model.num_betas());
  return p;
}

bool operator==(const WholeBodyParams& a, const WholeBodyParams& b) {
  return a.phi == b.phi && a.theta.rows() == b.theta.rows() && a.theta == b.theta &&
         a.beta.size() == b.beta.size() && a.beta == b.beta && a.cam.scale == b.cam.scale &&
         a.cam.translation == b.cam.translation;
}

WholeBodyParams copy_paste(const ParametricModel& model, const BodyPrediction& body,
                           const std::optional<HandPrediction>& left,
                           const std::optional<HandPrediction>& right,
                           const CopyPasteOptions& options) {
  const std::vector<int> body_ids = body_joint_ids(model);
  require(body.theta.rows() == static_cast<int>(body_ids.size()), ErrorCode::Dimension,
          "body prediction needs " + std::to_string(body_ids.size()) + " joint rotations");
  require(body.beta.size() == model.num_betas(), ErrorCode::Dimension,
          "body prediction shape size does not match model");
  require(body.phi.allFinite() && body.theta.allFinite() && body.beta.allFinite(),
          ErrorCode::Input, "body prediction has non-finite parameters");
  require(!left || left->side == HandSide::Left, ErrorCode::Input,
          "left slot holds a right-hand prediction");
  require(!right || right->side == HandSide::Right, ErrorCode::Input,
          "right slot holds a left-hand prediction");

  WholeBodyParams out = WholeBodyParams::zero(model);
  out.phi = body.phi;
  out.beta = body.beta;
  out.cam = body.cam;
  for (std::size_t k = 0; k < body_ids.size(); ++k) {
    out.theta.row(body_ids[k] - 1) = body.theta.row(static_cast<int>(k));
  }

  const std::optional<HandPrediction>* hands[2] = {&left, &right};
  for (const auto* hand : hands) {
    if (!hand->has_value()) continue;
    check_hand(model, **hand);
    const std::vector<int> fingers = finger_joint_ids(model, (*hand)->side);
    for (int k = 0; k < kFingerJointsPerHand; ++k) {
      out.theta.row(fingers[k] - 1) = (*hand)->theta.row(k);
    }
  }
  if (!options.convert_wrist) return out;

  // The wrist's ancestors are body joints, already final at this point.
  const Points3 rest = rest_joints(model, shape_template(model, out.beta));
  const AxisAngles local = local_poses(model, out.pose());
  for (const auto* hand : hands) {
    if (!hand->has_value()) continue;
    const int wrist = model.wrist_joint((*hand)->side);
    out.theta.row(wrist - 1) =
        gamma_global_to_local(model.tree, rest, out.phi, local, wrist, rodrigues<double>((*hand)->phi))
            .transpose();
  }
  return out;
}

WholeBodyParams copy_paste(const ParametricModel& model, const BodyPrediction& body,
                           const std::vector<HandPrediction>& hands,
                           const CopyPasteOptions& options) {
  std::optional<HandPrediction> slots[2];
  for (const auto& hand : hands) {
    auto& slot = slots[static_cast<int>(hand.side)];
    require(!slot.has_value(), ErrorCode::Input,
            std::string("two ") + to_string(hand.side) + " hand predictions for one frame");
    slot = hand;
  }
  return copy_paste(model, body, slots[0], slots[1], options);
}

HandPrediction hand_from_whole_body(const ParametricModel& model, const WholeBodyParams& params,
                                    HandSide side) {
  HandPrediction hand;
  hand.side = side;
  const std::vector<int> fingers = finger_joint_ids(model, side);
  hand.theta.resize(kFingerJointsPerHand, 3);
  for (int k = 0; k < kFingerJointsPerHand; ++k) hand.theta.row(k) = params.theta.row(fingers[k] - 1);
  const Points3 rest = rest_joints(model, shape_template(model, params.beta));
  const auto world =
      forward_kinematics<double>(model.tree, rest, params.phi, local_poses(model, params.pose()));
  hand.phi = rotation_to_axis_angle<double>(world[model.wrist_joint(side)].rotation);
  hand.beta = params.beta;
  hand.cam = params.cam;
  return hand;
}

BodyPrediction body_from_whole_body(const ParametricModel& model, const WholeBodyParams& params) {
  BodyPrediction body;
  const std::vector<int> ids = body_joint_ids(model);
  body.phi = params.phi;
  body.theta.resize(static_cast<int>(ids.size()), 3);
  for (std::size_t k = 0; k < ids.size(); ++k) body.theta.row(static_cast<int>(k)) = params.theta.row(ids[k] - 1);
  body.beta = params.beta;
  body.cam = params.cam;
  return body;
}

SquareBox square_box_around(const Points2& points, double margin_ratio) {
  require(points.rows() > 0, ErrorCode::Input, "cannot box an empty point set");
  require(margin_ratio >= 0.0 && std::isfinite(margin_ratio), ErrorCode::Input,
          "margin ratio must be finite and nonnegative");
  const Vec2 lo = points.colwise().minCoeff().transpose();
  const Vec2 hi = points.colwise().maxCoeff().transpose();
  SquareBox box;
  box.center = 0.5 * (lo + hi);
  box.size = std::max((hi - lo).maxCoeff() * (1.0 + margin_ratio), kMinBoxSize);
  return box;
}

SquareBox hand_bbox_from_body(const ParametricModel& model, const WholeBodyParams& params,
                              const WeakPerspectiveCamera& cam, HandSide side,
                              double margin_ratio) {
  const Points3 all = keypoints(model, pose_mesh(model, params.pose(), params.beta));
  const std::vector<int> rows = hand_keypoint_rows(model, side);
  Points3 hand(static_cast<int>(rows.size()), 3);
  for (std::size_t k = 0; k < rows.size(); ++k) hand.row(static_cast<int>(k)) = all.row(rows[k]);
  return square_box_around(project(cam, hand), margin_ratio);
}

}  // namespace mocapkit
