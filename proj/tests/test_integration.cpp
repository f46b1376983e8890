#include <doctest.h>

#include "mocapkit/integration.hpp"
#include "mocapkit/toy_model.hpp"
#include "oracles.hpp"

using namespace mocapkit;

namespace {

const ParametricModel& toy() {
  static const ParametricModel model = gen_toy_model(0);
  return model;
}

BodyPrediction identity_body(const ParametricModel& m) {
  BodyPrediction b;
  b.theta = AxisAngles::Zero(static_cast<int>(body_joint_ids(m).size()), 3);
  b.beta = Betas::Zero(m.num_betas());
  return b;
}

HandPrediction identity_hand(HandSide side) {
  HandPrediction h;
  h.side = side;
  h.theta = AxisAngles::Zero(kFingerJointsPerHand, 3);
  h.beta = Betas::Zero(10);
  return h;
}

BodyPrediction random_body(std::mt19937_64& rng, const ParametricModel& m) {
  BodyPrediction b = identity_body(m);
  b.phi = oracle::random_vector(rng, 2.0);
  b.theta = oracle::random_rows(rng, static_cast<int>(b.theta.rows()), 1.0);
  for (int k = 0; k < m.num_betas(); ++k) b.beta[k] = oracle::uniform(rng, -1, 1);
  return b;
}

HandPrediction random_hand(std::mt19937_64& rng, HandSide side) {
  HandPrediction h = identity_hand(side);
  h.phi = oracle::random_vector(rng, 3.0);
  h.theta = oracle::random_rows(rng, kFingerJointsPerHand, 1.0);
  return h;
}

std::vector<RigidTransform> world_of(const ParametricModel& m, const WholeBodyParams& p) {
  const Points3 rest = rest_joints(m, shape_template(m, p.beta));
  return forward_kinematics<double>(m.tree, rest, p.phi, local_poses(m, p.pose()));
}

}  // namespace

TEST_CASE("identity predictions give identity parameters") {
  const ParametricModel& m = toy();
  const WholeBodyParams p = copy_paste(m, identity_body(m), identity_hand(HandSide::Left),
                                       identity_hand(HandSide::Right));
  CHECK(p == WholeBodyParams::zero(m));
}

TEST_CASE("converted wrists reproduce the hand's global orientation") {
  const ParametricModel& m = toy();
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const BodyPrediction body = random_body(rng, m);
    const HandPrediction l = random_hand(rng, HandSide::Left);
    const HandPrediction r = random_hand(rng, HandSide::Right);
    const WholeBodyParams p = copy_paste(m, body, l, r);
    const auto world = world_of(m, p);
    CHECK((world[m.wrist_joint(HandSide::Left)].rotation - oracle::quaternion_rotation(l.phi)).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((world[m.wrist_joint(HandSide::Right)].rotation - oracle::quaternion_rotation(r.phi)).cwiseAbs().maxCoeff() < 1e-6);
    // Fingers copied verbatim.
    const auto fingers = finger_joint_ids(m, HandSide::Right);
    for (int k = 0; k < kFingerJointsPerHand; ++k) CHECK(p.theta.row(fingers[k] - 1) == r.theta.row(k));
    // Non-wrist body joints copied verbatim.
    const auto ids = body_joint_ids(m);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (ids[k] == m.wrist_joint(HandSide::Left) || ids[k] == m.wrist_joint(HandSide::Right)) continue;
      CHECK(p.theta.row(ids[k] - 1) == body.theta.row(static_cast<int>(k)));
    }
  }
}

TEST_CASE("a missing hand keeps the body's wrist and zero fingers") {
  const ParametricModel& m = toy();
  std::mt19937_64 rng(2);
  const BodyPrediction body = random_body(rng, m);
  const HandPrediction l = random_hand(rng, HandSide::Left);
  const WholeBodyParams p = copy_paste(m, body, l, std::nullopt);
  const auto ids = body_joint_ids(m);
  const int rw = m.wrist_joint(HandSide::Right);
  const auto pos = std::find(ids.begin(), ids.end(), rw) - ids.begin();
  CHECK(p.theta.row(rw - 1) == body.theta.row(static_cast<int>(pos)));
  for (int j : finger_joint_ids(m, HandSide::Right)) CHECK(p.theta.row(j - 1).isZero(0));
}

TEST_CASE("wrist conversion can be switched off") {
  const ParametricModel& m = toy();
  std::mt19937_64 rng(3);
  const BodyPrediction body = random_body(rng, m);
  const HandPrediction r = random_hand(rng, HandSide::Right);
  const WholeBodyParams p = copy_paste(m, body, std::nullopt, r, {false});
  const auto ids = body_joint_ids(m);
  const int rw = m.wrist_joint(HandSide::Right);
  const auto pos = std::find(ids.begin(), ids.end(), rw) - ids.begin();
  CHECK(p.theta.row(rw - 1) == body.theta.row(static_cast<int>(pos)));
}

TEST_CASE("hand list overload matches the slot overload and rejects duplicates") {
  const ParametricModel& m = toy();
  std::mt19937_64 rng(4);
  const BodyPrediction body = random_body(rng, m);
  const HandPrediction l = random_hand(rng, HandSide::Left);
  const HandPrediction r = random_hand(rng, HandSide::Right);
  CHECK(copy_paste(m, body, std::vector<HandPrediction>{r, l}) == copy_paste(m, body, l, r));
  CHECK_THROWS_AS(copy_paste(m, body, std::vector<HandPrediction>{r, r}), Error);
  CHECK_THROWS_AS(copy_paste(m, body, r, std::nullopt), Error);
}

TEST_CASE("hand shape and camera are never read") {
  const ParametricModel& m = toy();
  std::mt19937_64 rng(5);
  const BodyPrediction body = random_body(rng, m);
  HandPrediction r = random_hand(rng, HandSide::Right);
  const WholeBodyParams a = copy_paste(m, body, std::nullopt, r);
  r.beta = Betas::Constant(10, 3.0);
  r.cam = {7.0, Vec2(1, 2)};
  CHECK(copy_paste(m, body, std::nullopt, r) == a);
}

TEST_CASE("whole-body parameters decompose and recombine") {
  const ParametricModel& m = toy();
  std::mt19937_64 rng(6);
  WholeBodyParams p = WholeBodyParams::zero(m);
  p.phi = oracle::random_vector(rng, 1.0);
  p.theta = oracle::random_rows(rng, m.num_joints() - 1, 1.0);
  const WholeBodyParams q = copy_paste(m, body_from_whole_body(m, p), hand_from_whole_body(m, p, HandSide::Left),
                                       hand_from_whole_body(m, p, HandSide::Right));
  CHECK((q.theta - p.theta).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("malformed predictions are rejected") {
  const ParametricModel& m = toy();
  BodyPrediction body = identity_body(m);
  body.theta = AxisAngles::Zero(5, 3);
  CHECK_THROWS_AS(copy_paste(m, body, std::nullopt, std::nullopt), Error);
  HandPrediction h = identity_hand(HandSide::Left);
  h.theta = AxisAngles::Zero(14, 3);
  CHECK_THROWS_AS(copy_paste(m, identity_body(m), h, std::nullopt), Error);
}

TEST_CASE("square box examples") {
  Points2 pts(2, 2);
  pts << 10, 10, 20, 30;
  const SquareBox b0 = square_box_around(pts, 0.0);
  CHECK(b0.center == Vec2(15, 20));
  CHECK(b0.size == doctest::Approx(20));
  CHECK(square_box_around(pts, 0.2).size == doctest::Approx(24));
  Points2 single(1, 2);
  single << 5, 6;
  const SquareBox b1 = square_box_around(single, 0.2);
  CHECK(b1.size == kMinBoxSize);
  CHECK(b1.center == Vec2(5, 6));
}

TEST_CASE("hand box contains every projected hand keypoint") {
  const ParametricModel& m = toy();
  std::mt19937_64 rng(7);
  WholeBodyParams p = WholeBodyParams::zero(m);
  p.theta = oracle::random_rows(rng, m.num_joints() - 1, 0.5);
  const WeakPerspectiveCamera cam{80.0, Vec2(100, 120)};
  for (HandSide side : {HandSide::Left, HandSide::Right}) {
    const SquareBox box = hand_bbox_from_body(m, p, cam, side, 0.2);
    const Points3 kp = keypoints(m, pose_mesh(m, p.pose(), p.beta));
    for (int row : hand_keypoint_rows(m, side)) {
      const Vec2 q = project(cam, Vec3(kp.row(row).transpose()));
      CHECK((q.array() >= box.min_corner().array()).all());
      CHECK((q.array() <= box.max_corner().array()).all());
    }
  }
}
