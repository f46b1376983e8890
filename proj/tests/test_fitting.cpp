#include <doctest.h>

#include <algorithm>

#include "mocapkit/fitting.hpp"
#include "mocapkit/toy_model.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

using namespace mocapkit;

namespace {

const ParametricModel& toy() {
  static const ParametricModel model = gen_toy_model(0);
  return model;
}

double relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-12);
}

}  // namespace

TEST_CASE("reprojection cost examples") {
  const ParametricModel& m = toy();
  std::mt19937_64 rng(1);
  const WholeBodyParams p = synthetic::random_truth(m, rng);
  KeypointSet2D kp = synthetic::render(m, p, rng, 0.0);
  CHECK(reprojection_cost(m, p, p.cam, kp) == 0.0);
  kp.points.row(7) += Eigen::RowVector2d(3, 4);
  CHECK(reprojection_cost(m, p, p.cam, kp) == doctest::Approx(25.0).epsilon(1e-12));
  kp.points.row(7) += Eigen::RowVector2d(1e4, -3e4);
  kp.confidence[7] = 0.0;
  CHECK(reprojection_cost(m, p, p.cam, kp) == doctest::Approx(0.0));
  CHECK(reprojection_rms(m, p, p.cam, kp) == doctest::Approx(0.0));
}

TEST_CASE("prior cost examples") {
  const ParametricModel& m = toy();
  const WholeBodyParams anchor = WholeBodyParams::zero(m);
  FitConfig config;
  CHECK(prior_cost(anchor, anchor, config) == 0.0);
  WholeBodyParams p = anchor;
  p.theta.row(3) << 0.06, 0.0, 0.08;
  config.weight_prior_pose = 1.0;
  CHECK(prior_cost(p, anchor, config) == doctest::Approx(0.01).epsilon(1e-12));
  WholeBodyParams q = anchor;
  q.beta[0] = 1.0;
  config.weight_prior_shape = 2.0;
  CHECK(prior_cost(q, anchor, config) == doctest::Approx(2.0));
}

TEST_CASE("flatten and unflatten are inverse") {
  const ParametricModel& m = toy();
  std::mt19937_64 rng(2);
  const WholeBodyParams p = synthetic::random_truth(m, rng);
  const FitProblem problem(m, synthetic::render(m, p, rng, 0), p, FitConfig{});
  CHECK(problem.num_params() == 3 + 3 * 51 + 10 + 3);
  CHECK(problem.unflatten(problem.flatten(p)) == p);
}

TEST_CASE("masks select parameter blocks") {
  const ParametricModel& m = toy();
  std::mt19937_64 rng(3);
  const WholeBodyParams p = synthetic::random_truth(m, rng);
  const KeypointSet2D kp = synthetic::render(m, p, rng, 0);
  FitConfig config;
  config.mask = FitMask::wrists_only();
  const auto wrists = FitProblem(m, kp, p, config).free_indices();
  std::vector<int> expected;
  for (HandSide side : {HandSide::Left, HandSide::Right}) {
    const int base = 3 + 3 * (m.wrist_joint(side) - 1);
    for (int a = 0; a < 3; ++a) expected.push_back(base + a);
  }
  std::sort(expected.begin(), expected.end());
  CHECK(wrists == expected);
  config.mask = FitMask::all();
  CHECK(static_cast<int>(FitProblem(m, kp, p, config).free_indices().size()) == FitProblem(m, kp, p, config).num_params());
  config.mask = FitMask{};
  // Default: everything except fingers (30 joints) and shape.
  CHECK(static_cast<int>(FitProblem(m, kp, p, config).free_indices().size()) == 3 + 3 * 21 + 3);
}

TEST_CASE("analytic jacobian agrees with central differences") {
  const ParametricModel& m = toy();
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const WholeBodyParams p = synthetic::random_truth(m, rng);
    WholeBodyParams anchor = p;
    anchor.theta = oracle::random_rows(rng, m.num_joints() - 1, 0.3);
    KeypointSet2D kp = synthetic::render(m, p, rng, 2.0);
    for (int k = 0; k < kp.size(); ++k) kp.confidence[k] = oracle::uniform(rng, 0, 1);
    FitConfig config;
    config.mask = FitMask::all();
    const FitProblem problem(m, kp, anchor, config);
    const Eigen::MatrixXd analytic = problem.jacobian(p);
    const Eigen::MatrixXd numeric = problem.jacobian_central_difference(p, 1e-6);
    CHECK(analytic.rows() == problem.num_residuals());
    CHECK(relative_error(analytic, numeric) < 1e-6);
  }
}

TEST_CASE("fitting from the truth changes nothing") {
  const ParametricModel& m = toy();
  std::mt19937_64 rng(5);
  WholeBodyParams truth = synthetic::random_truth(m, rng);
  truth.beta.setZero();
  const KeypointSet2D kp = synthetic::render(m, truth, rng, 0.0);
  const FitResult r = fit(m, truth, truth.cam, kp);
  CHECK(r.initial_cost == 0.0);
  CHECK(r.params == truth);
  CHECK(r.cost_trace.size() == 20u);
  CHECK(r.rms_px == 0.0);
}

TEST_CASE("wrist-only fit recovers perturbed wrists") {
  const ParametricModel& m = toy();
  const synthetic::Scenario s = synthetic::make(m, 6, 0.0, 0.3, 0);
  FitConfig config;
  config.mask = FitMask::wrists_only();
  const FitResult r = fit(m, s.init, s.truth.cam, s.keypoints, config);
  CHECK(r.rms_px < 0.5);
  CHECK(r.cost_trace.size() == 20u);
  for (std::size_t k = 1; k < r.cost_trace.size(); ++k) CHECK(r.cost_trace[k] <= r.cost_trace[k - 1]);
  CHECK(r.cost_trace.front() <= r.initial_cost);
}

TEST_CASE("default fit recovers wrists and body joints") {
  const ParametricModel& m = toy();
  const synthetic::Scenario s = synthetic::make(m, 7, 0.0);
  const FitResult r = fit(m, s.init, s.truth.cam, s.keypoints);
  CHECK(r.rms_px < 0.5);
}

TEST_CASE("central-difference fitting converges like the analytic one") {
  const ParametricModel& m = toy();
  const synthetic::Scenario s = synthetic::make(m, 8, 0.0, 0.3, 0);
  FitConfig config;
  config.mask = FitMask::wrists_only();
  config.jacobian = JacobianMode::CentralDifference;
  config.iterations = 10;
  CHECK(fit(m, s.init, s.truth.cam, s.keypoints, config).rms_px < 0.5);
}

TEST_CASE("fit error conditions") {
  const ParametricModel& m = toy();
  const synthetic::Scenario s = synthetic::make(m, 9, 0.0);
  KeypointSet2D none = s.keypoints;
  none.confidence.setZero();
  try {
    fit(m, s.init, s.truth.cam, none);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Unconstrained);
  }
  KeypointSet2D huge = s.keypoints;
  huge.points.setConstant(1e200);
  try {
    fit(m, s.init, s.truth.cam, huge);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Numeric);
  }
  KeypointSet2D short_set = s.keypoints;
  short_set.points.conservativeResize(10, 2);
  short_set.confidence.conservativeResize(10);
  CHECK_THROWS_AS(fit(m, s.init, s.truth.cam, short_set), Error);
  FitConfig bad;
  bad.iterations = 0;
  CHECK_THROWS_AS(fit(m, s.init, s.truth.cam, s.keypoints, bad), Error);
}

TEST_CASE("smoothing keeps constant sequences exactly") {
  std::mt19937_64 rng(10);
  for (int len : {1, 2, 3, 4, 5, 9}) {
    Eigen::VectorXd x(4);
    x << 0.1, -3.7, 1e5, 1.0 / 3.0;
    const std::vector<Eigen::VectorXd> seq(len, x);
    for (const auto& y : temporal_smooth(seq)) CHECK(y == x);
  }
}

TEST_CASE("smoothing weights at the boundary are renormalized") {
  std::vector<Eigen::VectorXd> seq(6, Eigen::VectorXd::Zero(1));
  seq[0][0] = 1.0;
  const auto out = temporal_smooth(seq);
  CHECK(out[0][0] == doctest::Approx(0.5 / 0.8).epsilon(1e-15));
  for (int count = 1; count <= 6; ++count) {
    for (int t = 0; t < count; ++t) {
      const auto w = smoothing_weights(t, count);
      double sum = 0;
      for (double v : w) sum += v;
      CHECK(std::abs(sum - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("interior smoothing is a symmetric weighted average") {
  std::vector<Eigen::VectorXd> impulse(9, Eigen::VectorXd::Zero(1));
  impulse[4][0] = 1.0;
  const auto out = temporal_smooth(impulse);
  const double total = 0.1 + 0.2 + 0.5 + 0.2 + 0.1;
  for (int k = 0; k < 5; ++k) CHECK(out[2 + k][0] == doctest::Approx(kSmoothingKernel[4 - k] / total).epsilon(1e-14));
  // Linear ramps pass through interior frames unchanged.
  std::vector<Eigen::VectorXd> ramp;
  for (int t = 0; t < 9; ++t) ramp.push_back(Eigen::VectorXd::Constant(1, 2.0 * t - 3.0));
  const auto smoothed = temporal_smooth(ramp);
  for (int t = 2; t < 7; ++t) CHECK(smoothed[t][0] == doctest::Approx(ramp[t][0]).epsilon(1e-14));
}

TEST_CASE("smoothing whole-body parameter sequences") {
  const ParametricModel& m = toy();
  std::mt19937_64 rng(11);
  std::vector<WholeBodyParams> seq;
  for (int t = 0; t < 5; ++t) seq.push_back(synthetic::random_truth(m, rng));
  const auto out = temporal_smooth(seq);
  const auto w = smoothing_weights(2, 5);
  double expected = 0;
  for (int k = 0; k < 5; ++k) expected += w[k] * seq[k].theta(10, 1);
  CHECK(out[2].theta(10, 1) == doctest::Approx(expected).epsilon(1e-13));
  CHECK(out[2].cam.scale > 0.0);
  CHECK_THROWS_AS(temporal_smooth(std::vector<WholeBodyParams>{}), Error);
}
