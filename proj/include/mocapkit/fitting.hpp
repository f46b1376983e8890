#pragma once

#include <array>
#include <vector>

#include <Eigen/Core>

#include "mocapkit/integration.hpp"

namespace mocapkit {

// Detected 2D keypoints in the model's keypoint layout (keypoint_names()).
struct KeypointSet2D {
  Points2 points;             // px
  Eigen::VectorXd confidence; // in [0, 1]

  int size() const { return static_cast<int>(points.rows()); }
};

// Which parameter blocks the optimizer may move. Wrists are split from the rest
// of the body pose so they can be freed independently.
struct FitMask {
  bool global_orient = true;
  bool body_pose = true;  // body joints except wrists
  bool wrists = true;
  bool fingers = false;
  bool shape = false;
  bool camera = true;

  static FitMask wrists_only() { return {false, false, true, false, false, false}; }
  static FitMask all() { return {true, true, true, true, true, true}; }
};

enum class JacobianMode { Analytic, CentralDifference };

struct FitConfig {
  int iterations = 20;
  double weight_2d = 1.0;
  double weight_prior_pose = 1e-2;
  double weight_prior_shape = 1e-1;
  FitMask mask;

  JacobianMode jacobian = JacobianMode::Analytic;
  double fd_step = 1e-6;

  // Levenberg-Marquardt damping schedule.
  double initial_damping = 1e-3;
  double damping_increase = 10.0;
  double damping_decrease = 0.3;
  int max_retries = 12;

  void validate() const;
};

struct FitResult {
  WholeBodyParams params;
  double initial_cost = 0.0;
  std::vector<double> cost_trace;  // one entry per accepted iteration
  double rms_px = 0.0;             // over keypoints with nonzero confidence
};

// Sum over keypoints of confidence * squared pixel distance.
double reprojection_cost(const ParametricModel& model, const WholeBodyParams& params,
                         const WeakPerspectiveCamera& cam, const KeypointSet2D& kp);

// Quadratic anchor prior on pose and a shrinkage prior on shape.
double prior_cost(const WholeBodyParams& params, const WholeBodyParams& anchor,
                  const FitConfig& config);

// Root-mean-square pixel error over keypoints with nonzero confidence.
double reprojection_rms(const ParametricModel& model, const WholeBodyParams& params,
                        const WeakPerspectiveCamera& cam, const KeypointSet2D& kp);

// Stacked residual of weight_2d * reprojection_cost + prior_cost, so that its
// squared norm is the objective. Parameters are flattened as
// [phi(3), theta(3(J-1)), beta(B), scale, tx, ty].
class FitProblem {
 public:
  FitProblem(const ParametricModel& model, const KeypointSet2D& kp, const WholeBodyParams& anchor,
             const FitConfig& config);

  int num_params() const { return num_params_; }
  int num_residuals() const { return num_residuals_; }

  Eigen::VectorXd flatten(const WholeBodyParams& params) const;
  WholeBodyParams unflatten(const Eigen::VectorXd& x) const;

  Eigen::VectorXd residuals(const WholeBodyParams& params) const;
  // Derivative of residuals() with respect to every flattened parameter.
  Eigen::MatrixXd jacobian(const WholeBodyParams& params) const;
  Eigen::MatrixXd jacobian_central_difference(const WholeBodyParams& params, double step) const;

  // Flattened indices the mask leaves free, ascending.
  std::vector<int> free_indices() const;

 private:
  const ParametricModel& model_;
  KeypointSet2D kp_;
  WholeBodyParams anchor_;
  FitConfig config_;
  SparseMatrix keypoint_map_;  // keypoints = keypoint_map_ * posed vertices
  Eigen::VectorXd sqrt_weights_;
  int num_params_ = 0;
  int num_residuals_ = 0;
};

// Levenberg-Marquardt on the stacked residual, seeded from init with cam_init.
// The anchor of the pose prior is the initialization.
FitResult fit(const ParametricModel& model, const WholeBodyParams& init,
              const WeakPerspectiveCamera& cam_init, const KeypointSet2D& kp,
              const FitConfig& config = {});

inline constexpr std::array<double, 5> kSmoothingKernel = {0.1, 0.2, 0.5, 0.2, 0.1};

// Normalized weights applied to frames [frame - 2, frame + 2] of a sequence of
// `count` frames; out-of-range taps are dropped and the rest renormalized.
std::array<double, 5> smoothing_weights(int frame, int count);

// Per-dimension weighted average over a 5-frame window.
std::vector<Eigen::VectorXd> temporal_smooth(const std::vector<Eigen::VectorXd>& sequence);
std::vector<WholeBodyParams> temporal_smooth(const std::vector<WholeBodyParams>& sequence);

}  // namespace mocapkit
