#include "mocapkit/fitting.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

namespace mocapkit {

namespace {

SparseMatrix build_keypoint_map(const ParametricModel& model) {
  std::vector<Eigen::Triplet<double>> entries;
  const SparseMatrix& reg = model.joint_regressor;
  for (int r = 0; r < reg.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(reg, r); it; ++it) entries.emplace_back(r, it.col(), it.value());
  }
  int row = static_cast<int>(reg.rows());
  for (int side = 0; side < 2; ++side) {
    for (int v : model.fingertip_vertex_ids[side]) entries.emplace_back(row++, v, 1.0);
  }
  SparseMatrix map(row, model.num_vertices());
  map.setFromTriplets(entries.begin(), entries.end());
  return map;
}

void check_keypoints(const ParametricModel& model, const KeypointSet2D& kp) {
  require(kp.size() == num_keypoints(model) && kp.confidence.size() == kp.size(),
          ErrorCode::Dimension,
          "keypoint set has " + std::to_string(kp.size()) + " points, model layout has " +
              std::to_string(num_keypoints(model)));
  require(kp.points.allFinite(), ErrorCode::Input, "keypoints must be finite");
  require((kp.confidence.array() >= 0.0).all() && (kp.confidence.array() <= 1.0).all(),
          ErrorCode::Input, "keypoint confidences must lie in [0, 1]");
}

void canonicalize_rotations(WholeBodyParams& p) {
  p.phi = canonicalize<double>(p.phi);
  for (int r = 0; r < p.theta.rows(); ++r) {
    p.theta.row(r) = canonicalize<double>(p.theta.row(r).transpose()).transpose();
  }
}

}  // namespace

void FitConfig::validate() const {
  require(iterations >= 1, ErrorCode::Input, "fit needs at least one iteration");
  require(weight_2d >= 0.0 && weight_prior_pose >= 0.0 && weight_prior_shape >= 0.0,
          ErrorCode::Input, "fit weights must be nonnegative");
  require(std::isfinite(weight_2d) && std::isfinite(weight_prior_pose) &&
              std::isfinite(weight_prior_shape),
          ErrorCode::Input, "fit weights must be finite");
  require(fd_step > 0.0 && initial_damping > 0.0 && damping_increase > 1.0 &&
              damping_decrease > 0.0 && damping_decrease < 1.0 && max_retries >= 1,
          ErrorCode::Input, "invalid damping schedule");
}

double reprojection_cost(const ParametricModel& model, const WholeBodyParams& params,
                         const WeakPerspectiveCamera& cam, const KeypointSet2D& kp) {
  check_keypoints(model, kp);
  const Points2 projected = project(cam, keypoints(model, pose_mesh(model, params.pose(), params.beta)));
  double cost = 0.0;
  for (int k = 0; k < kp.size(); ++k) {
    if (kp.confidence[k] == 0.0) continue;
    cost += kp.confidence[k] * (projected.row(k) - kp.points.row(k)).squaredNorm();
  }
  return cost;
}

double prior_cost(const WholeBodyParams& params, const WholeBodyParams& anchor,
                  const FitConfig& config) {
  require(params.theta.rows() == anchor.theta.rows(), ErrorCode::Dimension,
          "anchor pose layout does not match");
  return config.weight_prior_pose * (params.theta - anchor.theta).squaredNorm() +
         config.weight_prior_shape * params.beta.squaredNorm();
}

double reprojection_rms(const ParametricModel& model, const WholeBodyParams& params,
                        const WeakPerspectiveCamera& cam, const KeypointSet2D& kp) {
  check_keypoints(model, kp);
  const Points2 projected = project(cam, keypoints(model, pose_mesh(model, params.pose(), params.beta)));
  double sum = 0.0;
  int count = 0;
  for (int k = 0; k < kp.size(); ++k) {
    if (kp.confidence[k] <= 0.0) continue;
    sum += (projected.row(k) - kp.points.row(k)).squaredNorm();
    ++count;
  }
  require(count > 0, ErrorCode::Unconstrained, "no keypoint has nonzero confidence");
  return std::sqrt(sum / count);
}

FitProblem::FitProblem(const ParametricModel& model, const KeypointSet2D& kp,
                       const WholeBodyParams& anchor, const FitConfig& config)
    : model_(model), kp_(kp), anchor_(anchor), config_(config) {
  check_keypoints(model, kp);
  require(anchor.theta.rows() == model.num_joints() - 1 && anchor.beta.size() == model.num_betas(),
          ErrorCode::Dimension, "anchor layout does not match the model");
  keypoint_map_ = build_keypoint_map(model);
  sqrt_weights_.resize(kp.size());
  for (int k = 0; k < kp.size(); ++k) {
    sqrt_weights_[k] = std::sqrt(config.weight_2d * kp.confidence[k]);
  }
  num_params_ = 3 + 3 * (model.num_joints() - 1) + model.num_betas() + 3;
  num_residuals_ = 2 * kp.size() + 3 * (model.num_joints() - 1) + model.num_betas();
}

Eigen::VectorXd FitProblem::flatten(const WholeBodyParams& p) const {
  Eigen::VectorXd x(num_params_);
  const int nt = 3 * (model_.num_joints() - 1);
  x.head<3>() = p.phi;
  x.segment(3, nt) = Eigen::Map<const Eigen::VectorXd>(p.theta.data(), nt);
  x.segment(3 + nt, model_.num_betas()) = p.beta;
  x.tail<3>() << p.cam.scale, p.cam.translation.x(), p.cam.translation.y();
  return x;
}

WholeBodyParams FitProblem::unflatten(const Eigen::VectorXd& x) const {
  WholeBodyParams p;
  const int nt = 3 * (model_.num_joints() - 1);
  p.phi = x.head<3>();
  p.theta = Eigen::Map<const AxisAngles>(x.data() + 3, model_.num_joints() - 1, 3);
  p.beta = x.segment(3 + nt, model_.num_betas());
  p.cam.scale = x[num_params_ - 3];
  p.cam.translation = x.tail<2>();
  return p;
}

std::vector<int> FitProblem::free_indices() const {
  const FitMask& m = config_.mask;
  std::vector<int> idx;
  if (m.global_orient) idx.insert(idx.end(), {0, 1, 2});
  std::vector<bool> wrist(model_.num_joints(), false);
  std::vector<bool> finger(model_.num_joints(), false);
  if (model_.has_hands()) {
    for (int side = 0; side < 2; ++side) {
      wrist[model_.wrist_joint(static_cast<HandSide>(side))] = true;
      for (int j : finger_joint_ids(model_, static_cast<HandSide>(side))) finger[j] = true;
    }
  }
  for (int j = 1; j < model_.num_joints(); ++j) {
    const bool free = finger[j] ? m.fingers : (wrist[j] ? m.wrists : m.body_pose);
    if (!free) continue;
    for (int a = 0; a < 3; ++a) idx.push_back(3 + 3 * (j - 1) + a);
  }
  const int shape0 = 3 + 3 * (model_.num_joints() - 1);
  if (m.shape) {
    for (int b = 0; b < model_.num_betas(); ++b) idx.push_back(shape0 + b);
  }
  if (m.camera) idx.insert(idx.end(), {num_params_ - 3, num_params_ - 2, num_params_ - 1});
  return idx;
}

Eigen::VectorXd FitProblem::residuals(const WholeBodyParams& p) const {
  const Points3 kps = keypoint_map_ * pose_mesh(model_, p.pose(), p.beta);
  const Points2 projected = project(p.cam, kps);
  Eigen::VectorXd r(num_residuals_);
  const int nk = kp_.size();
  for (int k = 0; k < nk; ++k) {
    r.segment<2>(2 * k) = sqrt_weights_[k] * (projected.row(k) - kp_.points.row(k)).transpose();
  }
  const int nt = 3 * (model_.num_joints() - 1);
  const AxisAngles dtheta = p.theta - anchor_.theta;
  r.segment(2 * nk, nt) = std::sqrt(config_.weight_prior_pose) * Eigen::Map<const Eigen::VectorXd>(dtheta.data(), nt);
  r.tail(model_.num_betas()) = std::sqrt(config_.weight_prior_shape) * p.beta;
  return r;
}

Eigen::MatrixXd FitProblem::jacobian(const WholeBodyParams& p) const {
  const PosedMesh posed = pose_model(model_, p.pose(), p.beta);
  const Points3 kps = keypoint_map_ * posed.vertices;
  const int nk = kp_.size();
  const int nj = model_.num_joints();
  const int nv = model_.num_vertices();
  const int nt = 3 * (nj - 1);
  const int shape0 = 3 + nt;
  const double s = p.cam.scale;
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(num_residuals_, num_params_);

  auto put_keypoint_column = [&](int col, const Points3& dk) {
    for (int k = 0; k < nk; ++k) {
      jac.block<2, 1>(2 * k, col) = sqrt_weights_[k] * s * dk.row(k).head<2>().transpose();
    }
  };

  // Skinned position of every (vertex, joint) pair.
  std::vector<std::vector<std::pair<int, double>>> skin(nv);
  std::vector<std::vector<Vec3>> skinned(nv);
  for (int i = 0; i < nv; ++i) {
    for (SparseMatrix::InnerIterator it(model_.skin_weights, i); it; ++it) {
      const int j = static_cast<int>(it.col());
      skin[i].emplace_back(j, it.value());
      skinned[i].push_back(posed.world[j].rotation *
                               (posed.shaped.row(i) - posed.rest_joints.row(j)).transpose() +
                           posed.world[j].translation);
    }
  }

  // Rotating joint k by a small world-frame rotation w moves every point skinned
  // to k's subtree by w x (point - pivot_k).
  Points3 lever(nv, 3);
  for (int k = 0; k < nj; ++k) {
    const Vec3 pivot = posed.world[k].translation;
    for (int i = 0; i < nv; ++i) {
      Vec3 acc = Vec3::Zero();
      for (std::size_t e = 0; e < skin[i].size(); ++e) {
        const auto [j, w] = skin[i][e];
        if (model_.tree.is_ancestor_or_self(k, j)) acc += w * (skinned[i][e] - pivot);
      }
      lever.row(i) = acc.transpose();
    }
    const Points3 kp_lever = keypoint_map_ * lever;
    Rotation frame;
    int col0;
    if (k == 0) {
      frame = left_jacobian<double>(p.phi);
      col0 = 0;
    } else {
      frame = posed.world[model_.tree.parent(k)].rotation *
              left_jacobian<double>(p.theta.row(k - 1).transpose());
      col0 = 3 + 3 * (k - 1);
    }
    for (int a = 0; a < 3; ++a) {
      const Vec3 omega = frame.col(a);
      Points3 dk(nk, 3);
      for (int r = 0; r < nk; ++r) dk.row(r) = omega.cross(kp_lever.row(r).transpose()).transpose();
      put_keypoint_column(col0 + a, dk);
    }
  }

  // Shape coefficients move the template, the rest joints and through them the
  // posed joint positions.
  for (int b = 0; b < model_.num_betas(); ++b) {
    const Eigen::VectorXd column = model_.shape_basis.col(b);
    const Eigen::Map<const Points3> dshaped(column.data(), nv, 3);
    const Points3 drest = model_.joint_regressor.topRows(nj) * Points3(dshaped);
    std::vector<Vec3> dpos(nj);
    for (int j = 0; j < nj; ++j) {
      const int par = model_.tree.parent(j);
      dpos[j] = par < 0 ? Vec3(drest.row(j).transpose())
                        : Vec3(dpos[par] + posed.world[par].rotation * (drest.row(j) - drest.row(par)).transpose());
    }
    Points3 dv(nv, 3);
    for (int i = 0; i < nv; ++i) {
      Vec3 acc = Vec3::Zero();
      for (const auto& [j, w] : skin[i]) {
        acc += w * (posed.world[j].rotation * (dshaped.row(i) - drest.row(j)).transpose() + dpos[j]);
      }
      dv.row(i) = acc.transpose();
    }
    put_keypoint_column(shape0 + b, keypoint_map_ * dv);
    jac(2 * nk + nt + b, shape0 + b) = std::sqrt(config_.weight_prior_shape);
  }

  const double sw_pose = std::sqrt(config_.weight_prior_pose);
  for (int c = 0; c < nt; ++c) jac(2 * nk + c, 3 + c) = sw_pose;

  for (int k = 0; k < nk; ++k) {
    jac.block<2, 1>(2 * k, num_params_ - 3) = sqrt_weights_[k] * kps.row(k).head<2>().transpose();
    jac(2 * k, num_params_ - 2) = sqrt_weights_[k];
    jac(2 * k + 1, num_params_ - 1) = sqrt_weights_[k];
  }
  return jac;
}

Eigen::MatrixXd FitProblem::jacobian_central_difference(const WholeBodyParams& p, double step) const {
  const Eigen::VectorXd x = flatten(p);
  Eigen::MatrixXd jac(num_residuals_, num_params_);
  for (int c = 0; c < num_params_; ++c) {
    Eigen::VectorXd xp = x, xm = x;
    xp[c] += step;
    xm[c] -= step;
    jac.col(c) = (residuals(unflatten(xp)) - residuals(unflatten(xm))) / (2.0 * step);
  }
  return jac;
}

FitResult fit(const ParametricModel& model, const WholeBodyParams& init,
              const WeakPerspectiveCamera& cam_init, const KeypointSet2D& kp,
              const FitConfig& config) {
  config.validate();
  check_keypoints(model, kp);
  require((kp.confidence.array() > 0.0).any(), ErrorCode::Unconstrained,
          "all keypoint confidences are zero");
  require(init.phi.allFinite() && init.theta.allFinite() && init.beta.allFinite(), ErrorCode::Input,
          "initial parameters must be finite");
  require(cam_init.valid(), ErrorCode::Input, "initial camera must have a positive finite scale");

  WholeBodyParams params = init;
  params.cam = cam_init;
  const FitProblem problem(model, kp, init, config);
  const std::vector<int> free = problem.free_indices();

  Eigen::VectorXd r = problem.residuals(params);
  double cost = r.squaredNorm();
  require(std::isfinite(cost), ErrorCode::Numeric, "initial cost is not finite");

  FitResult result;
  result.initial_cost = cost;
  double damping = config.initial_damping;
  const int nf = static_cast<int>(free.size());

  for (int iter = 0; iter < config.iterations; ++iter) {
    if (nf == 0 || cost == 0.0) {
      result.cost_trace.push_back(cost);
      continue;
    }
    const Eigen::MatrixXd full = config.jacobian == JacobianMode::Analytic
                                     ? problem.jacobian(params)
                                     : problem.jacobian_central_difference(params, config.fd_step);
    Eigen::MatrixXd jf(full.rows(), nf);
    for (int c = 0; c < nf; ++c) jf.col(c) = full.col(free[c]);
    const Eigen::MatrixXd normal = jf.transpose() * jf;
    const Eigen::VectorXd gradient = jf.transpose() * r;
    const Eigen::VectorXd x = problem.flatten(params);

    bool accepted = false;
    for (int attempt = 0; attempt < config.max_retries && !accepted; ++attempt) {
      Eigen::MatrixXd damped = normal;
      for (int c = 0; c < nf; ++c) damped(c, c) += damping * (normal(c, c) + 1e-9);
      const Eigen::VectorXd step = damped.ldlt().solve(-gradient);
      Eigen::VectorXd xn = x;
      for (int c = 0; c < nf; ++c) xn[free[c]] += step[c];
      WholeBodyParams candidate = problem.unflatten(xn);
      canonicalize_rotations(candidate);
      double candidate_cost = std::numeric_limits<double>::infinity();
      Eigen::VectorXd rn;
      if (step.allFinite() && candidate.cam.valid()) {
        rn = problem.residuals(candidate);
        candidate_cost = rn.squaredNorm();
      }
      if (std::isfinite(candidate_cost) && candidate_cost <= cost) {
        params = std::move(candidate);
        r = std::move(rn);
        cost = candidate_cost;
        damping = std::max(damping * config.damping_decrease, 1e-12);
        accepted = true;
      } else {
        damping *= config.damping_increase;
      }
    }
    // A step that cannot be accepted within the retry budget leaves the
    // parameters in place; the iteration is recorded with the unchanged cost.
    result.cost_trace.push_back(cost);
  }

  result.params = params;
  result.rms_px = reprojection_rms(model, params, params.cam, kp);
  return result;
}

std::array<double, 5> smoothing_weights(int frame, int count) {
  require(count > 0 && frame >= 0 && frame < count, ErrorCode::Input, "frame outside sequence");
  std::array<double, 5> w{};
  double total = 0.0;
  for (int k = 0; k < 5; ++k) {
    const int t = frame + k - 2;
    if (t < 0 || t >= count) continue;
    w[k] = kSmoothingKernel[k];
    total += w[k];
  }
  for (double& v : w) v /= total;
  return w;
}

std::vector<Eigen::VectorXd> temporal_smooth(const std::vector<Eigen::VectorXd>& sequence) {
  require(!sequence.empty(), ErrorCode::Input, "cannot smooth an empty sequence");
  const int count = static_cast<int>(sequence.size());
  for (const auto& frame : sequence) {
    require(frame.size() == sequence.front().size(), ErrorCode::Dimension,
            "all frames must have the same parameter count");
  }
  std::vector<Eigen::VectorXd> out(count);
  for (int t = 0; t < count; ++t) {
    const auto w = smoothing_weights(t, count);
    // Accumulating offsets from the center frame keeps constant signals exact.
    Eigen::VectorXd delta = Eigen::VectorXd::Zero(sequence[t].size());
    for (int k = 0; k < 5; ++k) {
      if (w[k] == 0.0 || k == 2) continue;
      delta += w[k] * (sequence[t + k - 2] - sequence[t]);
    }
    out[t] = sequence[t] + delta;
  }
  return out;
}

std::vector<WholeBodyParams> temporal_smooth(const std::vector<WholeBodyParams>& sequence) {
  require(!sequence.empty(), ErrorCode::Input, "cannot smooth an empty sequence");
  std::vector<Eigen::VectorXd> flat;
  flat.reserve(sequence.size());
  const int nt = static_cast<int>(sequence.front().theta.size());
  const int nb = static_cast<int>(sequence.front().beta.size());
  for (const auto& p : sequence) {
    require(p.theta.size() == nt && p.beta.size() == nb, ErrorCode::Dimension,
            "all frames must share one parameter layout");
    Eigen::VectorXd x(3 + nt + nb + 3);
    x << p.phi, Eigen::Map<const Eigen::VectorXd>(p.theta.data(), nt), p.beta, p.cam.scale,
        p.cam.translation;
    flat.push_back(std::move(x));
  }
  const auto smoothed = temporal_smooth(flat);
  std::vector<WholeBodyParams> out(sequence.size());
  for (std::size_t t = 0; t < sequence.size(); ++t) {
    const Eigen::VectorXd& x = smoothed[t];
    out[t].phi = x.head<3>();
    out[t].theta = Eigen::Map<const AxisAngles>(x.data() + 3, sequence[t].theta.rows(), 3);
    out[t].beta = x.segment(3 + nt, nb);
    out[t].cam.scale = x[3 + nt + nb];
    out[t].cam.translation = x.tail<2>();
  }
  return out;
}

}  // namespace mocapkit
