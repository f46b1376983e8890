#include "mocapkit/metrics.hpp"

#include <cmath>

namespace mocapkit {

namespace {

void check_same_shape(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt) {
  require(pred.rows() == gt.rows() && pred.cols() == gt.cols(), ErrorCode::Dimension,
          "prediction and ground truth shapes differ");
}

}  // namespace

double loss_theta(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt) {
  check_same_shape(pred, gt);
  return (pred - gt).squaredNorm();
}

double loss_3d(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt) {
  check_same_shape(pred, gt);
  return (pred - gt).squaredNorm();
}

double loss_2d(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt, Norm2d norm) {
  check_same_shape(pred, gt);
  if (norm == Norm2d::Squared) return (pred - gt).squaredNorm();
  return (pred - gt).rowwise().norm().sum();
}

double loss_reg(const Eigen::VectorXd& beta) { return beta.squaredNorm(); }

double overall_loss(const LossParts& parts, const LossWeights& weights) {
  return weights.theta * parts.theta + weights.joints3d * parts.joints3d +
         weights.joints2d * parts.joints2d + weights.shape_reg * parts.shape_reg;
}

Alignment alignment_from_string(const std::string& s) {
  if (s == "none") return Alignment::None;
  if (s == "root-relative") return Alignment::RootRelative;
  fail(ErrorCode::Input, "unknown alignment '" + s + "'");
}

const char* to_string(Alignment a) { return a == Alignment::None ? "none" : "root-relative"; }

namespace {

Eigen::VectorXd joint_errors(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt, Alignment alignment) {
  check_same_shape(pred, gt);
  require(pred.rows() > 0, ErrorCode::Dimension, "no joints to evaluate");
  Eigen::MatrixXd diff = pred - gt;
  // Root-relative: both sets are expressed relative to their own row 0.
  if (alignment == Alignment::RootRelative) diff.rowwise() -= diff.row(0).eval();
  return diff.rowwise().norm();
}

double fraction_within(const Eigen::VectorXd& errors, double threshold) {
  return static_cast<double>((errors.array() <= threshold).count()) / static_cast<double>(errors.size());
}

}  // namespace

double pck(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt, double threshold, Alignment alignment) {
  require(threshold >= 0.0 && std::isfinite(threshold), ErrorCode::Input,
          "PCK threshold must be finite and nonnegative");
  return fraction_within(joint_errors(pred, gt, alignment), threshold);
}

PckCurve pck_curve(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt, double lo, double hi,
                   int samples, Alignment alignment) {
  require(samples >= 2, ErrorCode::Input, "a PCK curve needs at least two thresholds");
  require(lo >= 0.0 && hi > lo && std::isfinite(hi), ErrorCode::Input, "invalid threshold range");
  const Eigen::VectorXd errors = joint_errors(pred, gt, alignment);
  PckCurve curve;
  curve.thresholds = Eigen::VectorXd::LinSpaced(samples, lo, hi);
  curve.values.resize(samples);
  for (int i = 0; i < samples; ++i) curve.values[i] = fraction_within(errors, curve.thresholds[i]);
  return curve;
}

double auc(const PckCurve& curve) {
  const auto n = curve.thresholds.size();
  require(n >= 2 && curve.values.size() == n, ErrorCode::Input,
          "AUC needs at least two thresholds with one value each");
  double area = 0.0;
  double range = 0.0;
  for (Eigen::Index i = 1; i < n; ++i) {
    const double dx = curve.thresholds[i] - curve.thresholds[i - 1];
    require(dx > 0.0, ErrorCode::Input, "thresholds must be strictly ascending");
    area += 0.5 * dx * (curve.values[i] + curve.values[i - 1]);
    range += dx;
  }
  // Summing the range from the same intervals makes a flat curve of 1 exactly 1.
  return area / range;
}

}  // namespace mocapkit
