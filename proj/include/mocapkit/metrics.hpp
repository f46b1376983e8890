#pragma once

#include <Eigen/Core>

#include "mocapkit/common.hpp"

namespace mocapkit {

// Weights of the hand-regressor training objective.
struct LossWeights {
  double theta = 10.0;
  double joints3d = 100.0;
  double joints2d = 10.0;
  double shape_reg = 0.1;
};

struct LossParts {
  double theta = 0.0;
  double joints3d = 0.0;
  double joints2d = 0.0;
  double shape_reg = 0.0;
};

enum class Norm2d { Squared, Raw };

double loss_theta(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt);
double loss_3d(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt);
// Squared per-joint distances by default; Raw sums the unsquared distances.
double loss_2d(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt, Norm2d norm = Norm2d::Squared);
double loss_reg(const Eigen::VectorXd& beta);
double overall_loss(const LossParts& parts, const LossWeights& weights = {});

enum class Alignment { None, RootRelative };

Alignment alignment_from_string(const std::string& s);
const char* to_string(Alignment a);

// Fraction of joints (rows) whose Euclidean error is at most `threshold`.
double pck(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt, double threshold,
           Alignment alignment = Alignment::None);

struct PckCurve {
  Eigen::VectorXd thresholds;  // strictly ascending
  Eigen::VectorXd values;      // in [0, 1]
};

inline constexpr int kDefaultCurveSamples = 100;

// PCK sampled at `samples` evenly spaced thresholds in [lo, hi], endpoints included.
PckCurve pck_curve(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt, double lo, double hi,
                   int samples = kDefaultCurveSamples, Alignment alignment = Alignment::None);

// Trapezoidal area under the curve divided by the threshold range.
double auc(const PckCurve& curve);

}  // namespace mocapkit
