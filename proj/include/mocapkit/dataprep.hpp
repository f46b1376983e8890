#pragma once

#include <array>
#include <vector>

#include <Eigen/Core>

#include "mocapkit/fitting.hpp"

namespace mocapkit {

// Source-to-target joint assignment between two keypoint conventions.
struct JointMap {
  std::vector<int> target_of_source;  // -1 drops the source joint
  int target_size = 0;

  static JointMap identity(int n);
  void validate(int source_size) const;
  // Map back from target to source layout; requires a bijection.
  JointMap inverse() const;
};

Eigen::MatrixXd reorder_joints(const Eigen::MatrixXd& joints, const JointMap& map);

// Uniform scaling about `anchor` so that the distance between the two knuckle
// keypoints equals reference_length.
Eigen::MatrixXd rescale_keypoints(const Eigen::MatrixXd& joints, double reference_length,
                                  std::array<int, 2> knuckle_pair = {4, 5}, int anchor = 0);

// Horizontal mirror of an image of the given width: x -> width - x.
KeypointSet2D flip_keypoints_2d(const KeypointSet2D& kp, double image_width);
Points2 flip_points_2d(const Points2& points, double image_width);

// Conjugation of each rotation by the reflection x -> -x: (x, y, z) -> (x, -y, -z).
AxisAngle flip_axis_angle(const AxisAngle& aa);
struct HandPose {
  AxisAngle phi = AxisAngle::Zero();
  AxisAngles theta;
};
HandPose flip_hand_params(const HandPose& hand);
HandPrediction flip_hand_prediction(const HandPrediction& hand, double image_width);

struct BlurKernel {
  Eigen::MatrixXd weights;  // odd square, nonnegative, sums to 1
};

// Uniform straight-line kernel of `length` pixels at `angle` radians
// (counter-clockwise from +x with image y pointing down).
BlurKernel motion_blur_kernel(double length, double angle);

// H x W x C image, channels interleaved, row-major.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 1;
  std::vector<double> data;

  Image() = default;
  Image(int h, int w, int c) : height(h), width(w), channels(c), data(static_cast<std::size_t>(h) * w * c, 0.0) {}

  double& at(int y, int x, int c) { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  double at(int y, int x, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
};

// Same-size 2D convolution with mirror padding that does not repeat the edge
// pixel (-1 maps to 1).
Image convolve2d(const Image& image, const BlurKernel& kernel);

}  // namespace mocapkit
