#include "mocapkit/dataprep.hpp"

#include <cmath>
#include <map>

namespace mocapkit {

JointMap JointMap::identity(int n) {
  JointMap map;
  map.target_size = n;
  for (int i = 0; i < n; ++i) map.target_of_source.push_back(i);
  return map;
}

void JointMap::validate(int source_size) const {
  require(static_cast<int>(target_of_source.size()) == source_size, ErrorCode::Input,
          "joint map covers " + std::to_string(target_of_source.size()) + " source joints, input has " +
              std::to_string(source_size));
  std::vector<bool> hit(target_size, false);
  for (int t : target_of_source) {
    if (t < 0) continue;
    require(t < target_size, ErrorCode::Input, "joint map target out of range");
    require(!hit[t], ErrorCode::Input, "joint map sends two joints to target " + std::to_string(t));
    hit[t] = true;
  }
  for (int t = 0; t < target_size; ++t) {
    require(hit[t], ErrorCode::Input, "joint map leaves target " + std::to_string(t) + " empty");
  }
}

JointMap JointMap::inverse() const {
  validate(static_cast<int>(target_of_source.size()));
  JointMap inv;
  inv.target_size = static_cast<int>(target_of_source.size());
  inv.target_of_source.assign(target_size, -1);
  for (std::size_t s = 0; s < target_of_source.size(); ++s) {
    require(target_of_source[s] >= 0, ErrorCode::Input, "a map that drops joints has no inverse");
    inv.target_of_source[target_of_source[s]] = static_cast<int>(s);
  }
  return inv;
}

Eigen::MatrixXd reorder_joints(const Eigen::MatrixXd& joints, const JointMap& map) {
  map.validate(static_cast<int>(joints.rows()));
  Eigen::MatrixXd out(map.target_size, joints.cols());
  for (int s = 0; s < joints.rows(); ++s) {
    if (map.target_of_source[s] >= 0) out.row(map.target_of_source[s]) = joints.row(s);
  }
  return out;
}

Eigen::MatrixXd rescale_keypoints(const Eigen::MatrixXd& joints, double reference_length,
                                  std::array<int, 2> knuckle_pair, int anchor) {
  const auto n = joints.rows();
  require(knuckle_pair[0] >= 0 && knuckle_pair[0] < n && knuckle_pair[1] >= 0 &&
              knuckle_pair[1] < n && anchor >= 0 && anchor < n,
          ErrorCode::Dimension, "knuckle pair or anchor outside the keypoint set");
  require(reference_length > 0.0 && std::isfinite(reference_length), ErrorCode::Input,
          "reference knuckle length must be positive");
  const double length = (joints.row(knuckle_pair[0]) - joints.row(knuckle_pair[1])).norm();
  require(length >= 1e-9, ErrorCode::DegenerateKeypoints, "knuckle keypoints coincide");
  const double scale = reference_length / length;
  Eigen::MatrixXd out = joints;
  const Eigen::RowVectorXd origin = joints.row(anchor);
  for (Eigen::Index r = 0; r < n; ++r) out.row(r) = origin + scale * (joints.row(r) - origin);
  return out;
}

Points2 flip_points_2d(const Points2& points, double image_width) {
  require(image_width > 0.0, ErrorCode::Input, "image width must be positive");
  Points2 out = points;
  out.col(0) = image_width - points.col(0).array();
  return out;
}

KeypointSet2D flip_keypoints_2d(const KeypointSet2D& kp, double image_width) {
  return {flip_points_2d(kp.points, image_width), kp.confidence};
}

AxisAngle flip_axis_angle(const AxisAngle& aa) { return {aa.x(), -aa.y(), -aa.z()}; }

HandPose flip_hand_params(const HandPose& hand) {
  HandPose out;
  out.phi = flip_axis_angle(hand.phi);
  out.theta = hand.theta;
  out.theta.col(1) = -hand.theta.col(1);
  out.theta.col(2) = -hand.theta.col(2);
  return out;
}

HandPrediction flip_hand_prediction(const HandPrediction& hand, double image_width) {
  require(image_width > 0.0, ErrorCode::Input, "image width must be positive");
  const HandPose flipped = flip_hand_params({hand.phi, hand.theta});
  HandPrediction out = hand;
  out.side = hand.side == HandSide::Left ? HandSide::Right : HandSide::Left;
  out.phi = flipped.phi;
  out.theta = flipped.theta;
  out.cam.translation.x() = image_width - hand.cam.translation.x();
  return out;
}

BlurKernel motion_blur_kernel(double length, double angle) {
  require(std::isfinite(length) && std::isfinite(angle), ErrorCode::Input,
          "blur length and angle must be finite");
  require(length >= 1.0, ErrorCode::Input, "blur length must be at least one pixel");
  // Rasterize the centered segment by dense midpoint sampling; every sample
  // lands in its nearest pixel.
  const long samples = 1000L * static_cast<long>(std::ceil(length));
  const double dx = std::cos(angle);
  const double dy = -std::sin(angle);
  std::map<std::pair<long, long>, long> counts;
  long radius = 0;
  for (long i = 0; i < samples; ++i) {
    const double t = -0.5 * length + (static_cast<double>(i) + 0.5) * length / static_cast<double>(samples);
    const long px = std::lround(t * dx);
    const long py = std::lround(t * dy);
    ++counts[{py, px}];
    radius = std::max({radius, std::abs(px), std::abs(py)});
  }
  BlurKernel kernel;
  const long size = 2 * radius + 1;
  kernel.weights = Eigen::MatrixXd::Zero(size, size);
  for (const auto& [pos, count] : counts) {
    kernel.weights(pos.first + radius, pos.second + radius) =
        static_cast<double>(count) / static_cast<double>(samples);
  }
  return kernel;
}

namespace {

int reflect(int p, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  p %= period;
  if (p < 0) p += period;
  return p < n ? p : period - p;
}

}  // namespace

Image convolve2d(const Image& image, const BlurKernel& kernel) {
  const auto& k = kernel.weights;
  require(k.rows() == k.cols() && k.rows() % 2 == 1, ErrorCode::Input, "kernel must be odd and square");
  require(k.allFinite(), ErrorCode::Input, "kernel must be finite");
  require(image.height > 0 && image.width > 0 && image.channels > 0 &&
              image.data.size() == static_cast<std::size_t>(image.height) * image.width * image.channels,
          ErrorCode::Dimension, "malformed image");
  const int r = static_cast<int>(k.rows()) / 2;
  Image out(image.height, image.width, image.channels);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      for (int c = 0; c < image.channels; ++c) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i) {
          const int sy = reflect(y - i, image.height);
          for (int j = -r; j <= r; ++j) {
            const double w = k(i + r, j + r);
            if (w == 0.0) continue;
            acc += w * image.at(sy, reflect(x - j, image.width), c);
          }
        }
        out.at(y, x, c) = acc;
      }
    }
  }
  return out;
}

}  // namespace mocapkit
