#include "mocapkit/toy_model.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace mocapkit {

namespace {

enum class Limb { Torso, Leg, Arm, Finger };

struct JointSpec {
  const char* name;    // without side prefix for sided joints
  const char* parent;  // full name of the parent on the same side, "" for root
  bool sided;
  Vec3 offset;         // from the parent, left side (+x)
  Limb limb;
};

// SMPL-style body ordering; sided entries expand to left then right.
const JointSpec kBody[] = {
    {"pelvis", "", false, {0.0, 0.0, 0.0}, Limb::Torso},
    {"hip", "pelvis", true, {0.09, -0.08, 0.0}, Limb::Leg},
    {"spine1", "pelvis", false, {0.0, 0.10, -0.01}, Limb::Torso},
    {"knee", "hip", true, {0.01, -0.40, 0.01}, Limb::Leg},
    {"spine2", "spine1", false, {0.0, 0.12, 0.0}, Limb::Torso},
    {"ankle", "knee", true, {0.0, -0.40, -0.03}, Limb::Leg},
    {"spine3", "spine2", false, {0.0, 0.12, 0.01}, Limb::Torso},
    {"foot", "ankle", true, {0.01, -0.05, 0.12}, Limb::Leg},
    {"neck", "spine3", false, {0.0, 0.18, -0.01}, Limb::Torso},
    {"collar", "spine3", true, {0.07, 0.10, 0.0}, Limb::Torso},
    {"head", "neck", false, {0.0, 0.16, 0.03}, Limb::Torso},
    {"shoulder", "collar", true, {0.11, 0.03, -0.01}, Limb::Arm},
    {"elbow", "shoulder", true, {0.26, 0.0, -0.01}, Limb::Arm},
    {"wrist", "elbow", true, {0.25, 0.0, 0.01}, Limb::Arm},
};

// Finger chains in index, middle, pinky, ring, thumb order; offsets from the
// previous joint of the chain (the wrist for the first).
const char* const kFingers[] = {"index", "middle", "pinky", "ring", "thumb"};
const Vec3 kFingerOffsets[5][3] = {
    {{0.090, 0.005, 0.025}, {0.035, -0.004, 0.001}, {0.025, -0.004, 0.0}},
    {{0.095, 0.004, 0.006}, {0.038, -0.004, 0.0}, {0.027, -0.004, 0.0}},
    {{0.080, 0.0, -0.034}, {0.025, -0.003, -0.003}, {0.019, -0.003, -0.002}},
    {{0.088, 0.002, -0.013}, {0.034, -0.004, -0.001}, {0.025, -0.004, -0.001}},
    {{0.025, -0.015, 0.030}, {0.030, -0.010, 0.022}, {0.028, -0.006, 0.016}},
};
constexpr double kTipLength = 0.022;
constexpr double kOctahedronFraction = 0.3;
constexpr double kShapeScale = 0.03;
constexpr int kNumBetas = 10;

class Uniform {
 public:
  explicit Uniform(std::uint64_t seed) : engine_(seed) {}
  // [lo, hi) from the raw engine output; std distributions are not portable.
  double operator()(double lo, double hi) {
    const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
  }

 private:
  std::mt19937_64 engine_;
};

Vec3 mirror(const Vec3& v) { return {-v.x(), v.y(), v.z()}; }

struct Builder {
  std::vector<std::string> names;
  std::vector<int> parents;
  std::vector<Vec3> joints;
  std::vector<Vec3> vertices;
  std::vector<Eigen::Vector3i> faces;
  std::vector<Eigen::Triplet<double>> weights;
  std::vector<Eigen::Triplet<double>> regressor;

  int add_joint(const std::string& name, int parent, const Vec3& position) {
    names.push_back(name);
    parents.push_back(parent);
    joints.push_back(position);
    return static_cast<int>(joints.size()) - 1;
  }

  int index(const std::string& name) const {
    for (std::size_t j = 0; j < names.size(); ++j) {
      if (names[j] == name) return static_cast<int>(j);
    }
    return -1;
  }

  int add_vertex(const Vec3& p) {
    vertices.push_back(p);
    return static_cast<int>(vertices.size()) - 1;
  }
};

}  // namespace

SizeClass size_class_from_string(const std::string& s) {
  if (s == "small") return SizeClass::Small;
  if (s == "medium") return SizeClass::Medium;
  fail(ErrorCode::Input, "unknown size class '" + s + "'");
}

const char* to_string(SizeClass size) { return size == SizeClass::Small ? "small" : "medium"; }

ParametricModel gen_toy_model(std::uint64_t seed, SizeClass size) {
  Uniform rng(seed);
  double limb_scale[4];
  for (double& s : limb_scale) s = rng(0.95, 1.05);
  auto scaled = [&](const Vec3& offset, Limb limb) {
    return (offset * limb_scale[static_cast<int>(limb)]).eval();
  };

  Builder b;
  for (const auto& spec : kBody) {
    if (!spec.sided) {
      const int parent = spec.parent[0] ? b.index(spec.parent) : -1;
      const Vec3 base = parent < 0 ? Vec3::Zero() : b.joints[parent];
      b.add_joint(spec.name, parent, base + scaled(spec.offset, spec.limb));
      continue;
    }
    for (const char* side : {"left_", "right_"}) {
      const bool left = side[0] == 'l';
      std::string parent_name = spec.parent;
      if (b.index(parent_name) < 0) parent_name = side + parent_name;
      const int parent = b.index(parent_name);
      const Vec3 offset = scaled(spec.offset, spec.limb);
      b.add_joint(side + std::string(spec.name), parent,
                  b.joints[parent] + (left ? offset : mirror(offset)));
    }
  }

  std::array<std::vector<int>, 2> hand_ids;
  std::array<std::vector<Vec3>, 2> tip_positions;
  for (int s = 0; s < 2; ++s) {
    const std::string side = s == 0 ? "left_" : "right_";
    const int wrist = b.index(side + "wrist");
    hand_ids[s].push_back(wrist);
    for (int f = 0; f < 5; ++f) {
      int parent = wrist;
      for (int k = 0; k < 3; ++k) {
        Vec3 offset = scaled(kFingerOffsets[f][k], Limb::Finger);
        if (s == 1) offset = mirror(offset);
        parent = b.add_joint(side + kFingers[f] + std::to_string(k + 1), parent,
                             b.joints[parent] + offset);
        hand_ids[s].push_back(parent);
      }
      const Vec3 dir = (b.joints[parent] - b.joints[b.parents[parent]]).normalized();
      tip_positions[s].push_back(b.joints[parent] + dir * kTipLength * limb_scale[3]);
    }
  }
  const int num_joints = static_cast<int>(b.joints.size());

  // Octahedron per joint, rigidly skinned, centroid regressed.
  for (int j = 0; j < num_joints; ++j) {
    double nearest = std::numeric_limits<double>::infinity();
    for (int k = 0; k < num_joints; ++k) {
      if (k != j) nearest = std::min(nearest, (b.joints[j] - b.joints[k]).norm());
    }
    const double r = kOctahedronFraction * nearest;
    const bool mirrored = b.joints[j].x() < 0.0;
    const double sx = mirrored ? -r : r;
    const Vec3 offsets[6] = {{sx, 0, 0}, {-sx, 0, 0}, {0, r, 0}, {0, -r, 0}, {0, 0, r}, {0, 0, -r}};
    int first = -1;
    for (const Vec3& o : offsets) {
      const int v = b.add_vertex(b.joints[j] + o);
      if (first < 0) first = v;
      b.weights.emplace_back(v, j, 1.0);
      b.regressor.emplace_back(j, v, 1.0 / 6.0);
    }
    static const int kFaces[8][3] = {{0, 2, 4}, {2, 1, 4}, {1, 3, 4}, {3, 0, 4},
                                     {2, 0, 5}, {1, 2, 5}, {3, 1, 5}, {0, 3, 5}};
    for (const auto& f : kFaces) {
      Eigen::Vector3i tri(first + f[0], first + f[1], first + f[2]);
      if (mirrored) std::swap(tri[1], tri[2]);
      b.faces.push_back(tri);
    }
  }

  // Blended bone vertices. A bone entering a hand from the body only gets the
  // samples closer to the body side so hand-region vertices stay skinned to
  // hand joints alone.
  std::vector<bool> in_hand(num_joints, false);
  for (const auto& ids : hand_ids) {
    for (int j : ids) in_hand[j] = true;
  }
  const int samples = size == SizeClass::Small ? 2 : 4;
  for (int j = 1; j < num_joints; ++j) {
    const int p = b.parents[j];
    for (int k = 1; k <= samples; ++k) {
      const double t = static_cast<double>(k) / (samples + 1);
      if (!in_hand[p] && in_hand[j] && t > 0.5) continue;
      const int v = b.add_vertex((1.0 - t) * b.joints[p] + t * b.joints[j]);
      b.weights.emplace_back(v, p, 1.0 - t);
      b.weights.emplace_back(v, j, t);
    }
  }

  std::array<std::vector<int>, 2> tip_ids;
  for (int s = 0; s < 2; ++s) {
    for (int f = 0; f < 5; ++f) {
      const int v = b.add_vertex(tip_positions[s][f]);
      b.weights.emplace_back(v, hand_ids[s][1 + 3 * f + 2], 1.0);
      tip_ids[s].push_back(v);
    }
  }

  ParametricModel model;
  const int n = static_cast<int>(b.vertices.size());
  model.template_vertices.resize(n, 3);
  for (int i = 0; i < n; ++i) model.template_vertices.row(i) = b.vertices[i].transpose();
  model.faces.resize(static_cast<int>(b.faces.size()), 3);
  for (std::size_t f = 0; f < b.faces.size(); ++f) model.faces.row(f) = b.faces[f].transpose();
  model.skin_weights.resize(n, num_joints);
  model.skin_weights.setFromTriplets(b.weights.begin(), b.weights.end());
  model.joint_regressor.resize(num_joints, n);
  model.joint_regressor.setFromTriplets(b.regressor.begin(), b.regressor.end());
  model.tree = SkeletonTree(b.parents, b.names);
  model.regressor_names = b.names;
  model.hand_joint_ids = hand_ids;
  model.fingertip_vertex_ids = tip_ids;

  // Smooth mirror-symmetric displacement fields: x-component odd in x, the
  // others even.
  model.shape_basis.resize(3 * n, kNumBetas);
  for (int k = 0; k < kNumBetas; ++k) {
    const double a = rng(-1.0, 1.0), bb = rng(-1.0, 1.0), c = rng(-1.0, 1.0), e = rng(-1.0, 1.0);
    const double freq = 1.0 + k;
    for (int i = 0; i < n; ++i) {
      const Vec3& p = b.vertices[i];
      const double ax = std::abs(p.x());
      model.shape_basis(3 * i + 0, k) = kShapeScale * a * p.x() * (1.0 + 0.5 * std::sin(freq * p.y()));
      model.shape_basis(3 * i + 1, k) = kShapeScale * (bb * p.y() + e * ax);
      model.shape_basis(3 * i + 2, k) = kShapeScale * c * p.z() * (1.0 + 0.5 * std::cos(freq * ax));
    }
  }

  // Middle-finger knuckle (hand keypoints 4 and 5) of the right hand at rest.
  model.knuckle_pair = {4, 5};
  model.reference_knuckle_length =
      (b.joints[hand_ids[1][model.knuckle_pair[0]]] - b.joints[hand_ids[1][model.knuckle_pair[1]]]).norm();
  model.validate();
  return model;
}

}  // namespace mocapkit
