#include "mocapkit/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <png.h>

namespace mocapkit::io {

namespace {

void format_number(std::string& out, const Json& v) {
  if (v.is_number_integer()) {
    out += v.dump();
    return;
  }
  double d = v.get<double>();
  require(std::isfinite(d), ErrorCode::Schema, "cannot serialize a non-finite number");
  if (d == 0.0) d = 0.0;  // drop the sign of -0
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", d);
  out += buf;
}

bool is_scalar(const Json& v) { return v.is_primitive(); }

void dump_value(std::string& out, const Json& v, int indent) {
  const std::string pad(2 * (indent + 1), ' ');
  const std::string close(2 * indent, ' ');
  if (v.is_object()) {
    if (v.empty()) {
      out += "{}";
      return;
    }
    out += "{\n";
    bool first = true;
    for (const auto& [key, item] : v.items()) {
      if (!first) out += ",\n";
      first = false;
      out += pad + Json(key).dump() + ": ";
      dump_value(out, item, indent + 1);
    }
    out += "\n" + close + "}";
  } else if (v.is_array()) {
    if (v.empty()) {
      out += "[]";
      return;
    }
    const bool flat = std::all_of(v.begin(), v.end(), is_scalar);
    if (flat) {
      out += "[";
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ", ";
        dump_value(out, v[i], indent + 1);
      }
      out += "]";
      return;
    }
    out += "[\n";
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out += ",\n";
      out += pad;
      dump_value(out, v[i], indent + 1);
    }
    out += "\n" + close + "]";
  } else if (v.is_number()) {
    format_number(out, v);
  } else {
    out += v.dump();
  }
}

[[noreturn]] void schema_error(const std::string& message) { fail(ErrorCode::Schema, message); }

const Json& field(const Json& obj, const char* key) {
  if (!obj.is_object()) schema_error(std::string("expected an object holding '") + key + "'");
  const auto it = obj.find(key);
  if (it == obj.end()) schema_error(std::string("missing field '") + key + "'");
  return *it;
}

void check_keys(const Json& obj, std::initializer_list<const char*> allowed, const std::string& what) {
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : obj.items()) {
    if (!ok.count(key)) schema_error("unknown field '" + key + "' in " + what);
  }
}

void check_header(const Json& j, const std::string& format) {
  if (!j.is_object()) schema_error("expected a JSON object");
  const Json& f = field(j, "format");
  if (!f.is_string() || f.get<std::string>() != format) schema_error("expected format '" + format + "'");
  const Json& v = field(j, "version");
  if (!v.is_number_integer() || v.get<int>() != kSchemaVersion) {
    schema_error("unsupported " + format + " version");
  }
}

double number(const Json& v, const std::string& what) {
  if (!v.is_number()) schema_error(what + " must be a number");
  return v.get<double>();
}

int integer(const Json& v, const std::string& what) {
  if (!v.is_number_integer()) schema_error(what + " must be an integer");
  return v.get<int>();
}

Eigen::VectorXd vector_from(const Json& v, int expected, const std::string& what) {
  if (!v.is_array()) schema_error(what + " must be an array");
  if (expected >= 0 && static_cast<int>(v.size()) != expected) {
    schema_error(what + " must have " + std::to_string(expected) + " entries");
  }
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = number(v[i], what);
  return out;
}

Json vector_to(const Eigen::Ref<const Eigen::VectorXd>& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

// (rows, cols) matrix from a list of rows.
Eigen::MatrixXd rows_from(const Json& v, int cols, int expected_rows, const std::string& what) {
  if (!v.is_array()) schema_error(what + " must be an array of rows");
  if (expected_rows >= 0 && static_cast<int>(v.size()) != expected_rows) {
    schema_error(what + " must have " + std::to_string(expected_rows) + " rows");
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(v.size()), cols);
  for (std::size_t r = 0; r < v.size(); ++r) {
    out.row(static_cast<Eigen::Index>(r)) = vector_from(v[r], cols, what).transpose();
  }
  return out;
}

template <typename Derived>
Json rows_to(const Eigen::MatrixBase<Derived>& m) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

std::vector<int> ints_from(const Json& v, const std::string& what) {
  if (!v.is_array()) schema_error(what + " must be an array");
  std::vector<int> out;
  for (const auto& x : v) out.push_back(integer(x, what));
  return out;
}

std::vector<std::string> strings_from(const Json& v, const std::string& what) {
  if (!v.is_array()) schema_error(what + " must be an array of strings");
  std::vector<std::string> out;
  for (const auto& x : v) {
    if (!x.is_string()) schema_error(what + " must be an array of strings");
    out.push_back(x.get<std::string>());
  }
  return out;
}

Json sparse_to(const SparseMatrix& m) {
  Json triplets = Json::array();
  for (int r = 0; r < m.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(m, r); it; ++it) {
      triplets.push_back(Json::array({static_cast<int>(it.row()), static_cast<int>(it.col()), it.value()}));
    }
  }
  return {{"shape", {static_cast<int>(m.rows()), static_cast<int>(m.cols())}}, {"triplets", triplets}};
}

SparseMatrix sparse_from(const Json& j, const std::string& what) {
  check_keys(j, {"shape", "triplets"}, what);
  const std::vector<int> shape = ints_from(field(j, "shape"), what + ".shape");
  if (shape.size() != 2 || shape[0] < 0 || shape[1] < 0) schema_error(what + ".shape must be [rows, cols]");
  std::vector<Eigen::Triplet<double>> entries;
  std::set<std::pair<int, int>> seen;
  for (const auto& t : field(j, "triplets")) {
    if (!t.is_array() || t.size() != 3) schema_error(what + " triplets must be [row, col, value]");
    const int r = integer(t[0], what + " row"), c = integer(t[1], what + " col");
    if (r < 0 || r >= shape[0] || c < 0 || c >= shape[1]) schema_error(what + " triplet out of range");
    if (!seen.insert({r, c}).second) schema_error(what + " has a duplicate triplet");
    entries.emplace_back(r, c, number(t[2], what + " value"));
  }
  SparseMatrix m(shape[0], shape[1]);
  m.setFromTriplets(entries.begin(), entries.end());
  return m;
}

Json camera_to(const WeakPerspectiveCamera& cam) {
  return {{"scale", cam.scale}, {"translation", vector_to(cam.translation)}};
}

WeakPerspectiveCamera camera_from(const Json& j) {
  check_keys(j, {"scale", "translation"}, "camera");
  WeakPerspectiveCamera cam;
  cam.scale = number(field(j, "scale"), "camera.scale");
  cam.translation = vector_from(field(j, "translation"), 2, "camera.translation");
  require(cam.valid(), ErrorCode::Schema, "camera scale must be positive and finite");
  return cam;
}

std::vector<std::string> names_of(const ParametricModel& model, const std::vector<int>& joints) {
  std::vector<std::string> out;
  for (int j : joints) out.push_back(model.tree.name(j));
  return out;
}

std::vector<std::string> pose_names(const ParametricModel& model) {
  std::vector<std::string> out(model.tree.names().begin() + 1, model.tree.names().end());
  return out;
}

void check_layout(const Json& j, const std::vector<std::string>& expected, const std::string& what) {
  if (strings_from(j, what) != expected) schema_error(what + " does not match the model's joint layout");
}

void check_frames_monotone(const std::vector<int>& frames) {
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (frames[i] <= frames[i - 1]) schema_error("frame indices must be strictly increasing");
  }
}

}  // namespace

std::string dump_canonical(const Json& value) {
  std::string out;
  dump_value(out, value, 0);
  out += "\n";
  return out;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::Io, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json read_json(const std::string& path) {
  const std::string text = read_text(path);
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    fail(ErrorCode::Schema, "'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::Io, "cannot write '" + path + "'");
  out << text;
  require(out.good(), ErrorCode::Io, "failed writing '" + path + "'");
}

std::string resolve_asset_path(const std::string& path) {
  namespace fs = std::filesystem;
  if (fs::exists(path) || fs::path(path).is_absolute()) return path;
  if (const char* dir = std::getenv("MOCAPKIT_ASSET_DIR")) {
    const fs::path candidate = fs::path(dir) / path;
    if (fs::exists(candidate)) return candidate.string();
  }
  return path;
}

Json model_to_json(const ParametricModel& model) {
  Json j;
  j["format"] = "mocapkit.model";
  j["version"] = kSchemaVersion;
  j["vertices"] = rows_to(model.template_vertices);
  j["faces"] = rows_to(model.faces);
  j["skin_weights"] = sparse_to(model.skin_weights);
  j["joint_regressor"] = sparse_to(model.joint_regressor);
  j["regressor_names"] = model.regressor_names;
  j["parents"] = model.tree.parents();
  j["joint_names"] = model.tree.names();
  Json basis = Json::array();
  for (int k = 0; k < model.num_betas(); ++k) basis.push_back(vector_to(model.shape_basis.col(k)));
  j["shape_basis"] = basis;
  j["fingertip_vertex_ids"] = {{"left", model.fingertip_vertex_ids[0]}, {"right", model.fingertip_vertex_ids[1]}};
  j["hand_joint_ids"] = {{"left", model.hand_joint_ids[0]}, {"right", model.hand_joint_ids[1]}};
  j["knuckle_pair"] = {model.knuckle_pair[0], model.knuckle_pair[1]};
  j["reference_knuckle_length"] = model.reference_knuckle_length;
  return j;
}

ParametricModel model_from_json(const Json& j, bool strict) {
  check_header(j, "mocapkit.model");
  if (strict) {
    check_keys(j, {"format", "version", "vertices", "faces", "skin_weights", "joint_regressor",
                   "regressor_names", "parents", "joint_names", "shape_basis", "fingertip_vertex_ids",
                   "hand_joint_ids", "knuckle_pair", "reference_knuckle_length", "pose_correctives"},
               "model asset");
  }
  if (j.contains("pose_correctives") && !j["pose_correctives"].is_null()) {
    schema_error("pose correctives are reserved and must be null");
  }
  ParametricModel m;
  m.template_vertices = rows_from(field(j, "vertices"), 3, -1, "vertices");
  const int n = m.num_vertices();
  const Eigen::MatrixXd faces = rows_from(field(j, "faces"), 3, -1, "faces");
  m.faces = faces.cast<int>();
  require((faces.array() == m.faces.cast<double>().array()).all(), ErrorCode::Schema,
          "face indices must be integers");
  m.skin_weights = sparse_from(field(j, "skin_weights"), "skin_weights");
  m.joint_regressor = sparse_from(field(j, "joint_regressor"), "joint_regressor");
  try {
    m.tree = SkeletonTree(ints_from(field(j, "parents"), "parents"),
                          strings_from(field(j, "joint_names"), "joint_names"));
  } catch (const Error& e) {
    schema_error(e.what());
  }
  m.regressor_names = j.contains("regressor_names")
                          ? strings_from(j["regressor_names"], "regressor_names")
                          : m.tree.names();
  const Json& basis = field(j, "shape_basis");
  if (!basis.is_array()) schema_error("shape_basis must be an array");
  m.shape_basis.resize(3 * n, static_cast<Eigen::Index>(basis.size()));
  for (std::size_t k = 0; k < basis.size(); ++k) {
    m.shape_basis.col(static_cast<Eigen::Index>(k)) = vector_from(basis[k], 3 * n, "shape_basis component");
  }
  const Json& tips = field(j, "fingertip_vertex_ids");
  const Json& hands = field(j, "hand_joint_ids");
  check_keys(tips, {"left", "right"}, "fingertip_vertex_ids");
  check_keys(hands, {"left", "right"}, "hand_joint_ids");
  for (int s = 0; s < 2; ++s) {
    const char* side = s == 0 ? "left" : "right";
    m.fingertip_vertex_ids[s] = ints_from(field(tips, side), "fingertip_vertex_ids");
    m.hand_joint_ids[s] = ints_from(field(hands, side), "hand_joint_ids");
  }
  const std::vector<int> pair = ints_from(field(j, "knuckle_pair"), "knuckle_pair");
  if (pair.size() != 2) schema_error("knuckle_pair must hold two indices");
  m.knuckle_pair = {pair[0], pair[1]};
  m.reference_knuckle_length = number(field(j, "reference_knuckle_length"), "reference_knuckle_length");
  m.validate();
  return m;
}

ParametricModel load_model(const std::string& path, bool strict) {
  return model_from_json(read_json(resolve_asset_path(path)), strict);
}

void save_model(const std::string& path, const ParametricModel& model) {
  write_text(path, dump_canonical(model_to_json(model)));
}

Json params_to_json(const ParametricModel& model, const std::vector<ParamsFrame>& frames) {
  Json out;
  out["format"] = "mocapkit.params";
  out["version"] = kSchemaVersion;
  out["joint_names"] = pose_names(model);
  Json list = Json::array();
  for (const auto& f : frames) {
    require(f.params.theta.rows() == model.num_joints() - 1, ErrorCode::Dimension,
            "params do not match the model layout");
    list.push_back({{"frame", f.frame},
                    {"global_orient", vector_to(f.params.phi)},
                    {"pose", rows_to(f.params.theta)},
                    {"betas", vector_to(f.params.beta)},
                    {"camera", camera_to(f.params.cam)}});
  }
  out["frames"] = list;
  return out;
}

std::vector<ParamsFrame> params_from_json(const ParametricModel& model, const Json& j) {
  check_header(j, "mocapkit.params");
  check_keys(j, {"format", "version", "joint_names", "frames"}, "params file");
  check_layout(field(j, "joint_names"), pose_names(model), "joint_names");
  std::vector<ParamsFrame> out;
  std::vector<int> indices;
  for (const auto& f : field(j, "frames")) {
    check_keys(f, {"frame", "global_orient", "pose", "betas", "camera"}, "params frame");
    ParamsFrame pf;
    pf.frame = integer(field(f, "frame"), "frame");
    pf.params.phi = vector_from(field(f, "global_orient"), 3, "global_orient");
    pf.params.theta = rows_from(field(f, "pose"), 3, model.num_joints() - 1, "pose");
    pf.params.beta = vector_from(field(f, "betas"), model.num_betas(), "betas");
    pf.params.cam = camera_from(field(f, "camera"));
    indices.push_back(pf.frame);
    out.push_back(std::move(pf));
  }
  check_frames_monotone(indices);
  return out;
}

Json predictions_to_json(const ParametricModel& model, const std::vector<PredictionFrame>& frames) {
  Json out;
  out["format"] = "mocapkit.predictions";
  out["version"] = kSchemaVersion;
  out["body_joint_names"] = names_of(model, body_joint_ids(model));
  out["hand_joint_names"] = {{"left", names_of(model, finger_joint_ids(model, HandSide::Left))},
                             {"right", names_of(model, finger_joint_ids(model, HandSide::Right))}};
  Json list = Json::array();
  for (const auto& f : frames) {
    Json frame = {{"frame", f.frame}};
    if (f.body) {
      frame["body"] = {{"global_orient", vector_to(f.body->phi)},
                       {"pose", rows_to(f.body->theta)},
                       {"betas", vector_to(f.body->beta)},
                       {"camera", camera_to(f.body->cam)}};
    } else {
      frame["body"] = nullptr;
    }
    Json hands = Json::array();
    for (const auto& h : f.hands) {
      hands.push_back({{"side", to_string(h.side)},
                       {"global_orient", vector_to(h.phi)},
                       {"pose", rows_to(h.theta)},
                       {"betas", vector_to(h.beta)},
                       {"camera", camera_to(h.cam)}});
    }
    frame["hands"] = hands;
    list.push_back(std::move(frame));
  }
  out["frames"] = list;
  return out;
}

std::vector<PredictionFrame> predictions_from_json(const ParametricModel& model, const Json& j) {
  check_header(j, "mocapkit.predictions");
  check_keys(j, {"format", "version", "body_joint_names", "hand_joint_names", "frames"}, "predictions file");
  const std::vector<int> body_ids = body_joint_ids(model);
  check_layout(field(j, "body_joint_names"), names_of(model, body_ids), "body_joint_names");
  const Json& hand_names = field(j, "hand_joint_names");
  check_keys(hand_names, {"left", "right"}, "hand_joint_names");
  check_layout(field(hand_names, "left"), names_of(model, finger_joint_ids(model, HandSide::Left)),
               "hand_joint_names.left");
  check_layout(field(hand_names, "right"), names_of(model, finger_joint_ids(model, HandSide::Right)),
               "hand_joint_names.right");
  std::vector<PredictionFrame> out;
  std::vector<int> indices;
  for (const auto& f : field(j, "frames")) {
    check_keys(f, {"frame", "body", "hands"}, "prediction frame");
    PredictionFrame pf;
    pf.frame = integer(field(f, "frame"), "frame");
    const Json& body = field(f, "body");
    if (!body.is_null()) {
      check_keys(body, {"global_orient", "pose", "betas", "camera"}, "body prediction");
      BodyPrediction b;
      b.phi = vector_from(field(body, "global_orient"), 3, "body.global_orient");
      b.theta = rows_from(field(body, "pose"), 3, static_cast<int>(body_ids.size()), "body.pose");
      b.beta = vector_from(field(body, "betas"), model.num_betas(), "body.betas");
      b.cam = camera_from(field(body, "camera"));
      pf.body = std::move(b);
    }
    const Json& hands = field(f, "hands");
    if (!hands.is_array()) schema_error("hands must be an array");
    for (const auto& h : hands) {
      check_keys(h, {"side", "global_orient", "pose", "betas", "camera"}, "hand prediction");
      HandPrediction hp;
      const Json& side = field(h, "side");
      if (!side.is_string()) schema_error("hand side must be a string");
      try {
        hp.side = hand_side_from_string(side.get<std::string>());
      } catch (const Error& e) {
        schema_error(e.what());
      }
      hp.phi = vector_from(field(h, "global_orient"), 3, "hand.global_orient");
      hp.theta = rows_from(field(h, "pose"), 3, kFingerJointsPerHand, "hand.pose");
      hp.beta = vector_from(field(h, "betas"), -1, "hand.betas");
      hp.cam = camera_from(field(h, "camera"));
      pf.hands.push_back(std::move(hp));
    }
    indices.push_back(pf.frame);
    out.push_back(std::move(pf));
  }
  check_frames_monotone(indices);
  return out;
}

Json keypoints_to_json(const KeypointFile& file) {
  Json out;
  out["format"] = "mocapkit.keypoints";
  out["version"] = kSchemaVersion;
  out["dim"] = file.dim;
  out["layout"] = file.layout;
  Json list = Json::array();
  for (const auto& f : file.frames) {
    require(f.points.cols() == file.dim && f.points.rows() == static_cast<Eigen::Index>(file.layout.size()) &&
                f.confidence.size() == f.points.rows(),
            ErrorCode::Dimension, "keypoint frame does not match the declared layout");
    list.push_back({{"frame", f.frame}, {"points", rows_to(f.points)}, {"confidence", vector_to(f.confidence)}});
  }
  out["frames"] = list;
  return out;
}

KeypointFile keypoints_from_json(const Json& j) {
  check_header(j, "mocapkit.keypoints");
  check_keys(j, {"format", "version", "dim", "layout", "frames"}, "keypoints file");
  KeypointFile file;
  file.dim = integer(field(j, "dim"), "dim");
  if (file.dim != 2 && file.dim != 3) schema_error("dim must be 2 or 3");
  file.layout = strings_from(field(j, "layout"), "layout");
  const int k = static_cast<int>(file.layout.size());
  std::vector<int> indices;
  for (const auto& f : field(j, "frames")) {
    check_keys(f, {"frame", "points", "confidence"}, "keypoint frame");
    KeypointFrame kf;
    kf.frame = integer(field(f, "frame"), "frame");
    kf.points = rows_from(field(f, "points"), file.dim, k, "points");
    kf.confidence = vector_from(field(f, "confidence"), k, "confidence");
    if ((kf.confidence.array() < 0.0).any() || (kf.confidence.array() > 1.0).any()) {
      schema_error("confidences must lie in [0, 1]");
    }
    indices.push_back(kf.frame);
    file.frames.push_back(std::move(kf));
  }
  check_frames_monotone(indices);
  return file;
}

KeypointSet2D to_keypoint_set(const KeypointFrame& frame) {
  require(frame.points.cols() == 2, ErrorCode::Dimension, "fitting needs 2D keypoints");
  return {frame.points, frame.confidence};
}

std::string to_obj(const Points3& vertices, const Triangles& faces) {
  std::string out;
  char buf[128];
  for (Eigen::Index i = 0; i < vertices.rows(); ++i) {
    std::snprintf(buf, sizeof(buf), "v %.17g %.17g %.17g\n", vertices(i, 0), vertices(i, 1), vertices(i, 2));
    out += buf;
  }
  for (Eigen::Index f = 0; f < faces.rows(); ++f) {
    std::snprintf(buf, sizeof(buf), "f %d %d %d\n", faces(f, 0) + 1, faces(f, 1) + 1, faces(f, 2) + 1);
    out += buf;
  }
  return out;
}

Image read_png(const std::string& path) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  require(png_image_begin_read_from_file(&png, path.c_str()) != 0, ErrorCode::Io,
          "cannot read PNG '" + path + "'");
  const int channels = (png.format & PNG_FORMAT_FLAG_COLOR) ? 3 : 1;
  png.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(png));
  if (png_image_finish_read(&png, nullptr, buffer.data(), 0, nullptr) == 0) {
    png_image_free(&png);
    fail(ErrorCode::Io, "cannot decode PNG '" + path + "'");
  }
  Image image(static_cast<int>(png.height), static_cast<int>(png.width), channels);
  for (std::size_t i = 0; i < buffer.size(); ++i) image.data[i] = buffer[i];
  return image;
}

void write_png(const std::string& path, const Image& image) {
  require(image.channels == 1 || image.channels == 3, ErrorCode::Input, "PNG output needs 1 or 3 channels");
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = image.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<png_byte> buffer(image.data.size());
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    buffer[i] = static_cast<png_byte>(std::clamp(std::lround(image.data[i]), 0L, 255L));
  }
  require(png_image_write_to_file(&png, path.c_str(), 0, buffer.data(), 0, nullptr) != 0, ErrorCode::Io,
          "cannot write PNG '" + path + "'");
}

Json error_json(const std::string& code, const std::string& message) {
  return {{"error", {{"code", code}, {"message", message}}}};
}

}  // namespace mocapkit::io
