#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mocapkit/dataprep.hpp"
#include "mocapkit/fitting.hpp"
#include "mocapkit/integration.hpp"
#include "mocapkit/model.hpp"

namespace mocapkit::io {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

// Deterministic JSON text: sorted keys, two-space indentation, arrays of
// scalars on one line, floating-point values with 17 significant digits.
std::string dump_canonical(const Json& value);

Json read_json(const std::string& path);
std::string read_text(const std::string& path);
void write_text(const std::string& path, const std::string& text);

// Resolves a relative asset path against $MOCAPKIT_ASSET_DIR when it does not
// exist relative to the working directory.
std::string resolve_asset_path(const std::string& path);

// ---- model asset --------------------------------------------------------

Json model_to_json(const ParametricModel& model);
// Strict mode rejects unknown keys. The result is validated.
ParametricModel model_from_json(const Json& j, bool strict = true);
ParametricModel load_model(const std::string& path, bool strict = true);
void save_model(const std::string& path, const ParametricModel& model);

// ---- whole-body parameter sequences ------------------------------------

struct ParamsFrame {
  int frame = 0;
  WholeBodyParams params;
};

Json params_to_json(const ParametricModel& model, const std::vector<ParamsFrame>& frames);
std::vector<ParamsFrame> params_from_json(const ParametricModel& model, const Json& j);

// ---- regressor predictions ----------------------------------------------

struct PredictionFrame {
  int frame = 0;
  std::optional<BodyPrediction> body;
  std::vector<HandPrediction> hands;
};

Json predictions_to_json(const ParametricModel& model, const std::vector<PredictionFrame>& frames);
std::vector<PredictionFrame> predictions_from_json(const ParametricModel& model, const Json& j);

// ---- keypoints ----------------------------------------------------------

struct KeypointFrame {
  int frame = 0;
  Eigen::MatrixXd points;  // (K, dim)
  Eigen::VectorXd confidence;
};

struct KeypointFile {
  int dim = 2;
  std::vector<std::string> layout;
  std::vector<KeypointFrame> frames;
};

Json keypoints_to_json(const KeypointFile& file);
KeypointFile keypoints_from_json(const Json& j);
KeypointSet2D to_keypoint_set(const KeypointFrame& frame);

// ---- misc ---------------------------------------------------------------

std::string to_obj(const Points3& vertices, const Triangles& faces);

// 8-bit PNG to/from an image with values in [0, 255].
Image read_png(const std::string& path);
void write_png(const std::string& path, const Image& image);

Json error_json(const std::string& code, const std::string& message);

}  // namespace mocapkit::io
