#include <doctest.h>

#include <cstdlib>
#include <functional>
#include <filesystem>
#include <limits>

#include "mocapkit/io.hpp"
#include "mocapkit/toy_model.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

using namespace mocapkit;
using io::Json;

namespace {

const ParametricModel& toy() {
  static const ParametricModel model = gen_toy_model(0);
  return model;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::Numeric;
}

std::filesystem::path temp_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "mocapkit_io_test";
  std::filesystem::create_directories(dir);
  return dir;
}

std::vector<io::ParamsFrame> random_frames(int count) {
  std::mt19937_64 rng(1);
  std::vector<io::ParamsFrame> frames;
  for (int f = 0; f < count; ++f) frames.push_back({3 * f, synthetic::random_truth(toy(), rng)});
  return frames;
}

}  // namespace

TEST_CASE("canonical json layout") {
  const Json j = {{"b", {1, 2.5, -0.0}}, {"a", {{"y", nullptr}, {"x", "s"}}}, {"c", Json::array()},
                  {"d", Json::array({Json::array({1, 2}), Json::array({3, 4})})}, {"e", 0.1}};
  const std::string expected =
      "{\n"
      "  \"a\": {\n"
      "    \"x\": \"s\",\n"
      "    \"y\": null\n"
      "  },\n"
      "  \"b\": [1, 2.5, 0],\n"
      "  \"c\": [],\n"
      "  \"d\": [\n"
      "    [1, 2],\n"
      "    [3, 4]\n"
      "  ],\n"
      "  \"e\": 0.10000000000000001\n"
      "}\n";
  CHECK(io::dump_canonical(j) == expected);
}

TEST_CASE("canonical json refuses non-finite numbers") {
  CHECK(code_of([] { io::dump_canonical(Json{{"x", std::numeric_limits<double>::infinity()}}); }) ==
        ErrorCode::Schema);
  CHECK(code_of([] { io::dump_canonical(Json{{"x", std::nan("")}}); }) == ErrorCode::Schema);
}

TEST_CASE("doubles survive a text round trip exactly") {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 1000; ++i) {
    const double v = oracle::uniform(rng, -1e3, 1e3) * std::pow(10.0, oracle::uniform(rng, -12, 12));
    const std::string text = io::dump_canonical(Json::array({v}));
    CHECK(Json::parse(text)[0].get<double>() == v);
  }
}

TEST_CASE("model asset round trip is byte identical") {
  const std::string a = io::dump_canonical(io::model_to_json(toy()));
  const ParametricModel back = io::model_from_json(Json::parse(a));
  CHECK(io::dump_canonical(io::model_to_json(back)) == a);
  CHECK(back.template_vertices == toy().template_vertices);
  CHECK(back.shape_basis == toy().shape_basis);
  CHECK(back.tree.parents() == toy().tree.parents());
  CHECK(back.reference_knuckle_length == toy().reference_knuckle_length);
}

TEST_CASE("model asset validation") {
  const Json good = io::model_to_json(toy());
  SUBCASE("unknown key") {
    Json j = good;
    j["colour"] = 1;
    CHECK(code_of([&] { io::model_from_json(j); }) == ErrorCode::Schema);
    CHECK_NOTHROW(io::model_from_json(j, false));
  }
  SUBCASE("wrong version") {
    Json j = good;
    j["version"] = 2;
    CHECK(code_of([&] { io::model_from_json(j); }) == ErrorCode::Schema);
  }
  SUBCASE("missing field") {
    Json j = good;
    j.erase("faces");
    CHECK(code_of([&] { io::model_from_json(j); }) == ErrorCode::Schema);
  }
  SUBCASE("reserved correctives") {
    Json j = good;
    j["pose_correctives"] = nullptr;
    CHECK_NOTHROW(io::model_from_json(j));
    j["pose_correctives"] = Json::array({1});
    CHECK(code_of([&] { io::model_from_json(j); }) == ErrorCode::Schema);
  }
  SUBCASE("weights break the model invariants") {
    Json j = good;
    j["skin_weights"]["triplets"][0][2] = 0.5;
    CHECK(code_of([&] { io::model_from_json(j); }) == ErrorCode::InvalidModel);
  }
  SUBCASE("cyclic parents") {
    Json j = good;
    j["parents"][3] = 7;
    CHECK(code_of([&] { io::model_from_json(j); }) == ErrorCode::Schema);
  }
}

TEST_CASE("params round trip and layout checks") {
  const auto frames = random_frames(3);
  const std::string text = io::dump_canonical(io::params_to_json(toy(), frames));
  const auto back = io::params_from_json(toy(), Json::parse(text));
  REQUIRE(back.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(back[i].frame == frames[i].frame);
    CHECK(back[i].params == frames[i].params);
  }
  CHECK(io::dump_canonical(io::params_to_json(toy(), back)) == text);

  Json j = Json::parse(text);
  j["frames"][1]["frame"] = 0;
  CHECK(code_of([&] { io::params_from_json(toy(), j); }) == ErrorCode::Schema);
  j = Json::parse(text);
  j["joint_names"][0] = "hip";
  CHECK(code_of([&] { io::params_from_json(toy(), j); }) == ErrorCode::Schema);
  j = Json::parse(text);
  j["frames"][0]["camera"]["scale"] = -1;
  CHECK(code_of([&] { io::params_from_json(toy(), j); }) == ErrorCode::Schema);
  j = Json::parse(text);
  j["frames"][0]["pose"].erase(0);
  CHECK(code_of([&] { io::params_from_json(toy(), j); }) == ErrorCode::Schema);
}

TEST_CASE("predictions round trip") {
  const auto frames = random_frames(2);
  std::vector<io::PredictionFrame> preds;
  for (const auto& f : frames) {
    io::PredictionFrame p;
    p.frame = f.frame;
    p.body = body_from_whole_body(toy(), f.params);
    p.hands.push_back(hand_from_whole_body(toy(), f.params, HandSide::Right));
    preds.push_back(p);
  }
  io::PredictionFrame empty;
  empty.frame = 100;
  preds.push_back(empty);
  const std::string text = io::dump_canonical(io::predictions_to_json(toy(), preds));
  const auto back = io::predictions_from_json(toy(), Json::parse(text));
  REQUIRE(back.size() == 3);
  CHECK_FALSE(back[2].body.has_value());
  CHECK(back[0].hands.at(0).side == HandSide::Right);
  CHECK(back[0].hands.at(0).theta == preds[0].hands[0].theta);
  CHECK(io::dump_canonical(io::predictions_to_json(toy(), back)) == text);

  Json j = Json::parse(text);
  j["frames"][0]["hands"][0]["side"] = "middle";
  CHECK(code_of([&] { io::predictions_from_json(toy(), j); }) == ErrorCode::Schema);
}

TEST_CASE("keypoints round trip and validation") {
  io::KeypointFile file{2, {"a", "b", "c"}, {}};
  file.frames.push_back({0, Eigen::MatrixXd::Random(3, 2), Eigen::Vector3d(1, 0.5, 0)});
  file.frames.push_back({4, Eigen::MatrixXd::Random(3, 2), Eigen::Vector3d(1, 1, 1)});
  const std::string text = io::dump_canonical(io::keypoints_to_json(file));
  const io::KeypointFile back = io::keypoints_from_json(Json::parse(text));
  CHECK(back.frames[1].points == file.frames[1].points);
  CHECK(io::dump_canonical(io::keypoints_to_json(back)) == text);

  Json j = Json::parse(text);
  j["frames"][0]["confidence"][0] = 1.5;
  CHECK(code_of([&] { io::keypoints_from_json(j); }) == ErrorCode::Schema);
  j = Json::parse(text);
  j["dim"] = 4;
  CHECK(code_of([&] { io::keypoints_from_json(j); }) == ErrorCode::Schema);
  j = Json::parse(text);
  j["frames"][0]["extra"] = 1;
  CHECK(code_of([&] { io::keypoints_from_json(j); }) == ErrorCode::Schema);
}

TEST_CASE("files on disk and the asset search path") {
  const auto dir = temp_dir();
  const std::string path = (dir / "model.json").string();
  io::save_model(path, toy());
  CHECK(io::read_text(path) == io::dump_canonical(io::model_to_json(toy())));
  setenv("MOCAPKIT_ASSET_DIR", dir.c_str(), 1);
  CHECK(io::resolve_asset_path("model.json") == path);
  CHECK_NOTHROW(io::load_model("model.json"));
  unsetenv("MOCAPKIT_ASSET_DIR");
  CHECK(code_of([&] { io::read_text((dir / "missing.json").string()); }) == ErrorCode::Io);
  io::write_text((dir / "broken.json").string(), "{ nope");
  CHECK(code_of([&] { io::read_json((dir / "broken.json").string()); }) == ErrorCode::Schema);
}

TEST_CASE("obj export") {
  Points3 v(3, 3);
  v << 0, 0, 0, 1, 0, 0, 0, 0.5, 0;
  Triangles f(1, 3);
  f << 0, 1, 2;
  CHECK(io::to_obj(v, f) == "v 0 0 0\nv 1 0 0\nv 0 0.5 0\nf 1 2 3\n");
}

TEST_CASE("png round trip") {
  const auto dir = temp_dir();
  for (int channels : {1, 3}) {
    Image img(5, 7, channels);
    for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<double>((i * 37) % 256);
    const std::string path = (dir / ("img" + std::to_string(channels) + ".png")).string();
    io::write_png(path, img);
    const Image back = io::read_png(path);
    CHECK(back.height == 5);
    CHECK(back.width == 7);
    CHECK(back.channels == channels);
    CHECK(back.data == img.data);
  }
  CHECK(code_of([&] { io::read_png((dir / "missing.png").string()); }) == ErrorCode::Io);
}

TEST_CASE("error json") {
  CHECK(io::error_json("schema", "bad").dump() == R"({"error":{"code":"schema","message":"bad"}})");
}
