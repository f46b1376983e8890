#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "mocapkit/dataprep.hpp"
#include "mocapkit/fitting.hpp"
#include "mocapkit/integration.hpp"
#include "mocapkit/io.hpp"
#include "mocapkit/metrics.hpp"
#include "mocapkit/toy_model.hpp"

namespace fs = std::filesystem;
using namespace mocapkit;
using io::Json;

namespace {

// Portable draws: the standard distributions are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
};

AxisAngles random_rows(Rng& rng, Eigen::Index rows, double amplitude) {
  AxisAngles out(rows, 3);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (int c = 0; c < 3; ++c) out(r, c) = rng.uniform(-amplitude, amplitude);
  }
  return out;
}

void write_json(const std::string& path, const Json& j) { io::write_text(path, io::dump_canonical(j)); }

void check_layout(const std::vector<std::string>& got, const std::vector<std::string>& want,
                  const std::string& what) {
  require(got == want, ErrorCode::Schema, what + " layout does not match the model");
}

// ---- gen-model ------------------------------------------------------------

struct GenModelArgs {
  std::uint64_t seed = 0;
  std::string size = "small";
  std::string output = "model.json";
};

void run_gen_model(const GenModelArgs& a) {
  io::save_model(a.output, gen_toy_model(a.seed, size_class_from_string(a.size)));
}

// ---- synth ----------------------------------------------------------------

struct SynthArgs {
  std::string model = "model.json";
  std::uint64_t seed = 0;
  int frames = 4;
  double pose_amplitude = 0.3;
  double prediction_noise = 0.05;
  std::string params_out = "gt_params.json";
  std::string predictions_out = "predictions.json";
};

WholeBodyParams random_params(const ParametricModel& model, Rng& rng, double amplitude) {
  WholeBodyParams p = WholeBodyParams::zero(model);
  for (int c = 0; c < 3; ++c) p.phi[c] = rng.uniform(-amplitude, amplitude);
  p.theta = random_rows(rng, p.theta.rows(), amplitude);
  for (Eigen::Index k = 0; k < p.beta.size(); ++k) p.beta[k] = 0.5 * rng.normal();
  p.cam.scale = rng.uniform(90.0, 110.0);
  p.cam.translation = Vec2(rng.uniform(100.0, 124.0), rng.uniform(100.0, 124.0));
  return p;
}

void run_synth(const SynthArgs& a) {
  require(a.frames > 0, ErrorCode::Input, "--frames must be positive");
  const ParametricModel model = io::load_model(a.model);
  require(model.has_hands(), ErrorCode::InvalidModel, "synthetic predictions need a model with hands");
  Rng rng(a.seed);
  std::vector<io::ParamsFrame> gt;
  std::vector<io::PredictionFrame> preds;
  for (int f = 0; f < a.frames; ++f) {
    const WholeBodyParams p = random_params(model, rng, a.pose_amplitude);
    gt.push_back({f, p});
    io::PredictionFrame pf;
    pf.frame = f;
    BodyPrediction body = body_from_whole_body(model, p);
    body.theta += random_rows(rng, body.theta.rows(), a.prediction_noise);
    pf.body = body;
    for (HandSide side : {HandSide::Left, HandSide::Right}) {
      HandPrediction hand = hand_from_whole_body(model, p, side);
      const AxisAngle jitter = random_rows(rng, 1, a.prediction_noise).row(0).transpose();
      hand.phi = rotation_to_axis_angle(Rotation(rodrigues(jitter) * rodrigues(hand.phi)));
      hand.theta += random_rows(rng, hand.theta.rows(), a.prediction_noise);
      pf.hands.push_back(hand);
    }
    preds.push_back(std::move(pf));
  }
  write_json(a.params_out, io::params_to_json(model, gt));
  write_json(a.predictions_out, io::predictions_to_json(model, preds));
}

// ---- pose -----------------------------------------------------------------

struct PoseArgs {
  std::string model = "model.json";
  std::string params;
  std::string obj_dir;
  std::string joints3d_out;
  std::string keypoints2d_out;
  double noise_px = 0.0;
  std::uint64_t seed = 0;
};

void run_pose(const PoseArgs& a) {
  const ParametricModel model = io::load_model(a.model);
  const auto frames = io::params_from_json(model, io::read_json(a.params));
  if (!a.obj_dir.empty()) fs::create_directories(a.obj_dir);
  const std::vector<std::string> names = keypoint_names(model);
  io::KeypointFile j3d{3, names, {}};
  io::KeypointFile k2d{2, names, {}};
  Rng rng(a.seed);
  for (const auto& f : frames) {
    const Points3 verts = pose_mesh(model, f.params.pose(), f.params.beta);
    const Points3 kp = keypoints(model, verts);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(kp.rows());
    j3d.frames.push_back({f.frame, kp, ones});
    Points2 px = project(f.params.cam, kp);
    if (a.noise_px > 0.0) {
      for (Eigen::Index r = 0; r < px.rows(); ++r) {
        for (int c = 0; c < 2; ++c) px(r, c) += a.noise_px * rng.normal();
      }
    }
    k2d.frames.push_back({f.frame, px, ones});
    if (!a.obj_dir.empty()) {
      char name[32];
      std::snprintf(name, sizeof(name), "frame_%06d.obj", f.frame);
      io::write_text((fs::path(a.obj_dir) / name).string(), io::to_obj(verts, model.faces));
    }
  }
  if (!a.joints3d_out.empty()) write_json(a.joints3d_out, io::keypoints_to_json(j3d));
  if (!a.keypoints2d_out.empty()) write_json(a.keypoints2d_out, io::keypoints_to_json(k2d));
}

// ---- integrate ------------------------------------------------------------

struct IntegrateArgs {
  std::string model = "model.json";
  std::string predictions;
  std::string output = "params.json";
  bool no_wrist_conversion = false;
};

void run_integrate(const IntegrateArgs& a) {
  const ParametricModel model = io::load_model(a.model);
  const auto frames = io::predictions_from_json(model, io::read_json(a.predictions));
  CopyPasteOptions options;
  options.convert_wrist = !a.no_wrist_conversion;
  std::vector<io::ParamsFrame> out;
  for (const auto& f : frames) {
    require(f.body.has_value(), ErrorCode::Input,
            "frame " + std::to_string(f.frame) + " has no body prediction");
    out.push_back({f.frame, copy_paste(model, *f.body, f.hands, options)});
  }
  write_json(a.output, io::params_to_json(model, out));
}

// ---- fit ------------------------------------------------------------------

struct FitArgs {
  std::string model = "model.json";
  std::string init;
  std::string keypoints;
  std::string output = "fitted.json";
  std::string trace;
  int iters = 20;
  bool smooth = false;
  int jobs = 1;
  std::string mask = "default";
  std::string jacobian = "analytic";
};

FitMask mask_from_string(const std::string& s) {
  if (s == "default") return {};
  if (s == "wrists") return FitMask::wrists_only();
  if (s == "all") return FitMask::all();
  fail(ErrorCode::Input, "unknown mask '" + s + "'");
}

JacobianMode jacobian_from_string(const std::string& s) {
  if (s == "analytic") return JacobianMode::Analytic;
  if (s == "central") return JacobianMode::CentralDifference;
  fail(ErrorCode::Input, "unknown jacobian mode '" + s + "'");
}

void run_fit(const FitArgs& a) {
  require(a.jobs >= 1, ErrorCode::Input, "--jobs must be at least 1");
  const ParametricModel model = io::load_model(a.model);
  const auto init = io::params_from_json(model, io::read_json(a.init));
  const io::KeypointFile kp = io::keypoints_from_json(io::read_json(a.keypoints));
  require(kp.dim == 2, ErrorCode::Input, "fitting needs 2D keypoints");
  check_layout(kp.layout, keypoint_names(model), "keypoint");

  std::map<int, const io::KeypointFrame*> by_frame;
  for (const auto& f : kp.frames) by_frame[f.frame] = &f;
  for (const auto& f : init) {
    require(by_frame.count(f.frame) > 0, ErrorCode::Input,
            "no keypoints for frame " + std::to_string(f.frame));
  }

  FitConfig config;
  config.iterations = a.iters;
  config.mask = mask_from_string(a.mask);
  config.jacobian = jacobian_from_string(a.jacobian);
  config.validate();

  const std::size_t n = init.size();
  std::vector<FitResult> results(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        const auto& f = init[i];
        results[i] = fit(model, f.params, f.params.cam, io::to_keypoint_set(*by_frame.at(f.frame)), config);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int threads = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(a.jobs), std::max<std::size_t>(n, 1)));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<WholeBodyParams> fitted;
  for (const auto& r : results) fitted.push_back(r.params);
  if (a.smooth) fitted = temporal_smooth(fitted);
  std::vector<io::ParamsFrame> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({init[i].frame, fitted[i]});
  write_json(a.output, io::params_to_json(model, out));

  if (!a.trace.empty()) {
    Json frames = Json::array();
    for (std::size_t i = 0; i < n; ++i) {
      frames.push_back({{"frame", init[i].frame},
                        {"initial_cost", results[i].initial_cost},
                        {"costs", results[i].cost_trace},
                        {"rms_px", results[i].rms_px}});
    }
    write_json(a.trace, {{"format", "mocapkit.trace"}, {"version", io::kSchemaVersion}, {"frames", frames}});
  }
}

// ---- eval -----------------------------------------------------------------

struct EvalArgs {
  std::string pred;
  std::string gt;
  std::string metric = "3d";
  std::vector<double> range;
  int samples = kDefaultCurveSamples;
  std::string alignment = "none";
  std::optional<double> unit_scale;
  std::string output;
  std::string csv;
};

Eigen::MatrixXd stack_frames(const io::KeypointFile& file, Alignment alignment, double unit_scale) {
  Eigen::Index rows = 0;
  for (const auto& f : file.frames) rows += f.points.rows();
  Eigen::MatrixXd out(rows, file.dim);
  Eigen::Index at = 0;
  for (const auto& f : file.frames) {
    Eigen::MatrixXd p = unit_scale * f.points;
    if (alignment == Alignment::RootRelative) p.rowwise() -= p.row(0).eval();
    out.middleRows(at, p.rows()) = p;
    at += p.rows();
  }
  return out;
}

void run_eval(const EvalArgs& a) {
  require(a.metric == "3d" || a.metric == "2d", ErrorCode::Input, "--metric must be 3d or 2d");
  const int dim = a.metric == "3d" ? 3 : 2;
  // Model units are metres and 3D thresholds millimetres.
  const double unit_scale = a.unit_scale.value_or(dim == 3 ? 1000.0 : 1.0);
  require(unit_scale > 0.0 && std::isfinite(unit_scale), ErrorCode::Input, "--unit-scale must be positive");
  double lo = dim == 3 ? 20.0 : 0.0;
  double hi = dim == 3 ? 50.0 : 30.0;
  if (!a.range.empty()) {
    require(a.range.size() == 2, ErrorCode::Input, "--range takes two values");
    lo = a.range[0];
    hi = a.range[1];
  }
  const Alignment alignment = alignment_from_string(a.alignment);
  const io::KeypointFile pred = io::keypoints_from_json(io::read_json(a.pred));
  const io::KeypointFile gt = io::keypoints_from_json(io::read_json(a.gt));
  require(pred.dim == dim && gt.dim == dim, ErrorCode::Input, "keypoint dimension does not match --metric");
  require(pred.layout == gt.layout, ErrorCode::Schema, "prediction and ground-truth layouts differ");
  require(pred.frames.size() == gt.frames.size(), ErrorCode::Input, "prediction and ground truth frame counts differ");
  for (std::size_t i = 0; i < pred.frames.size(); ++i) {
    require(pred.frames[i].frame == gt.frames[i].frame, ErrorCode::Input, "frame indices differ");
  }
  require(!pred.frames.empty(), ErrorCode::Input, "no frames to evaluate");

  const Eigen::MatrixXd p = stack_frames(pred, alignment, unit_scale);
  const Eigen::MatrixXd g = stack_frames(gt, alignment, unit_scale);
  const PckCurve curve = pck_curve(p, g, lo, hi, a.samples);
  const double mean_error = (p - g).rowwise().norm().mean();

  Json report = {{"format", "mocapkit.eval"},
                 {"version", io::kSchemaVersion},
                 {"metric", a.metric},
                 {"alignment", to_string(alignment)},
                 {"range", {lo, hi}},
                 {"samples", a.samples},
                 {"frames", static_cast<int>(pred.frames.size())},
                 {"joints", static_cast<int>(pred.layout.size())},
                 {"auc", auc(curve)},
                 {"mean_error", mean_error},
                 {"unit_scale", unit_scale},
                 {"thresholds", io::Json(std::vector<double>(curve.thresholds.begin(), curve.thresholds.end()))},
                 {"pck", io::Json(std::vector<double>(curve.values.begin(), curve.values.end()))}};
  const std::string text = io::dump_canonical(report);
  if (a.output.empty()) {
    std::cout << text;
  } else {
    io::write_text(a.output, text);
  }
  if (!a.csv.empty()) {
    std::string csv = "threshold,pck\n";
    char line[64];
    for (Eigen::Index i = 0; i < curve.thresholds.size(); ++i) {
      std::snprintf(line, sizeof(line), "%.17g,%.17g\n", curve.thresholds[i], curve.values[i]);
      csv += line;
    }
    io::write_text(a.csv, csv);
  }
}

// ---- prep -----------------------------------------------------------------

struct PrepArgs {
  std::string keypoints;
  std::string config;
  std::string output = "prepped.json";
};

void run_prep(const PrepArgs& a) {
  io::KeypointFile file = io::keypoints_from_json(io::read_json(a.keypoints));
  const Json config = io::read_json(a.config);
  require(config.is_object(), ErrorCode::Schema, "prep config must be an object");
  for (const auto& [key, _] : config.items()) {
    require(key == "joint_map" || key == "rescale" || key == "flip", ErrorCode::Schema,
            "unknown field '" + key + "' in prep config");
  }
  try {
    if (config.contains("joint_map")) {
      const Json& jm = config["joint_map"];
      JointMap map;
      map.target_of_source = jm.at("target_of_source").get<std::vector<int>>();
      const auto layout = jm.at("layout").get<std::vector<std::string>>();
      map.target_size = static_cast<int>(layout.size());
      for (auto& f : file.frames) {
        f.points = reorder_joints(f.points, map);
        Eigen::MatrixXd conf = reorder_joints(f.confidence, map);
        f.confidence = conf.col(0);
      }
      file.layout = layout;
    }
    if (config.contains("rescale")) {
      const Json& rs = config["rescale"];
      const double reference = rs.at("reference_length").get<double>();
      const auto pair = rs.value("knuckle_pair", std::vector<int>{4, 5});
      require(pair.size() == 2, ErrorCode::Schema, "knuckle_pair must hold two indices");
      const int anchor = rs.value("anchor", 0);
      for (auto& f : file.frames) f.points = rescale_keypoints(f.points, reference, {pair[0], pair[1]}, anchor);
    }
    if (config.contains("flip")) {
      require(file.dim == 2, ErrorCode::Input, "flip applies to 2D keypoints");
      const double width = config["flip"].at("image_width").get<double>();
      for (auto& f : file.frames) f.points = flip_points_2d(Points2(f.points), width);
    }
  } catch (const Json::exception& e) {
    fail(ErrorCode::Schema, std::string("prep config: ") + e.what());
  }
  write_json(a.output, io::keypoints_to_json(file));
}

// ---- blur -----------------------------------------------------------------

struct BlurArgs {
  std::string input;
  std::string output;
  double length = 5.0;
  double angle_deg = 0.0;
};

void run_blur(const BlurArgs& a) {
  const BlurKernel kernel = motion_blur_kernel(a.length, a.angle_deg * std::numbers::pi / 180.0);
  io::write_png(a.output, convolve2d(io::read_png(a.input), kernel));
}

// ---- bbox -----------------------------------------------------------------

struct BboxArgs {
  std::string model = "model.json";
  std::string params;
  double margin = 0.2;
};

void run_bbox(const BboxArgs& a) {
  const ParametricModel model = io::load_model(a.model);
  const auto frames = io::params_from_json(model, io::read_json(a.params));
  Json list = Json::array();
  for (const auto& f : frames) {
    Json hands = Json::object();
    for (HandSide side : {HandSide::Left, HandSide::Right}) {
      const SquareBox box = hand_bbox_from_body(model, f.params, f.params.cam, side, a.margin);
      hands[to_string(side)] = {{"center", {box.center.x(), box.center.y()}}, {"size", box.size}};
    }
    list.push_back({{"frame", f.frame}, {"hands", hands}});
  }
  std::cout << io::dump_canonical({{"format", "mocapkit.boxes"}, {"version", io::kSchemaVersion}, {"frames", list}});
}

int report_error(const std::string& code, const std::string& message, int status) {
  std::cerr << io::error_json(code, message).dump() << "\n";
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Whole-body capture toolkit: toy model, posing, integration, fitting, evaluation"};
  app.require_subcommand(1);

  GenModelArgs gen;
  auto* c_gen = app.add_subcommand("gen-model", "Write a procedural toy model asset");
  c_gen->add_option("--seed", gen.seed);
  c_gen->add_option("--size", gen.size)->check(CLI::IsMember({"small", "medium"}));
  c_gen->add_option("-o,--output", gen.output);

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Sample ground-truth parameters and noisy module predictions");
  c_synth->add_option("-m,--model", synth.model);
  c_synth->add_option("--seed", synth.seed);
  c_synth->add_option("--frames", synth.frames);
  c_synth->add_option("--pose-amplitude", synth.pose_amplitude);
  c_synth->add_option("--prediction-noise", synth.prediction_noise);
  c_synth->add_option("--params-out", synth.params_out);
  c_synth->add_option("--predictions-out", synth.predictions_out);

  PoseArgs pose;
  auto* c_pose = app.add_subcommand("pose", "Pose the model: OBJ meshes, 3D joints, projected 2D keypoints");
  c_pose->add_option("-m,--model", pose.model);
  c_pose->add_option("-p,--params", pose.params)->required();
  c_pose->add_option("--obj-dir", pose.obj_dir);
  c_pose->add_option("--joints3d", pose.joints3d_out);
  c_pose->add_option("--keypoints2d", pose.keypoints2d_out);
  c_pose->add_option("--noise-px", pose.noise_px);
  c_pose->add_option("--seed", pose.seed);

  IntegrateArgs integ;
  auto* c_int = app.add_subcommand("integrate", "Fuse body and hand predictions into whole-body parameters");
  c_int->add_option("-m,--model", integ.model);
  c_int->add_option("-P,--predictions", integ.predictions)->required();
  c_int->add_option("-o,--output", integ.output);
  c_int->add_flag("--no-wrist-conversion", integ.no_wrist_conversion);

  FitArgs fitargs;
  auto* c_fit = app.add_subcommand("fit", "Refine parameters against 2D keypoints");
  c_fit->add_option("-m,--model", fitargs.model);
  c_fit->add_option("-i,--init", fitargs.init)->required();
  c_fit->add_option("-k,--keypoints", fitargs.keypoints)->required();
  c_fit->add_option("-o,--output", fitargs.output);
  c_fit->add_option("--trace", fitargs.trace);
  c_fit->add_option("--iters", fitargs.iters);
  c_fit->add_flag("--smooth", fitargs.smooth);
  c_fit->add_option("--jobs", fitargs.jobs);
  c_fit->add_option("--mask", fitargs.mask)->check(CLI::IsMember({"default", "wrists", "all"}));
  c_fit->add_option("--jacobian", fitargs.jacobian)->check(CLI::IsMember({"analytic", "central"}));

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "PCK curve and AUC of predicted against ground-truth joints");
  c_eval->add_option("--pred", eval.pred)->required();
  c_eval->add_option("--gt", eval.gt)->required();
  c_eval->add_option("--metric", eval.metric)->check(CLI::IsMember({"3d", "2d"}));
  c_eval->add_option("--range", eval.range)->expected(2);
  c_eval->add_option("--samples", eval.samples);
  c_eval->add_option("--alignment", eval.alignment)->check(CLI::IsMember({"none", "root-relative"}));
  c_eval->add_option("--unit-scale", eval.unit_scale);
  c_eval->add_option("-o,--output", eval.output);
  c_eval->add_option("--csv", eval.csv);

  PrepArgs prep;
  auto* c_prep = app.add_subcommand("prep", "Reorder, rescale and flip keypoints");
  c_prep->add_option("-k,--keypoints", prep.keypoints)->required();
  c_prep->add_option("-c,--config", prep.config)->required();
  c_prep->add_option("-o,--output", prep.output);

  BlurArgs blur;
  auto* c_blur = app.add_subcommand("blur", "Apply a linear motion blur to a PNG image");
  c_blur->add_option("input", blur.input)->required();
  c_blur->add_option("output", blur.output)->required();
  c_blur->add_option("--length", blur.length);
  c_blur->add_option("--angle", blur.angle_deg, "degrees");

  BboxArgs bbox;
  auto* c_bbox = app.add_subcommand("bbox", "Hand crop boxes from whole-body parameters");
  c_bbox->add_option("-m,--model", bbox.model);
  c_bbox->add_option("-p,--params", bbox.params)->required();
  c_bbox->add_option("--margin", bbox.margin);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", e.what(), 2);
  }

  try {
    if (c_gen->parsed()) run_gen_model(gen);
    if (c_synth->parsed()) run_synth(synth);
    if (c_pose->parsed()) run_pose(pose);
    if (c_int->parsed()) run_integrate(integ);
    if (c_fit->parsed()) run_fit(fitargs);
    if (c_eval->parsed()) run_eval(eval);
    if (c_prep->parsed()) run_prep(prep);
    if (c_blur->parsed()) run_blur(blur);
    if (c_bbox->parsed()) run_bbox(bbox);
  } catch (const Error& e) {
    return report_error(to_string(e.code()), e.what(), 1);
  } catch (const fs::filesystem_error& e) {
    return report_error(to_string(ErrorCode::Io), e.what(), 1);
  } catch (const std::exception& e) {
    return report_error("internal", e.what(), 1);
  }
  return 0;
}
