#include "commands.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "epiforge/error.hpp"
#include "epiforge/heatmap.hpp"
#include "epiforge/io.hpp"
#include "epiforge/metrics.hpp"
#include "epiforge/pipeline.hpp"
#include "epiforge/pss.hpp"
#include "epiforge/synth.hpp"

namespace epiforge::cli {

namespace {

using io::json;

constexpr const char* kCalibrationVersion = "epiforge.calibration/1";

json number_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json matrix_json(const Mat3& m) {
  json rows = json::array();
  for (int r = 0; r < 3; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2)});
  return rows;
}

void emit(const std::string& path, const json& doc) {
  const std::string text = io::to_text(doc);
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
  } else {
    io::write_text(path, text);
  }
}

// Accepts a pose file or a scene file carrying ground truth.
std::vector<Pose3D> load_poses(const std::string& path) {
  const json doc = io::read_json(path);
  if (doc.is_object() && doc.value("version", "") == io::kSceneVersion) {
    auto scene = io::scene_from_json(doc);
    if (!scene.gt_poses) throw Error(ErrorKind::ParseError, path + ": scene has no ground-truth poses");
    return *scene.gt_poses;
  }
  return io::pose_file_from_json(doc).poses_3d();
}

bool is_calibration_kind(ErrorKind k) {
  return k == ErrorKind::InsufficientInliers || k == ErrorKind::DegenerateConfiguration ||
         k == ErrorKind::AmbiguousCheirality;
}

// Runs a command body and maps library errors to the command's exit code.
int guarded(int failure_code, const std::function<void()>& body, bool calibration_stage = false) {
  try {
    body();
    return kOk;
  } catch (const Error& e) {
    std::cerr << "epiforge: " << e.what() << "\n";
    if (e.kind() == ErrorKind::ParseError || e.kind() == ErrorKind::InvalidArgument) return kUsage;
    if (calibration_stage && is_calibration_kind(e.kind())) return kCalibration;
    return failure_code;
  } catch (const std::exception& e) {
    std::cerr << "epiforge: " << e.what() << "\n";
    return failure_code;
  }
}

json calibration_json(const PairCalibration& p) {
  const auto& g = p.geometry;
  json out = {{"first", p.first}, {"second", p.second}};
  if (p.frame) out["frame"] = *p.frame;
  out["correspondences"] = p.correspondences;
  out["F"] = matrix_json(g.ransac.F.F);
  out["E"] = matrix_json(g.E.E);
  out["R"] = matrix_json(g.selection.pose.R);
  out["t"] = {g.selection.pose.t(0), g.selection.pose.t(1), g.selection.pose.t(2)};
  out["hypothesis"] = g.selection.index;
  out["cheirality_counts"] = g.selection.counts;
  out["num_inliers"] = g.ransac.num_inliers;
  out["inlier_ratio"] = p.correspondences ? double(g.ransac.num_inliers) / double(p.correspondences) : 0.0;
  out["iterations"] = g.ransac.iterations;
  out["rotation_error_deg"] = number_json(p.rotation_error * 180.0 / std::numbers::pi);
  return out;
}

struct SynthArgs {
  std::size_t cameras = 4;
  std::size_t frames = 100;
  double noise = 0.0;
  double occlusion = 0.0;
  double outliers = 0.0;
  std::uint64_t seed = 0;
  std::string out;
  std::string gt_out;
};

struct RansacArgs {
  double threshold = 2.0;
  std::size_t max_iter = 2000;
  std::uint64_t seed = 0;
  bool pool_frames = false;

  CalibrationOptions options() const {
    CalibrationOptions o;
    o.ransac.threshold = threshold;
    o.ransac.max_iterations = max_iter;
    o.ransac.seed = seed;
    o.pool_frames = pool_frames;
    return o;
  }
};

void add_ransac_flags(CLI::App* cmd, RansacArgs& args) {
  cmd->add_option("--threshold", args.threshold, "Sampson inlier threshold, px")->check(CLI::PositiveNumber);
  cmd->add_option("--max-iter", args.max_iter, "RANSAC iteration cap")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", args.seed, "RANSAC seed");
  cmd->add_flag("--pool-frames", args.pool_frames, "Pool correspondences over all frames");
}

struct CalibrateArgs {
  std::string scene;
  RansacArgs ransac;
  std::string out;
};

struct TriangulateArgs {
  std::string scene;
  std::string extrinsics = "given";
  std::string fusion = "medoid";
  bool skip_bad_frames = false;
  RansacArgs ransac;
  std::string out;
};

struct EvaluateArgs {
  std::string pred;
  std::string gt;
  std::size_t root = 0;
  bool no_root_centering = false;
  double pck_threshold = 150.0;
  std::string pss_model;
  std::string out;
};

struct PssArgs {
  std::string gt;
  std::string pred;
  std::string model;
  std::size_t k = 50;
  std::size_t runs = 20;
  std::uint64_t seed = 0;
  std::string out;
};

struct DecodeArgs {
  std::string volume;
  double temperature = 1.0;
  bool two_d = false;
  std::string out;
};

int synth(const SynthArgs& a) {
  return guarded(kUsage, [&] {
    SceneOptions o;
    o.n_cameras = a.cameras;
    o.n_frames = a.frames;
    o.observation.noise_sigma = a.noise;
    o.observation.occlusion_rate = a.occlusion;
    o.observation.outlier_rate = a.outliers;
    o.seed = a.seed;
    const auto scene = io::scene_from_synthetic(generate_scene(o));
    emit(a.out, io::scene_to_json(scene));
    if (!a.gt_out.empty()) emit(a.gt_out, io::pose_file_to_json(io::pose_file_from_poses(*scene.gt_poses)));
  });
}

int calibrate(const CalibrateArgs& a) {
  return guarded(kCalibration, [&] {
    const auto scene = io::scene_from_json(io::read_json(a.scene));
    const auto opts = a.ransac.options();
    const auto pairs = calibrate_scene(scene, opts);
    json list = json::array();
    for (const auto& p : pairs) list.push_back(calibration_json(p));
    emit(a.out, {{"version", kCalibrationVersion},
                 {"pool_frames", opts.pool_frames},
                 {"threshold", opts.ransac.threshold},
                 {"max_iterations", opts.ransac.max_iterations},
                 {"seed", opts.ransac.seed},
                 {"pairs", list}});
  });
}

int triangulate(const TriangulateArgs& a) {
  return guarded(
      kTriangulation,
      [&] {
        const auto scene = io::scene_from_json(io::read_json(a.scene));
        TriangulateSceneOptions o;
        o.extrinsics = a.extrinsics == "estimated" ? ExtrinsicsSource::Estimated : ExtrinsicsSource::Given;
        o.calibration = a.ransac.options();
        o.triangulation.fusion = a.fusion == "geometric-median" ? FusionMethod::GeometricMedian : FusionMethod::Medoid;
        o.skip_bad_frames = a.skip_bad_frames;
        emit(a.out, io::pose_file_to_json(triangulate_scene(scene, o)));
      },
      true);
}

int evaluate(const EvaluateArgs& a) {
  return guarded(kEvaluation, [&] {
    const auto preds = load_poses(a.pred);
    const auto gts = load_poses(a.gt);
    MetricOptions o;
    if (a.no_root_centering) {
      o.root_joint.reset();
    } else {
      o.root_joint = a.root;
    }
    o.pck_threshold = a.pck_threshold;
    const auto r = evaluate_poses(preds, gts, o);
    json out = {{"mpjpe", number_json(r.mpjpe)},   {"nmpjpe", number_json(r.nmpjpe)},
                {"pmpjpe", number_json(r.pmpjpe)}, {"pck", number_json(r.pck)},
                {"npck", number_json(r.npck)},     {"pck_threshold", o.pck_threshold},
                {"n_poses", r.n_poses},            {"n_skipped", r.n_skipped}};
    if (!a.pss_model.empty()) {
      const auto model = io::cluster_model_from_json(io::read_json(a.pss_model));
      const auto p = mpss(preds, gts, model);
      out["mpss"] = number_json(p.mpss);
      out["pss_k"] = p.k;
    }
    emit(a.out, out);
  });
}

int pss_fit(const PssArgs& a) {
  return guarded(kClustering, [&] {
    const auto gts = load_poses(a.gt);
    emit(a.out, io::cluster_model_to_json(fit_clusters(gts, a.k, a.seed)));
  });
}

int pss_stability(const PssArgs& a) {
  return guarded(kClustering, [&] {
    const auto gts = load_poses(a.gt);
    const double iou = stability_iou(gts, a.k, a.runs, a.seed);
    emit(a.out, {{"k", a.k}, {"runs", a.runs}, {"seed", a.seed}, {"iou", iou}});
  });
}

int pss_score(const PssArgs& a) {
  return guarded(kClustering, [&] {
    const auto preds = load_poses(a.pred);
    const auto gts = load_poses(a.gt);
    const auto model = io::cluster_model_from_json(io::read_json(a.model));
    const auto r = mpss(preds, gts, model);
    emit(a.out, {{"k", r.k}, {"mpss", number_json(r.mpss)}, {"per_pose", r.per_pose}});
  });
}

int decode(const DecodeArgs& a) {
  return guarded(kUsage, [&] {
    std::ifstream in(a.volume, std::ios::binary);
    if (!in) throw Error(ErrorKind::ParseError, "cannot open " + a.volume);
    const auto volume = read_volume(in);
    json out = a.two_d ? io::pose2d_to_json(soft_argmax_2d(volume, a.temperature))
                       : io::pose3d_to_json(soft_argmax_3d(volume, a.temperature));
    out["temperature"] = a.temperature;
    emit(a.out, out);
  });
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Multi-view pose geometry and evaluation tools", "epiforge"};
  app.require_subcommand(1);
  std::function<int()> action;

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic multi-camera scene");
  synth_cmd->add_option("--cameras", synth_args.cameras, "Number of cameras (n >= 2)");
  synth_cmd->add_option("--frames", synth_args.frames, "Number of frames");
  synth_cmd->add_option("--noise", synth_args.noise, "2D noise sigma, px");
  synth_cmd->add_option("--occlusion", synth_args.occlusion, "Per-joint occlusion probability");
  synth_cmd->add_option("--outliers", synth_args.outliers, "Per-joint outlier probability");
  synth_cmd->add_option("--seed", synth_args.seed, "Scene seed");
  synth_cmd->add_option("-o,--out", synth_args.out, "Scene output path (stdout if omitted)");
  synth_cmd->add_option("--gt-out", synth_args.gt_out, "Also write ground-truth poses as a pose file");
  synth_cmd->require_subcommand(0, 1);
  synth_cmd->add_subcommand("generate", "Same as synth")->fallthrough();
  synth_cmd->callback([&] {
    if (synth_args.cameras < 2) throw CLI::ValidationError("--cameras", "a rig needs n >= 2 cameras");
    action = [&] { return synth(synth_args); };
  });

  CalibrateArgs cal_args;
  auto* cal_cmd = app.add_subcommand("calibrate", "Estimate relative pose for each consecutive camera pair");
  cal_cmd->add_option("--scene", cal_args.scene, "Scene file")->required();
  add_ransac_flags(cal_cmd, cal_args.ransac);
  cal_cmd->add_option("-o,--out", cal_args.out, "Report output path (stdout if omitted)");
  cal_cmd->callback([&] { action = [&] { return calibrate(cal_args); }; });

  TriangulateArgs tri_args;
  auto* tri_cmd = app.add_subcommand("triangulate", "Triangulate 3D poses for every frame");
  tri_cmd->add_option("--scene", tri_args.scene, "Scene file")->required();
  tri_cmd->add_option("--extrinsics", tri_args.extrinsics, "given or estimated")
      ->check(CLI::IsMember({"given", "estimated"}));
  tri_cmd->add_option("--fusion", tri_args.fusion, "medoid or geometric-median")
      ->check(CLI::IsMember({"medoid", "geometric-median"}));
  tri_cmd->add_flag("--skip-bad-frames", tri_args.skip_bad_frames, "Emit invisible poses for failed frames");
  add_ransac_flags(tri_cmd, tri_args.ransac);
  tri_cmd->add_option("-o,--out", tri_args.out, "Pose output path (stdout if omitted)");
  tri_cmd->callback([&] { action = [&] { return triangulate(tri_args); }; });

  EvaluateArgs eval_args;
  auto* eval_cmd = app.add_subcommand("evaluate", "Compare predicted poses with ground truth");
  eval_cmd->add_option("--pred", eval_args.pred, "Predicted pose file")->required();
  eval_cmd->add_option("--gt", eval_args.gt, "Ground-truth pose file or scene")->required();
  eval_cmd->add_option("--root", eval_args.root, "Root joint index");
  eval_cmd->add_flag("--no-root-centering", eval_args.no_root_centering, "Compare poses without centering");
  eval_cmd->add_option("--pck-threshold", eval_args.pck_threshold, "PCK threshold, mm")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--pss-model", eval_args.pss_model, "Cluster model for mPSS");
  eval_cmd->add_option("-o,--out", eval_args.out, "Report output path (stdout if omitted)");
  eval_cmd->callback([&] { action = [&] { return evaluate(eval_args); }; });

  PssArgs pss_args;
  auto* pss_cmd = app.add_subcommand("pss", "Pose Structure Score tools");
  pss_cmd->require_subcommand(1);
  auto* fit_cmd = pss_cmd->add_subcommand("fit", "Fit a cluster model to ground-truth poses");
  fit_cmd->add_option("--gt", pss_args.gt, "Ground-truth pose file or scene")->required();
  fit_cmd->add_option("-k", pss_args.k, "Number of clusters");
  fit_cmd->add_option("--seed", pss_args.seed, "k-means seed");
  fit_cmd->add_option("-o,--out", pss_args.out, "Model output path (stdout if omitted)");
  fit_cmd->callback([&] { action = [&] { return pss_fit(pss_args); }; });
  auto* stab_cmd = pss_cmd->add_subcommand("stability", "Matched IOU between independently seeded clusterings");
  stab_cmd->add_option("--gt", pss_args.gt, "Ground-truth pose file or scene")->required();
  stab_cmd->add_option("-k", pss_args.k, "Number of clusters");
  stab_cmd->add_option("--runs", pss_args.runs, "Number of clusterings")->check(CLI::Range(2, 1 << 20));
  stab_cmd->add_option("--seed", pss_args.seed, "Base seed");
  stab_cmd->add_option("-o,--out", pss_args.out, "Report output path (stdout if omitted)");
  stab_cmd->callback([&] { action = [&] { return pss_stability(pss_args); }; });
  auto* score_cmd = pss_cmd->add_subcommand("score", "mPSS of predictions against ground truth");
  score_cmd->add_option("--pred", pss_args.pred, "Predicted pose file")->required();
  score_cmd->add_option("--gt", pss_args.gt, "Ground-truth pose file or scene")->required();
  score_cmd->add_option("--model", pss_args.model, "Cluster model")->required();
  score_cmd->add_option("-o,--out", pss_args.out, "Report output path (stdout if omitted)");
  score_cmd->callback([&] { action = [&] { return pss_score(pss_args); }; });

  DecodeArgs dec_args;
  auto* dec_cmd = app.add_subcommand("decode", "Soft-argmax a heatmap volume into joint positions");
  dec_cmd->add_option("--volume", dec_args.volume, "Heatmap volume file")->required();
  dec_cmd->add_option("--temperature", dec_args.temperature, "Softmax temperature")->check(CLI::PositiveNumber);
  dec_cmd->add_flag("--2d", dec_args.two_d, "Marginalize depth and return pixel positions");
  dec_cmd->add_option("-o,--out", dec_args.out, "Output path (stdout if omitted)");
  dec_cmd->callback([&] { action = [&] { return decode(dec_args); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  return action ? action() : kUsage;
}

}  // namespace epiforge::cli
