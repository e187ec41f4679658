#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "epiforge/epipolar.hpp"
#include "epiforge/error.hpp"
#include "epiforge/heatmap.hpp"
#include "epiforge/io.hpp"
#include "epiforge/metrics.hpp"
#include "epiforge/pipeline.hpp"
#include "epiforge/pss.hpp"
#include "epiforge/random.hpp"
#include "epiforge/synth.hpp"
#include "epiforge/triangulation.hpp"

using namespace epiforge;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

io::SceneFile scene(std::size_t cameras, std::size_t frames, std::uint64_t seed, ObservationOptions obs = {}) {
  SceneOptions o;
  o.n_cameras = cameras;
  o.n_frames = frames;
  o.observation = obs;
  o.seed = seed;
  return io::scene_from_synthetic(generate_scene(o));
}

std::vector<Pose3D> poses_of(const io::PoseFile& file) {
  std::vector<Pose3D> out;
  for (const auto& r : file.poses) out.push_back(r.pose);
  return out;
}

Pose3D jitter(const Pose3D& p, Rng& rng, double sigma) {
  Pose3D out = p;
  for (std::size_t j = 1; j < out.size(); ++j) out.joints[j] += sigma * Vec3(rng.normal(), rng.normal(), rng.normal());
  return out;
}

Pose3D similar(const Pose3D& p, double s, const Mat3& R, const Vec3& t) {
  Pose3D out = p;
  for (auto& j : out.joints) j = s * R * j + t;
  return out;
}

Mat3 random_rotation(Rng& rng) {
  Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  return q.normalized().toRotationMatrix();
}

Outcome noiseless_reconstruction() {
  const auto start = Clock::now();
  const auto s = scene(4, 100, 1);
  const auto gt = *s.gt_poses;
  const auto given = poses_of(triangulate_scene(s, {}));
  double worst_given = 0.0;
  for (std::size_t f = 0; f < gt.size(); ++f) {
    worst_given = std::max(worst_given, mpjpe(given[f], gt[f], {std::nullopt, 150.0}));
  }
  TriangulateSceneOptions o;
  o.extrinsics = ExtrinsicsSource::Estimated;
  const auto estimated = poses_of(triangulate_scene(s, o));
  double worst_estimated = 0.0;
  for (std::size_t f = 0; f < gt.size(); ++f) worst_estimated = std::max(worst_estimated, pmpjpe(estimated[f], gt[f]));
  const double elapsed = seconds_since(start);
  return {worst_given < 1e-6 && worst_estimated < 1e-6 && elapsed < 10.0,
          format("max MPJPE given %.3g mm, max PMPJPE estimated %.3g mm, %.2f s", worst_given, worst_estimated,
                 elapsed)};
}

double two_view_rotation_error(std::uint64_t trial, double outlier_fraction) {
  const auto rig = generate_rig(2, trial);
  const auto poses = generate_poses(30, derive_seed(trial, 1));
  std::vector<Correspondence> corr;
  for (const auto& p : poses) {
    const auto a = project_pose(p, rig[0].intrinsics, rig[0].extrinsics);
    const auto b = project_pose(p, rig[1].intrinsics, rig[1].extrinsics);
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (a.visible[j] && b.visible[j]) corr.push_back({a.joints[j], b.joints[j]});
    }
  }
  Rng rng(derive_seed(trial, 2));
  const auto n_bad = static_cast<std::size_t>(std::round(outlier_fraction * double(corr.size())));
  std::vector<std::size_t> order(corr.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = 0; i < n_bad; ++i) {
    std::swap(order[i], order[i + rng.below(order.size() - i)]);
    const auto& K = rig[0].intrinsics;
    corr[order[i]].second = Vec2(rng.uniform(0.0, 2.0 * K.cx), rng.uniform(0.0, 2.0 * K.cy));
  }
  RansacOptions ro;
  ro.threshold = 2.0;
  ro.seed = trial;
  const auto g = estimate_two_view(corr, rig[0].intrinsics, rig[1].intrinsics, ro);
  return rotation_angle(g.selection.pose.R, relative_pose(rig[0].extrinsics, rig[1].extrinsics).R);
}

Outcome geometry_recovery() {
  int exact = 0, robust = 0;
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    try {
      if (two_view_rotation_error(trial, 0.0) < 1e-6) ++exact;
    } catch (const Error&) {
    }
    try {
      if (two_view_rotation_error(trial, 0.3) < 0.5 * std::numbers::pi / 180.0) ++robust;
    } catch (const Error&) {
    }
  }
  return {exact >= 99 && robust >= 95,
          format("noiseless within 1e-6 rad: %d/100, 30%% outliers within 0.5 deg: %d/100", exact, robust)};
}

Outcome noise_ordering() {
  std::vector<double> errors;
  for (double sigma : {0.5, 1.0, 2.0, 4.0}) {
    const auto s = scene(4, 100, 3, {sigma, 0.0, 0.0});
    const auto pred = poses_of(triangulate_scene(s, {}));
    errors.push_back(evaluate_poses(pred, *s.gt_poses, {std::nullopt, 150.0}).mpjpe);
  }
  bool increasing = true;
  for (std::size_t i = 1; i < errors.size(); ++i) increasing = increasing && errors[i] > errors[i - 1];
  return {increasing, format("MPJPE at 0.5/1/2/4 px: %.3f %.3f %.3f %.3f mm", errors[0], errors[1], errors[2],
                             errors[3])};
}

Outcome metric_hierarchy() {
  const auto a = generate_poses(1000, 41), b = generate_poses(1000, 42);
  int violations = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double p = pmpjpe(a[i], b[i]), n = nmpjpe(a[i], b[i]), m = mpjpe(a[i], b[i]);
    const double excess = std::max(p - n, n - m - 1e-9);
    if (p > n + 1e-9 || n > m + 1e-9) {
      ++violations;
      worst = std::max(worst, excess);
    }
  }
  Rng rng(43);
  double worst_similar = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto copy = similar(a[i], rng.uniform(0.1, 10.0), random_rotation(rng),
                              Vec3(rng.normal(0, 1000), rng.normal(0, 1000), rng.normal(0, 1000)));
    worst_similar = std::max(worst_similar, pmpjpe(copy, a[i]));
  }
  return {violations == 0 && worst_similar < 1e-9,
          format("ordering violated in %d/1000 pairs (worst excess %.3g mm), max PMPJPE of similar copies %.3g mm",
                 violations, worst, worst_similar)};
}

Outcome polynomial_vs_dlt() {
  Rng rng(5);
  int not_worse = 0;
  double worst_residual = 0.0;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    const auto rig = generate_rig(2, i);
    const Mat34 P1 = projection_matrix(rig[0]), P2 = projection_matrix(rig[1]);
    const auto F = fundamental_from_projections(P1, P2);
    const Vec3 X(rng.uniform(-1000, 1000), rng.uniform(-1000, 1000), rng.uniform(-1000, 1000));
    const Vec2 u1 = project_with(P1, X) + Vec2(rng.normal(), rng.normal());
    const Vec2 u2 = project_with(P2, X) + Vec2(rng.normal(), rng.normal());
    const auto poly = triangulate_polynomial(u1, u2, F, P1, P2);
    const Vec3 d = triangulate_dlt(u1, u2, P1, P2);
    const double dlt = (project_with(P1, d) - u1).squaredNorm() + (project_with(P2, d) - u2).squaredNorm();
    if (poly.image_error <= dlt + 1e-12) ++not_worse;
    worst_residual =
        std::max(worst_residual, std::abs(epipolar_residual(F.F, poly.corrected_first, poly.corrected_second)));
  }
  return {not_worse >= 990 && worst_residual < 1e-9,
          format("polynomial <= DLT in %d/1000, max epipolar residual %.3g", not_worse, worst_residual)};
}

Outcome pss_correctness() {
  const auto gts = generate_poses(1000, 61), preds = generate_poses(1000, 62);
  const auto model = fit_clusters(gts, 20, 7);
  int mismatches = 0;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    const Eigen::VectorXd p = normalize_pose(preds[i]), g = normalize_pose(gts[i]);
    std::size_t bp = 0, bg = 0;
    for (Eigen::Index r = 1; r < model.centroids.rows(); ++r) {
      const auto row = model.centroids.row(r).transpose();
      if ((row - p).squaredNorm() < (model.centroids.row(Eigen::Index(bp)).transpose() - p).squaredNorm()) bp = std::size_t(r);
      if ((row - g).squaredNorm() < (model.centroids.row(Eigen::Index(bg)).transpose() - g).squaredNorm()) bg = std::size_t(r);
    }
    if (pss(preds[i], gts[i], model) != (bp == bg ? 1 : 0)) ++mismatches;
  }
  const double self = mpss(gts, gts, model).mpss;
  Rng rng(63);
  int variant = 0;
  for (std::size_t i = 0; i < 1000; ++i) {
    const double s = rng.uniform(0.01, 100.0);
    const Vec3 t(rng.normal(0, 1000), rng.normal(0, 1000), rng.normal(0, 1000));
    const int base = pss(preds[i], gts[i], model);
    if (pss(similar(preds[i], s, Mat3::Identity(), t), gts[i], model) != base) ++variant;
    if (pss(preds[i], similar(gts[i], s, Mat3::Identity(), t), model) != base) ++variant;
  }
  return {mismatches == 0 && self == 1.0 && variant == 0,
          format("brute-force mismatches %d/1000, mpss(X, X) = %.17g, invariance violations %d/2000", mismatches,
                 self, variant)};
}

Outcome pss_stability() {
  const auto start = Clock::now();
  const auto templates = generate_poses(50, 71);
  Rng rng(72);
  std::vector<Pose3D> population, predictor;
  for (std::size_t i = 0; i < 5000; ++i) population.push_back(jitter(templates[i % 50], rng, 20.0));
  for (const auto& p : population) predictor.push_back(jitter(p, rng, 15.0));
  const double iou = stability_iou(population, 50, 20, 73);
  double lo = 1.0, hi = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto model = fit_clusters(population, 50, derive_seed(74, seed));
    const double m = mpss(predictor, population, model).mpss;
    lo = std::min(lo, m);
    hi = std::max(hi, m);
  }
  const double spread = 100.0 * (hi - lo);
  const double elapsed = seconds_since(start);
  return {iou >= 0.70 && spread <= 0.5 && elapsed < 120.0,
          format("stability IOU %.4f, mPSS %.2f%%..%.2f%% (spread %.2f pp), %.1f s", iou, 100.0 * lo, 100.0 * hi,
                 spread, elapsed)};
}

Outcome soft_argmax_checks() {
  std::vector<std::string> failed;
  const auto near = [](const Vec3& a, const Vec3& b, double tol) { return (a - b).cwiseAbs().maxCoeff() <= tol; };

  HeatmapVolume delta(1, 32, 32, 16);
  delta.at(0, 10, 20, 5) = 1e4;
  if (!near(soft_argmax_3d(delta).joints[0], Vec3(10, 20, 5), 1e-6)) failed.push_back("delta");
  if ((soft_argmax_2d(delta).joints[0] - Vec2(10, 20)).cwiseAbs().maxCoeff() > 1e-6) failed.push_back("delta 2d");

  HeatmapVolume uniform(1, 8, 8, 8);
  if (!near(soft_argmax_3d(uniform).joints[0], Vec3(3.5, 3.5, 3.5), 1e-12)) failed.push_back("uniform");
  if ((soft_argmax_2d(uniform).joints[0] - Vec2(3.5, 3.5)).cwiseAbs().maxCoeff() > 1e-12) failed.push_back("uniform 2d");

  HeatmapVolume twin(1, 8, 8, 8);
  twin.at(0, 0, 0, 0) = twin.at(0, 7, 7, 7) = 1e4;
  if (!near(soft_argmax_3d(twin).joints[0], Vec3(3.5, 3.5, 3.5), 1e-9)) failed.push_back("two peaks");

  bool equivariant = true;
  for (std::size_t dx = 0; dx < 3; ++dx) {
    for (std::size_t dz = 0; dz < 3; ++dz) {
      HeatmapVolume shifted(1, 32, 32, 16);
      shifted.at(0, 10 + dx, 20 - dz, 5 + dz) = 1e4;
      const Vec3 moved = soft_argmax_3d(shifted).joints[0] - soft_argmax_3d(delta).joints[0];
      equivariant = equivariant && near(moved, Vec3(double(dx), -double(dz), double(dz)), 1e-9);
    }
  }
  if (!equivariant) failed.push_back("shift");

  Rng rng(81);
  HeatmapVolume random(3, 9, 7, 5);
  for (auto& v : random.scores()) v = rng.normal(0.0, 3.0);
  HeatmapVolume offset = random;
  for (auto& v : offset.scores()) v += 42.0;
  double marginal = 0.0, constant = 0.0;
  const auto p3 = soft_argmax_3d(random), po = soft_argmax_3d(offset);
  const auto p2 = soft_argmax_2d(random);
  for (std::size_t j = 0; j < 3; ++j) {
    marginal = std::max(marginal, (p3.joints[j].head<2>() - p2.joints[j]).cwiseAbs().maxCoeff());
    constant = std::max(constant, (p3.joints[j] - po.joints[j]).cwiseAbs().maxCoeff());
  }
  if (marginal > 1e-12) failed.push_back("marginal");
  if (constant > 1e-12) failed.push_back("constant offset");

  std::string detail = format("2D/3D marginal gap %.3g, constant-offset gap %.3g", marginal, constant);
  if (!failed.empty()) {
    detail += "; failed:";
    for (const auto& f : failed) detail += " " + f;
  }
  return {failed.empty(), detail};
}

Outcome smooth_l1_checks() {
  const double h = 1e-7;
  const double left = (smooth_l1(1.0) - smooth_l1(1.0 - h)) / h;
  const double right = (smooth_l1(1.0 + h) - smooth_l1(1.0)) / h;
  const double jump = std::abs(smooth_l1(std::nextafter(1.0, 0.0)) - smooth_l1(1.0));
  const bool ok = smooth_l1(1.0) == 0.5 && jump < 1e-15 && std::abs(left - 1.0) < 1e-6 &&
                  std::abs(right - 1.0) < 1e-6 && smooth_l1(0.5) == 0.125 && smooth_l1(2.0) == 1.5;
  return {ok, format("f(1) = %.17g, slopes %.9f / %.9f, f(0.5) = %.17g, f(2) = %.17g", smooth_l1(1.0), left, right,
                     smooth_l1(0.5), smooth_l1(2.0))};
}

struct Cli {
  std::string binary;
  fs::path dir;

  int run(const std::string& args) const {
    const std::string cmd = binary + " " + args + " >/dev/null 2>" + (dir / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  std::string path(const std::string& name) const { return (dir / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome cli_determinism(const std::string& binary) {
  Cli cli{binary, fs::temp_directory_path() / ("epiforge_acceptance_" + std::to_string(::getpid()))};
  fs::create_directories(cli.dir);
  {
    HeatmapVolume v(2, 12, 10, 6);
    Rng rng(91);
    for (auto& s : v.scores()) s = rng.normal();
    std::ofstream out(cli.path("vol.bin"), std::ios::binary);
    write_volume(out, v);
  }
  // Each command writes to "<name>.<run>.json"; the input files come from the first run.
  const std::vector<std::pair<std::string, std::string>> commands{
      {"synth", "synth --frames 30 --noise 1 --occlusion 0.05 --outliers 0.02 --seed 9 --gt-out " + cli.path("gt.json")},
      {"calibrate", "calibrate --scene " + cli.path("synth.0.json") + " --pool-frames"},
      {"calibrate_frames", "calibrate --scene " + cli.path("synth.0.json")},
      {"tri_given", "triangulate --scene " + cli.path("synth.0.json")},
      {"tri_estimated", "triangulate --scene " + cli.path("synth.0.json") + " --extrinsics estimated --skip-bad-frames"},
      {"tri_weiszfeld", "triangulate --scene " + cli.path("synth.0.json") + " --fusion geometric-median"},
      {"synth_visible", "synth --frames 30 --noise 1 --seed 10 --gt-out " + cli.path("gt_visible.json")},
      {"tri_visible", "triangulate --scene " + cli.path("synth_visible.0.json")},
      {"pss_fit", "pss fit --gt " + cli.path("gt_visible.json") + " -k 5 --seed 3"},
      {"pss_stability", "pss stability --gt " + cli.path("gt_visible.json") + " -k 5 --runs 4 --seed 3"},
      {"pss_score", "pss score --pred " + cli.path("tri_visible.0.json") + " --gt " + cli.path("gt_visible.json") +
                        " --model " + cli.path("pss_fit.0.json")},
      {"evaluate", "evaluate --pred " + cli.path("tri_given.0.json") + " --gt " + cli.path("gt.json")},
      {"evaluate_pss", "evaluate --pred " + cli.path("tri_visible.0.json") + " --gt " + cli.path("gt_visible.json") +
                           " --pss-model " + cli.path("pss_fit.0.json")},
      {"decode", "decode --volume " + cli.path("vol.bin") + " --temperature 0.5"},
      {"decode_2d", "decode --volume " + cli.path("vol.bin") + " --2d"},
  };
  std::vector<std::string> failed;
  for (const auto& [name, args] : commands) {
    bool same = true;
    for (int r = 0; r < 2; ++r) {
      const auto out = cli.path(name + "." + std::to_string(r) + ".json");
      if (cli.run(args + " -o " + out) != 0) same = false;
    }
    const auto a = slurp(cli.path(name + ".0.json")), b = slurp(cli.path(name + ".1.json"));
    if (!same || a.empty() || a != b) failed.push_back(name);
  }
  fs::remove_all(cli.dir);
  std::string detail = format("%zu/%zu commands byte-identical", commands.size() - failed.size(), commands.size());
  for (const auto& f : failed) detail += " [differs: " + f + "]";
  return {failed.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: acceptance <path to epiforge binary>\n");
    return 2;
  }
  const std::string binary = argv[1];
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"noiseless reconstruction", noiseless_reconstruction},
      {"geometry recovery", geometry_recovery},
      {"noise ordering", noise_ordering},
      {"metric hierarchy", metric_hierarchy},
      {"polynomial vs DLT", polynomial_vs_dlt},
      {"PSS correctness", pss_correctness},
      {"PSS stability", pss_stability},
      {"soft-argmax", soft_argmax_checks},
      {"smooth-L1", smooth_l1_checks},
      {"CLI determinism", [&] { return cli_determinism(binary); }},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("[%s] %zu. %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - std::size_t(failures), criteria.size());
  return failures == 0 ? 0 : 1;
}
