#include "epiforge/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <string>
#include <thread>

#include "epiforge/error.hpp"
#include "epiforge/random.hpp"

namespace epiforge {

namespace {

PairCalibration calibrate_pair(const io::SceneFile& scene, std::size_t a, std::span<const std::size_t> frames,
                               RansacOptions ransac, std::uint64_t seed, std::optional<std::size_t> frame) {
  PairCalibration out;
  out.first = a;
  out.second = a + 1;
  out.frame = frame;
  const auto corr = pair_correspondences(scene, a, a + 1, frames);
  out.correspondences = corr.size();
  ransac.seed = seed;
  out.geometry = estimate_two_view(corr, scene.cameras[a].intrinsics, scene.cameras[a + 1].intrinsics, ransac);
  try {
    const auto truth = relative_pose(scene.cameras[a].extrinsics, scene.cameras[a + 1].extrinsics);
    out.rotation_error = rotation_angle(truth.R, out.geometry.selection.pose.R);
  } catch (const Error&) {
    out.rotation_error = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

std::vector<PairCalibration> calibrate_frames(const io::SceneFile& scene, std::span<const std::size_t> frames,
                                              const RansacOptions& ransac, std::uint64_t seed,
                                              std::optional<std::size_t> frame) {
  std::vector<PairCalibration> pairs;
  for (std::size_t a = 0; a + 1 < scene.cameras.size(); ++a) {
    pairs.push_back(calibrate_pair(scene, a, frames, ransac, derive_seed(seed, a), frame));
  }
  return pairs;
}

std::vector<std::size_t> all_frames(const io::SceneFile& scene) {
  std::vector<std::size_t> frames(scene.frames.size());
  for (std::size_t f = 0; f < frames.size(); ++f) frames[f] = f;
  return frames;
}

Mat34 normalized_projection(const RelativePose& rel, const CameraIntrinsics& K) {
  Mat34 P;
  P.leftCols<3>() = rel.R;
  P.col(3) = rel.t;
  return K.K() * P;
}

io::PoseRecord invisible_record(std::size_t joints) {
  io::PoseRecord r;
  r.pose.joints.assign(joints, Vec3::Constant(std::numeric_limits<double>::quiet_NaN()));
  r.pose.visible.assign(joints, false);
  r.views.assign(joints, 0);
  r.reprojection_rmse = std::numeric_limits<double>::quiet_NaN();
  return r;
}

io::PoseRecord triangulate_frame(const io::SceneFile& scene, std::size_t f, std::span<const Camera> cameras,
                                 const TriangulationOptions& options) {
  std::vector<View> views;
  for (std::size_t c = 0; c < cameras.size(); ++c) {
    views.push_back(View{scene.frames[f][c], projection_matrix(cameras[c])});
  }
  const auto tri = triangulate_pose(views, {}, options);
  io::PoseRecord r;
  r.pose = tri.pose;
  r.views = tri.per_joint_views;
  r.reprojection_rmse = tri.reprojection_rmse;
  return r;
}

bool is_calibration_failure(ErrorKind k) {
  return k == ErrorKind::InsufficientInliers || k == ErrorKind::DegenerateConfiguration ||
         k == ErrorKind::AmbiguousCheirality;
}

}  // namespace

std::size_t worker_count() {
  if (const char* env = std::getenv("EPIFORGE_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(n);
  const std::size_t workers = std::min(worker_count(), n);
  auto run = [&](std::size_t i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) run(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) run(i);
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::vector<Correspondence> pair_correspondences(const io::SceneFile& scene, std::size_t a, std::size_t b,
                                                 std::span<const std::size_t> frames) {
  std::vector<Correspondence> corr;
  for (std::size_t f : frames) {
    const Pose2D& pa = scene.frames.at(f).at(a);
    const Pose2D& pb = scene.frames.at(f).at(b);
    for (std::size_t j = 0; j < pa.size(); ++j) {
      if (pa.visible[j] && pb.visible[j]) corr.push_back({pa.joints[j], pb.joints[j]});
    }
  }
  return corr;
}

std::vector<PairCalibration> calibrate_scene(const io::SceneFile& scene, const CalibrationOptions& options) {
  if (scene.cameras.size() < 2) {
    throw Error(ErrorKind::InvalidArgument, "calibration needs at least 2 cameras");
  }
  const auto frames = all_frames(scene);
  if (options.pool_frames) {
    return calibrate_frames(scene, frames, options.ransac, options.ransac.seed, std::nullopt);
  }
  std::vector<std::vector<PairCalibration>> per_frame(frames.size());
  parallel_for(frames.size(), [&](std::size_t f) {
    const std::size_t one[] = {f};
    per_frame[f] = calibrate_frames(scene, one, options.ransac, derive_seed(options.ransac.seed, f), f);
  });
  std::vector<PairCalibration> out;
  for (auto& v : per_frame) {
    for (auto& p : v) out.push_back(std::move(p));
  }
  return out;
}

std::vector<Camera> chain_cameras(const io::SceneFile& scene, std::span<const PairCalibration> pairs,
                                  std::span<const std::size_t> frames) {
  const std::size_t n = scene.cameras.size();
  if (pairs.size() != n - 1) {
    throw Error(ErrorKind::InvalidArgument, "need one calibration per consecutive camera pair");
  }
  std::vector<Camera> cams(n);
  std::vector<Vec3> offset(n, Vec3::Zero());  // R T of each camera
  cams[0].intrinsics = scene.cameras[0].intrinsics;
  for (std::size_t a = 0; a + 1 < n; ++a) {
    const RelativePose& rel = pairs[a].geometry.selection.pose;
    double scale = 1.0;
    if (a > 0) {
      // Points from pair (a-1, a) in camera a coordinates versus the same
      // points from pair (a, a+1) with a unit baseline.
      const Mat34 Pprev = projection_matrix(cams[a - 1]);
      const Mat34 Pcur = projection_matrix(cams[a]);
      Mat34 Pa = Mat34::Zero();
      Pa.leftCols<3>() = Mat3::Identity();
      Pa = scene.cameras[a].intrinsics.K() * Pa;
      const Mat34 Pnext = normalized_projection(rel, scene.cameras[a + 1].intrinsics);
      std::vector<double> ratios;
      for (std::size_t f : frames) {
        const auto& obs = scene.frames.at(f);
        for (std::size_t j = 0; j < obs[a].size(); ++j) {
          if (!obs[a - 1].visible[j] || !obs[a].visible[j] || !obs[a + 1].visible[j]) continue;
          try {
            const Vec3 Xw = triangulate_dlt(obs[a - 1].joints[j], obs[a].joints[j], Pprev, Pcur);
            const Vec3 in_a = cams[a].extrinsics.to_camera(Xw);
            const Vec3 unit = triangulate_dlt(obs[a].joints[j], obs[a + 1].joints[j], Pa, Pnext);
            if (unit.norm() > 0.0) ratios.push_back(in_a.norm() / unit.norm());
          } catch (const Error& e) {
            if (e.kind() != ErrorKind::ParallelRays) throw;
          }
        }
      }
      if (ratios.empty()) {
        throw Error(ErrorKind::DegenerateConfiguration,
                    "no joint is seen by cameras " + std::to_string(a - 1) + ".." + std::to_string(a + 1) +
                        "; cannot relate the baselines");
      }
      const auto mid = ratios.begin() + static_cast<std::ptrdiff_t>(ratios.size() / 2);
      std::nth_element(ratios.begin(), mid, ratios.end());
      scale = *mid;
    }
    const Mat3 R_next = rel.R * cams[a].extrinsics.R;
    offset[a + 1] = rel.R * offset[a] + scale * rel.t;
    cams[a + 1].intrinsics = scene.cameras[a + 1].intrinsics;
    cams[a + 1].extrinsics.R = R_next;
    cams[a + 1].extrinsics.T = R_next.transpose() * offset[a + 1];
  }
  return cams;
}

Pose3D normalize_scale(const Pose3D& pose, std::size_t root_joint) {
  Pose3D out = pose;
  Vec3 center = Vec3::Zero();
  if (root_joint < pose.size() && pose.visible[root_joint]) {
    center = pose.joints[root_joint];
  } else {
    std::size_t n = 0;
    for (std::size_t j = 0; j < pose.size(); ++j) {
      if (!pose.visible[j]) continue;
      center += pose.joints[j];
      ++n;
    }
    if (n == 0) return out;
    center /= static_cast<double>(n);
  }
  double sq = 0.0;
  for (std::size_t j = 0; j < pose.size(); ++j) {
    if (pose.visible[j]) sq += (pose.joints[j] - center).squaredNorm();
  }
  const double norm = std::sqrt(sq);
  for (std::size_t j = 0; j < pose.size(); ++j) {
    if (!pose.visible[j]) continue;
    out.joints[j] = norm > 0.0 ? Vec3((pose.joints[j] - center) / norm) : Vec3(pose.joints[j] - center);
  }
  return out;
}

io::PoseFile triangulate_scene(const io::SceneFile& scene, const TriangulateSceneOptions& options) {
  io::PoseFile file;
  file.joints = scene.joints;
  file.poses.assign(scene.frames.size(), invisible_record(scene.joints));
  const bool estimated = options.extrinsics == ExtrinsicsSource::Estimated;

  std::vector<Camera> shared_rig;
  if (!estimated) {
    shared_rig = scene.cameras;
  } else if (options.calibration.pool_frames) {
    const auto frames = all_frames(scene);
    const auto pairs = calibrate_frames(scene, frames, options.calibration.ransac,
                                        options.calibration.ransac.seed, std::nullopt);
    shared_rig = chain_cameras(scene, pairs, frames);
  }

  parallel_for(scene.frames.size(), [&](std::size_t f) {
    try {
      std::vector<Camera> frame_rig;
      const std::vector<Camera>* rig = &shared_rig;
      if (estimated && !options.calibration.pool_frames) {
        const std::size_t one[] = {f};
        const auto pairs = calibrate_frames(scene, one, options.calibration.ransac,
                                            derive_seed(options.calibration.ransac.seed, f), f);
        frame_rig = chain_cameras(scene, pairs, one);
        rig = &frame_rig;
      }
      io::PoseRecord r = triangulate_frame(scene, f, *rig, options.triangulation);
      if (estimated) r.pose = normalize_scale(r.pose);
      file.poses[f] = std::move(r);
    } catch (const Error& e) {
      const bool skippable = e.kind() == ErrorKind::NoVisibleJoints || is_calibration_failure(e.kind());
      if (!options.skip_bad_frames || !skippable) throw;
    }
  });
  return file;
}

}  // namespace epiforge
