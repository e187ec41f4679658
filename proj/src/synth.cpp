#include "epiforge/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include <Eigen/Geometry>

#include "epiforge/error.hpp"
#include "epiforge/random.hpp"

namespace epiforge {

namespace {

constexpr std::array<int, kSkeletonJoints> kParents{-1, 0, 1, 2, 0, 4, 5, 0, 7, 8, 9, 8, 11, 12, 8, 14, 15};

// Rest-pose bone offsets from the parent, body frame: x to the subject's
// left, y forward, z up. Millimeters.
const std::array<Vec3, kSkeletonJoints> kOffsets{
    Vec3(0.0, 0.0, 0.0),
    Vec3(-130.0, 0.0, 0.0), Vec3(0.0, 0.0, -450.0), Vec3(0.0, 0.0, -440.0),
    Vec3(130.0, 0.0, 0.0), Vec3(0.0, 0.0, -450.0), Vec3(0.0, 0.0, -440.0),
    Vec3(0.0, 0.0, 230.0), Vec3(0.0, 0.0, 250.0), Vec3(0.0, 30.0, 110.0), Vec3(0.0, -10.0, 120.0),
    Vec3(150.0, 0.0, 0.0), Vec3(0.0, 0.0, -280.0), Vec3(0.0, 0.0, -250.0),
    Vec3(-150.0, 0.0, 0.0), Vec3(0.0, 0.0, -280.0), Vec3(0.0, 0.0, -250.0)};

// Largest random rotation (radians) applied to the bone ending at each joint.
constexpr std::array<double, kSkeletonJoints> kMaxBend{
    0.0, 0.2, 0.8, 0.8, 0.2, 0.8, 0.8, 0.3, 0.3, 0.3, 0.3, 0.2, 1.4, 1.2, 0.2, 1.4, 1.2};

const std::array<double, kSkeletonJoints> kBoneLengths = [] {
  std::array<double, kSkeletonJoints> out{};
  for (std::size_t j = 0; j < kSkeletonJoints; ++j) out[j] = kOffsets[j].norm();
  return out;
}();

Mat3 random_rotation(Rng& rng, double max_angle) {
  Vec3 axis(rng.normal(), rng.normal(), rng.normal());
  const double n = axis.norm();
  axis = n > 0.0 ? Vec3(axis / n) : Vec3::UnitZ();
  const double angle = max_angle * rng.uniform();
  return Eigen::AngleAxisd(angle, axis).toRotationMatrix();
}

Camera look_at_origin(const CameraIntrinsics& intr, const Vec3& center) {
  const Vec3 forward = (-center).normalized();
  const Vec3 right = forward.cross(Vec3::UnitZ()).normalized();
  const Vec3 down = forward.cross(right);
  Camera cam;
  cam.intrinsics = intr;
  cam.extrinsics.R.row(0) = right.transpose();
  cam.extrinsics.R.row(1) = down.transpose();
  cam.extrinsics.R.row(2) = forward.transpose();
  cam.extrinsics.T = -center;
  return cam;
}

}  // namespace

std::span<const int> skeleton_parents() { return kParents; }
std::span<const double> skeleton_bone_lengths() { return kBoneLengths; }

std::vector<Camera> generate_rig(std::size_t n_cameras, std::uint64_t seed, const RigOptions& options) {
  if (n_cameras < 2) {
    throw Error(ErrorKind::InvalidArgument, "a rig needs n >= 2 cameras");
  }
  options.intrinsics.validate();
  if (!(options.min_radius > 0.0) || options.max_radius < options.min_radius ||
      options.max_height < options.min_height) {
    throw Error(ErrorKind::InvalidArgument, "invalid rig ranges");
  }
  Rng rng(seed);
  const double sector = std::min(2.0 * std::numbers::pi / static_cast<double>(n_cameras),
                                 0.5 * std::numbers::pi);
  double azimuth = rng.uniform(0.0, 2.0 * std::numbers::pi);
  std::vector<Camera> rig;
  rig.reserve(n_cameras);
  for (std::size_t i = 0; i < n_cameras; ++i) {
    const double radius = rng.uniform(options.min_radius, options.max_radius);
    const double height = rng.uniform(options.min_height, options.max_height);
    const Vec3 center(radius * std::cos(azimuth), radius * std::sin(azimuth), height);
    rig.push_back(look_at_origin(options.intrinsics, center));
    azimuth += sector * rng.uniform(0.5, 1.0);
  }
  return rig;
}

std::vector<Pose3D> generate_poses(std::size_t n_frames, std::uint64_t seed, std::size_t joints) {
  if (joints != kSkeletonJoints) {
    throw Error(ErrorKind::InvalidArgument, "the synthetic skeleton has 17 joints");
  }
  std::vector<Pose3D> poses;
  poses.reserve(n_frames);
  for (std::size_t f = 0; f < n_frames; ++f) {
    Rng rng(derive_seed(seed, f));
    const Mat3 root = Eigen::AngleAxisd(rng.uniform(0.0, 2.0 * std::numbers::pi), Vec3::UnitZ())
                          .toRotationMatrix() *
                      random_rotation(rng, 0.15);
    std::array<Mat3, kSkeletonJoints> orient;
    std::vector<Vec3> pts(kSkeletonJoints, Vec3::Zero());
    orient[0] = root;
    for (std::size_t j = 1; j < kSkeletonJoints; ++j) {
      const auto p = static_cast<std::size_t>(kParents[j]);
      orient[j] = orient[p] * random_rotation(rng, kMaxBend[j]);
      pts[j] = pts[p] + orient[j] * kOffsets[j];
    }
    poses.emplace_back(std::move(pts));
  }
  return poses;
}

std::vector<std::vector<Pose2D>> observe(std::span<const Pose3D> poses, std::span<const Camera> cameras,
                                         const ObservationOptions& options, std::uint64_t seed) {
  const auto rate_ok = [](double r) { return r >= 0.0 && r < 1.0; };
  if (!(options.noise_sigma >= 0.0) || !rate_ok(options.occlusion_rate) || !rate_ok(options.outlier_rate)) {
    throw Error(ErrorKind::InvalidArgument, "noise must be >= 0 and rates in [0, 1)");
  }
  std::vector<std::vector<Pose2D>> out(cameras.size(), std::vector<Pose2D>(poses.size()));
  for (std::size_t f = 0; f < poses.size(); ++f) {
    Rng rng(derive_seed(seed, f));
    for (std::size_t c = 0; c < cameras.size(); ++c) {
      const auto& cam = cameras[c];
      Pose2D obs = project_pose(poses[f], cam.intrinsics, cam.extrinsics);
      for (std::size_t j = 0; j < obs.size(); ++j) {
        // Every draw happens unconditionally so the stream layout is fixed.
        const double nx = rng.normal();
        const double ny = rng.normal();
        const bool outlier = rng.bernoulli(options.outlier_rate);
        const double ox = rng.uniform(0.0, 2.0 * cam.intrinsics.cx);
        const double oy = rng.uniform(0.0, 2.0 * cam.intrinsics.cy);
        const bool occluded = rng.bernoulli(options.occlusion_rate);
        if (!obs.visible[j]) continue;
        obs.joints[j] += options.noise_sigma * Vec2(nx, ny);
        if (outlier) obs.joints[j] = Vec2(ox, oy);
        if (occluded) obs.visible[j] = false;
      }
      out[c][f] = std::move(obs);
    }
  }
  return out;
}

SyntheticScene generate_scene(const SceneOptions& options) {
  SyntheticScene scene;
  scene.seed = options.seed;
  scene.observation = options.observation;
  scene.cameras = generate_rig(options.n_cameras, splitmix64(options.seed ^ 0x01), options.rig);
  scene.poses_3d = generate_poses(options.n_frames, splitmix64(options.seed ^ 0x02));
  scene.observations = observe(scene.poses_3d, scene.cameras, options.observation,
                               splitmix64(options.seed ^ 0x03));
  return scene;
}

}  // namespace epiforge
