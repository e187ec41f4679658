#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "epiforge/camera.hpp"

namespace epiforge {

inline constexpr std::size_t kSkeletonJoints = 17;

// Joint order of the 17-joint skeleton (Human3.6M-compatible):
// 0 pelvis, 1-3 right hip/knee/ankle, 4-6 left hip/knee/ankle, 7 spine,
// 8 thorax, 9 neck, 10 head, 11-13 left shoulder/elbow/wrist,
// 14-16 right shoulder/elbow/wrist.
std::span<const int> skeleton_parents();
std::span<const double> skeleton_bone_lengths();

struct RigOptions {
  CameraIntrinsics intrinsics{1146.0, 1146.0, 512.0, 512.0};
  double min_radius = 3000.0;  // mm
  double max_radius = 5000.0;
  double min_height = 0.0;  // above the pelvis, mm
  double max_height = 400.0;
};

// n >= 2 cameras on a ring around the origin, consecutive cameras separated by
// an angle in [0.5, 1) * min(360/n, 90) degrees, all looking at the origin.
std::vector<Camera> generate_rig(std::size_t n_cameras, std::uint64_t seed,
                                 const RigOptions& options = {});

// Random poses of the fixed-length skeleton, pelvis at the origin. Frame f
// draws from Rng(derive_seed(seed, f)), so frames are independent.
std::vector<Pose3D> generate_poses(std::size_t n_frames, std::uint64_t seed,
                                   std::size_t joints = kSkeletonJoints);

struct ObservationOptions {
  double noise_sigma = 0.0;     // px, isotropic Gaussian
  double occlusion_rate = 0.0;  // i.i.d. per (frame, camera, joint)
  double outlier_rate = 0.0;    // replaced by a uniform pixel in [0, 2cx) x [0, 2cy)
};

// observations[camera][frame]. Joints behind a camera are invisible regardless
// of the occlusion draw.
std::vector<std::vector<Pose2D>> observe(std::span<const Pose3D> poses, std::span<const Camera> cameras,
                                         const ObservationOptions& options, std::uint64_t seed);

struct SceneOptions {
  std::size_t n_cameras = 4;
  std::size_t n_frames = 100;
  ObservationOptions observation;
  RigOptions rig;
  std::uint64_t seed = 0;
};

struct SyntheticScene {
  std::vector<Camera> cameras;
  std::vector<Pose3D> poses_3d;
  std::vector<std::vector<Pose2D>> observations;  // [camera][frame]
  ObservationOptions observation;
  std::uint64_t seed = 0;
};

SyntheticScene generate_scene(const SceneOptions& options);

}  // namespace epiforge
