#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace epiforge {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat34 = Eigen::Matrix<double, 3, 4>;

// Pinhole intrinsics in pixels. Lens distortion is not modeled.
struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  Mat3 K() const;
  // Throws InvalidArgument unless fx > 0, fy > 0 and all values finite.
  void validate() const;
};

// Extrinsics in the [R | R T] convention: a world point X maps to camera
// coordinates R (X + T), so the camera center sits at -T in the world frame.
// T is in millimeters.
struct CameraExtrinsics {
  Mat3 R = Mat3::Identity();
  Vec3 T = Vec3::Zero();

  // Throws InvalidArgument unless R is a proper rotation within 1e-9.
  void validate() const;
  Vec3 center() const { return -T; }
  Vec3 to_camera(const Vec3& world) const { return R * (world + T); }
};

struct Camera {
  CameraIntrinsics intrinsics;
  CameraExtrinsics extrinsics;
};

// P = K [R | R T].
Mat34 projection_matrix(const CameraIntrinsics& intr, const CameraExtrinsics& extr);
inline Mat34 projection_matrix(const Camera& cam) {
  return projection_matrix(cam.intrinsics, cam.extrinsics);
}

// J joints in millimeters. Invisible joints may hold any value (often NaN).
struct Pose3D {
  std::vector<Vec3> joints;
  std::vector<bool> visible;

  Pose3D() = default;
  explicit Pose3D(std::vector<Vec3> pts)
      : joints(std::move(pts)), visible(joints.size(), true) {}
  Pose3D(std::vector<Vec3> pts, std::vector<bool> vis)
      : joints(std::move(pts)), visible(std::move(vis)) {}

  std::size_t size() const { return joints.size(); }
  std::size_t visible_count() const;
  // Throws InvalidArgument if J < 2, sizes disagree, or a visible joint is not finite.
  void validate() const;
};

// J joints in pixels.
struct Pose2D {
  std::vector<Vec2> joints;
  std::vector<bool> visible;

  Pose2D() = default;
  explicit Pose2D(std::vector<Vec2> pts)
      : joints(std::move(pts)), visible(joints.size(), true) {}
  Pose2D(std::vector<Vec2> pts, std::vector<bool> vis)
      : joints(std::move(pts)), visible(std::move(vis)) {}

  std::size_t size() const { return joints.size(); }
  std::size_t visible_count() const;
  void validate() const;
};

struct Projection {
  Vec2 pixel;
  // Third homogeneous coordinate before dehomogenization; negative behind the camera.
  double depth;
};

// Throws DegenerateProjection when |depth| < 1e-12.
Projection project(const Vec3& point, const CameraIntrinsics& intr, const CameraExtrinsics& extr);

// Joints that are invisible, land on the principal plane, or lie behind the
// camera come back invisible.
Pose2D project_pose(const Pose3D& pose, const CameraIntrinsics& intr, const CameraExtrinsics& extr);

// Dehomogenized P * [X; 1]. No depth checks.
Vec2 project_with(const Mat34& P, const Vec3& point);

}  // namespace epiforge
