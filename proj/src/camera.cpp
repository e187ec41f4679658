#include "epiforge/camera.hpp"

#include <cmath>

#include <Eigen/LU>

#include "epiforge/error.hpp"

namespace epiforge {

namespace {

constexpr double kMinDepth = 1e-12;
constexpr double kRotationTolerance = 1e-9;

template <typename Joints>
void validate_joints(const Joints& joints, const std::vector<bool>& visible) {
  if (joints.size() < 2) {
    throw Error(ErrorKind::InvalidArgument, "a pose needs at least 2 joints");
  }
  if (joints.size() != visible.size()) {
    throw Error(ErrorKind::InvalidArgument, "joint and visibility counts differ");
  }
  for (std::size_t j = 0; j < joints.size(); ++j) {
    if (visible[j] && !joints[j].allFinite()) {
      throw Error(ErrorKind::InvalidArgument, "visible joint " + std::to_string(j) + " is not finite");
    }
  }
}

std::size_t count_true(const std::vector<bool>& flags) {
  std::size_t n = 0;
  for (bool f : flags) n += f ? 1 : 0;
  return n;
}

}  // namespace

Mat3 CameraIntrinsics::K() const {
  Mat3 k;
  k << fx, 0.0, cx,
       0.0, fy, cy,
       0.0, 0.0, 1.0;
  return k;
}

void CameraIntrinsics::validate() const {
  if (!std::isfinite(fx) || !std::isfinite(fy) || !std::isfinite(cx) || !std::isfinite(cy)) {
    throw Error(ErrorKind::InvalidArgument, "intrinsics must be finite");
  }
  if (fx <= 0.0 || fy <= 0.0) {
    throw Error(ErrorKind::InvalidArgument, "focal lengths must be positive");
  }
}

void CameraExtrinsics::validate() const {
  if (!R.allFinite() || !T.allFinite()) {
    throw Error(ErrorKind::InvalidArgument, "extrinsics must be finite");
  }
  const double ortho = (R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (ortho > kRotationTolerance || std::abs(R.determinant() - 1.0) > kRotationTolerance) {
    throw Error(ErrorKind::InvalidArgument, "R is not a proper rotation");
  }
}

Mat34 projection_matrix(const CameraIntrinsics& intr, const CameraExtrinsics& extr) {
  Mat34 rt;
  rt.leftCols<3>() = extr.R;
  rt.col(3) = extr.R * extr.T;
  return intr.K() * rt;
}

std::size_t Pose3D::visible_count() const { return count_true(visible); }
void Pose3D::validate() const { validate_joints(joints, visible); }
std::size_t Pose2D::visible_count() const { return count_true(visible); }
void Pose2D::validate() const { validate_joints(joints, visible); }

Projection project(const Vec3& point, const CameraIntrinsics& intr, const CameraExtrinsics& extr) {
  if (!point.allFinite()) {
    throw Error(ErrorKind::InvalidArgument, "point is not finite");
  }
  const Vec3 cam = extr.to_camera(point);
  const double depth = cam.z();
  if (std::abs(depth) < kMinDepth) {
    throw Error(ErrorKind::DegenerateProjection, "point lies on the principal plane");
  }
  const Vec3 h = intr.K() * cam;
  return {Vec2(h.x() / depth, h.y() / depth), depth};
}

Pose2D project_pose(const Pose3D& pose, const CameraIntrinsics& intr, const CameraExtrinsics& extr) {
  pose.validate();
  Pose2D out;
  out.joints.assign(pose.size(), Vec2::Constant(std::nan("")));
  out.visible.assign(pose.size(), false);
  for (std::size_t j = 0; j < pose.size(); ++j) {
    if (!pose.visible[j]) continue;
    try {
      const Projection p = project(pose.joints[j], intr, extr);
      out.joints[j] = p.pixel;
      out.visible[j] = p.depth > 0.0;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DegenerateProjection) throw;
    }
  }
  return out;
}

Vec2 project_with(const Mat34& P, const Vec3& point) {
  const Vec3 h = P * point.homogeneous();
  return h.hnormalized();
}

}  // namespace epiforge
