#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "epiforge/camera.hpp"

namespace epiforge {

// Epipolar convention used throughout: for a correspondence (x1, x2) between
// the first and the second view, with x = [u, v, 1]^T,
//
//     x1^T F x2 = 0.
//
// F is therefore the transpose of the matrix most textbooks write as
// x2^T F x1 = 0. The essential matrix follows the same orientation.

struct Correspondence {
  Vec2 first;
  Vec2 second;
};

struct FundamentalMatrix {
  Mat3 F = Mat3::Zero();
};

struct EssentialMatrix {
  Mat3 E = Mat3::Zero();
};

// Motion of the second camera relative to the first: X2 = R X1 + t, ||t|| = 1.
struct RelativePose {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::UnitX();
};

struct RansacOptions {
  double threshold = 2.0;  // Sampson distance, pixels
  std::size_t max_iterations = 2000;
  double confidence = 0.999;
  std::uint64_t seed = 0;
};

struct RansacReport {
  FundamentalMatrix F;
  std::vector<bool> inliers;
  std::size_t num_inliers = 0;
  std::size_t iterations = 0;
  double threshold = 0.0;

  bool operator==(const RansacReport& other) const;
};

// Scale F to unit Frobenius norm with its largest-magnitude entry positive.
Mat3 canonicalize(const Mat3& F);

// Normalized 8-point algorithm (Hartley conditioning, rank-2 enforcement).
// Throws DegenerateConfiguration if fewer than 8 correspondences are given or
// the design matrix has rank < 8.
FundamentalMatrix eight_point(std::span<const Correspondence> corr);

// Algebraic residual x1^T F x2.
double epipolar_residual(const Mat3& F, const Vec2& first, const Vec2& second);

// First-order geometric (Sampson) distance in pixels.
double sampson_distance(const Mat3& F, const Vec2& first, const Vec2& second);

// Throws InsufficientInliers when no hypothesis reaches 8 inliers.
RansacReport ransac_fundamental(std::span<const Correspondence> corr, const RansacOptions& options);

// E = K1^T F K2, projected onto the essential manifold (singular values (s, s, 0)).
EssentialMatrix essential_from_fundamental(const FundamentalMatrix& F,
                                           const CameraIntrinsics& K1,
                                           const CameraIntrinsics& K2);

// Essential matrix of a relative pose in this library's orientation:
// E = ([t]x R)^T, so that x1^T E x2 = 0 for normalized image points.
Mat3 essential_from_pose(const RelativePose& pose);

// F = K1^-T E K2^-1 for the given intrinsics, canonicalized.
FundamentalMatrix fundamental_from_pose(const RelativePose& pose,
                                        const CameraIntrinsics& K1,
                                        const CameraIntrinsics& K2);

// F for two general projection matrices, canonicalized.
FundamentalMatrix fundamental_from_projections(const Mat34& P1, const Mat34& P2);

// The four (R, +-t) factorizations. Order: (Ra, t), (Ra, -t), (Rb, t), (Rb, -t).
std::array<RelativePose, 4> decompose_essential(const EssentialMatrix& E);

struct CheiralityResult {
  RelativePose pose;
  std::size_t index = 0;
  std::array<std::size_t, 4> counts{};
};

// Picks the hypothesis that places the most correspondences in front of both
// cameras (first camera at the origin). Throws AmbiguousCheirality when the
// two best counts are equal.
CheiralityResult select_by_cheirality(const std::array<RelativePose, 4>& hypotheses,
                                      std::span<const Correspondence> corr,
                                      const CameraIntrinsics& K1,
                                      const CameraIntrinsics& K2);

// Ground-truth relative pose between two cameras given in the [R | R T] convention.
RelativePose relative_pose(const CameraExtrinsics& first, const CameraExtrinsics& second);

// Extrinsics of the second camera when the first one is the world frame and
// the baseline has the given length.
CameraExtrinsics extrinsics_from_relative(const RelativePose& pose, double baseline = 1.0);

// Rotation angle of R_a^T R_b in radians.
double rotation_angle(const Mat3& Ra, const Mat3& Rb);

// Full two-view calibration: RANSAC on F, essential matrix, decomposition and
// cheirality on the inliers.
struct TwoViewGeometry {
  RansacReport ransac;
  EssentialMatrix E;
  CheiralityResult selection;
};

TwoViewGeometry estimate_two_view(std::span<const Correspondence> corr,
                                  const CameraIntrinsics& K1,
                                  const CameraIntrinsics& K2,
                                  const RansacOptions& options);

}  // namespace epiforge
