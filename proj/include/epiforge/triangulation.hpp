#pragma once

#include <optional>
#include <span>
#include <vector>

#include "epiforge/camera.hpp"
#include "epiforge/epipolar.hpp"

namespace epiforge {

// Homogeneous linear triangulation. Returns the unit-norm null vector of the
// stacked DLT system; no degeneracy checks, so points at infinity come back
// with a vanishing last coordinate.
Vec4 triangulate_homogeneous(const Vec2& u1, const Vec2& u2, const Mat34& P1, const Mat34& P2);

// DLT triangulation. Throws ParallelRays when the two rays do not pin down a
// finite point (identical cameras, parallel rays).
Vec3 triangulate_dlt(const Vec2& u1, const Vec2& u2, const Mat34& P1, const Mat34& P2);

struct PolynomialTriangulation {
  Vec3 point;
  // Epipolar-consistent image points closest to the observations.
  Vec2 corrected_first;
  Vec2 corrected_second;
  // Sum of squared corrections over both images, pixels^2.
  double image_error = 0.0;
  bool used_fallback = false;
};

// Optimal two-view triangulation: corrects the observations to the nearest
// pair satisfying x1^T F x2 = 0 by minimizing over the pencil of epipolar
// lines (roots of a degree-6 polynomial, plus the point at infinity), then
// triangulates the corrected pair. Falls back to DLT with a warning if the
// correction cannot be computed.
PolynomialTriangulation triangulate_polynomial(const Vec2& u1, const Vec2& u2,
                                               const FundamentalMatrix& F,
                                               const Mat34& P1, const Mat34& P2);

// Real roots of sum_i coeffs[i] t^i via companion-matrix eigenvalues.
std::vector<double> real_polynomial_roots(std::span<const double> coeffs);

enum class FusionMethod { Medoid, GeometricMedian };

// Medoid: the candidate minimizing the summed Euclidean distance to all
// others, lowest index on ties. Requires at least one candidate.
Vec3 vector_median(std::span<const Vec3> candidates);

// Weiszfeld iteration for the geometric median (not restricted to the inputs).
Vec3 geometric_median(std::span<const Vec3> candidates, int max_iterations = 200, double tolerance = 1e-10);

struct TriangulatedPose {
  Pose3D pose;
  std::vector<std::size_t> per_joint_views;
  double reprojection_rmse = 0.0;
};

struct View {
  Pose2D observation;
  Mat34 P;
};

struct TriangulationOptions {
  FusionMethod fusion = FusionMethod::Medoid;
};

// Triangulates every joint from each consecutive view pair (i, i+1) in which
// it is visible in both images, then fuses the candidates. fundamentals, when
// non-empty, must hold one F per consecutive pair; otherwise F is derived from
// the projection matrices. Throws NoVisibleJoints when no joint survives.
TriangulatedPose triangulate_pose(std::span<const View> views,
                                  std::span<const FundamentalMatrix> fundamentals = {},
                                  const TriangulationOptions& options = {});

// Smooth-L1: 0.5 x^2 for |x| < 1, |x| - 0.5 otherwise.
double smooth_l1(double x);

// Mean smooth-L1 over the coordinates of mutually visible joints. Throws
// EmptyOverlap when no joint is visible in both poses.
double smooth_l1_loss(const Pose3D& pred, const Pose3D& target);

}  // namespace epiforge
