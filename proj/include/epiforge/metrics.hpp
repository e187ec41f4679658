#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include "epiforge/camera.hpp"

namespace epiforge {

struct MetricOptions {
  // Joint translated to the origin in both poses before MPJPE, NMPJPE, PCK and
  // NPCK. std::nullopt disables root-centering.
  std::optional<std::size_t> root_joint = 0;
  // PCK counts joints with error strictly below this many millimeters.
  double pck_threshold = 150.0;
};

struct SimilarityTransform {
  double scale = 1.0;
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return scale * (R * p) + t; }
};

// Least-squares similarity mapping source onto target (Umeyama), reflections
// excluded. Throws DegenerateInput if either point set is collinear.
SimilarityTransform procrustes_align(std::span<const Vec3> source, std::span<const Vec3> target);

// Every metric scores only joints visible in both poses. Mismatched joint
// counts raise InvalidArgument; no overlap raises EmptyOverlap.
double mpjpe(const Pose3D& pred, const Pose3D& gt, const MetricOptions& options = {});

// s* = <pred, gt> / <pred, pred> after root-centering.
double optimal_scale(const Pose3D& pred, const Pose3D& gt, const MetricOptions& options = {});

double nmpjpe(const Pose3D& pred, const Pose3D& gt, const MetricOptions& options = {});

// MPJPE after the optimal similarity alignment; needs 3 non-collinear joints.
double pmpjpe(const Pose3D& pred, const Pose3D& gt);

double pck(const Pose3D& pred, const Pose3D& gt, const MetricOptions& options = {});
double npck(const Pose3D& pred, const Pose3D& gt, const MetricOptions& options = {});

struct MetricReport {
  double mpjpe = 0.0;
  double nmpjpe = 0.0;
  double pmpjpe = 0.0;
  double pck = 0.0;
  double npck = 0.0;
  std::size_t n_poses = 0;
  // Pairs with no mutually visible joints; left out of the means.
  std::size_t n_skipped = 0;
};

// Dataset aggregate: arithmetic mean of the per-pose metrics.
MetricReport evaluate_poses(std::span<const Pose3D> preds, std::span<const Pose3D> gts,
                            const MetricOptions& options = {});

}  // namespace epiforge
