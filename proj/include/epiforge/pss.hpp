#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "epiforge/camera.hpp"

namespace epiforge {

// Rows are samples.
using SampleMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Reference distribution for the Pose Structure Score: k centroids in the
// unit-normalized pose space (D = 3J).
struct ClusterModel {
  SampleMatrix centroids;  // k x D
  std::size_t k = 0;
  std::uint64_t seed = 0;
  double inertia = 0.0;

  std::size_t dim() const { return static_cast<std::size_t>(centroids.cols()); }
  // Nearest centroid by squared Euclidean distance, lowest index on ties.
  std::size_t nearest(const Eigen::Ref<const Eigen::VectorXd>& sample) const;
};

struct KMeansResult {
  ClusterModel model;
  std::vector<std::size_t> labels;
  std::size_t iterations = 0;
};

// Lloyd iterations from a k-means++ start; stops when no label changes or
// after max_iterations. Empty clusters are reseeded at the sample farthest
// from its centroid. Throws InsufficientData if there are fewer than k
// distinct samples.
KMeansResult kmeans(const SampleMatrix& samples, std::size_t k, std::uint64_t seed,
                    std::size_t max_iterations = 300);

// Root-centered, flattened to 3J and scaled to unit norm. All joints must be
// visible. Throws DegenerateInput for a zero-norm pose.
Eigen::VectorXd normalize_pose(const Pose3D& pose, std::size_t root_joint = 0);

SampleMatrix normalize_poses(std::span<const Pose3D> poses, std::size_t root_joint = 0);

// k-means over normalized ground-truth poses. Throws InsufficientData when
// there are fewer than k poses.
ClusterModel fit_clusters(std::span<const Pose3D> gt_poses, std::size_t k, std::uint64_t seed);

// 1 if pred and gt fall into the same cluster, else 0.
int pss(const Pose3D& pred, const Pose3D& gt, const ClusterModel& model);

struct PssReport {
  double mpss = 0.0;
  std::vector<int> per_pose;
  std::size_t k = 0;
};

PssReport mpss(std::span<const Pose3D> preds, std::span<const Pose3D> gts, const ClusterModel& model);

// Mean IOU between the clusters of two labelings after matching clusters one
// to one so that the summed IOU is maximal.
double matched_iou(std::span<const std::size_t> a, std::span<const std::size_t> b, std::size_t k);

// Clusters the poses once per seed and averages matched_iou over all pairs of runs.
double stability_iou(std::span<const Pose3D> gt_poses, std::size_t k, std::span<const std::uint64_t> seeds);

// Seeds derive_seed(seed, 0 .. n_runs-1).
double stability_iou(std::span<const Pose3D> gt_poses, std::size_t k, std::size_t n_runs, std::uint64_t seed);

}  // namespace epiforge
