#include "epiforge/pss.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "epiforge/assignment.hpp"
#include "epiforge/error.hpp"
#include "epiforge/random.hpp"

namespace epiforge {

namespace {

double squared_distance(const double* a, const double* b, Eigen::Index dim) {
  double d = 0.0;
  for (Eigen::Index i = 0; i < dim; ++i) {
    const double diff = a[i] - b[i];
    d += diff * diff;
  }
  return d;
}

std::size_t nearest_row(const SampleMatrix& centroids, const double* sample, double* best_distance = nullptr) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
    const double d = squared_distance(centroids.row(c).data(), sample, centroids.cols());
    if (d < best_d) {
      best_d = d;
      best = static_cast<std::size_t>(c);
    }
  }
  if (best_distance) *best_distance = best_d;
  return best;
}

SampleMatrix plus_plus_init(const SampleMatrix& x, std::size_t k, Rng& rng) {
  const auto n = static_cast<std::size_t>(x.rows());
  SampleMatrix centers(static_cast<Eigen::Index>(k), x.cols());
  std::size_t first = static_cast<std::size_t>(rng.below(n));
  centers.row(0) = x.row(static_cast<Eigen::Index>(first));
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) {
    d2[i] = squared_distance(x.row(static_cast<Eigen::Index>(i)).data(), centers.row(0).data(), x.cols());
  }
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double d : d2) total += d;
    if (!(total > 0.0)) {
      throw Error(ErrorKind::InsufficientData,
                  "only " + std::to_string(c) + " distinct samples for k = " + std::to_string(k));
    }
    const double target = rng.uniform() * total;
    double acc = 0.0;
    std::size_t pick = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (d2[i] <= 0.0) continue;
      acc += d2[i];
      pick = i;
      if (acc > target) break;
    }
    centers.row(static_cast<Eigen::Index>(c)) = x.row(static_cast<Eigen::Index>(pick));
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(x.row(static_cast<Eigen::Index>(i)).data(),
                                               centers.row(static_cast<Eigen::Index>(c)).data(), x.cols()));
    }
  }
  return centers;
}

}  // namespace

std::size_t ClusterModel::nearest(const Eigen::Ref<const Eigen::VectorXd>& sample) const {
  if (static_cast<std::size_t>(sample.size()) != dim()) {
    throw Error(ErrorKind::InvalidArgument, "sample dimension does not match the cluster model");
  }
  const Eigen::VectorXd s = sample;
  return nearest_row(centroids, s.data());
}

KMeansResult kmeans(const SampleMatrix& samples, std::size_t k, std::uint64_t seed,
                    std::size_t max_iterations) {
  const auto n = static_cast<std::size_t>(samples.rows());
  if (k < 2) throw Error(ErrorKind::InvalidArgument, "k must be at least 2");
  if (n < k) {
    throw Error(ErrorKind::InsufficientData,
                std::to_string(n) + " samples cannot form " + std::to_string(k) + " clusters");
  }
  Rng rng(seed);
  KMeansResult result;
  ClusterModel& model = result.model;
  model.k = k;
  model.seed = seed;
  model.centroids = plus_plus_init(samples, k, rng);

  std::vector<double> dist(n);
  auto assign = [&](std::vector<std::size_t>& labels) {
    labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = nearest_row(model.centroids, samples.row(static_cast<Eigen::Index>(i)).data(), &dist[i]);
    }
  };

  std::vector<std::size_t>& labels = result.labels;
  assign(labels);
  std::vector<std::size_t> next;
  std::size_t it = 0;
  while (it < max_iterations) {
    ++it;
    SampleMatrix sums = SampleMatrix::Zero(static_cast<Eigen::Index>(k), samples.cols());
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums.row(static_cast<Eigen::Index>(labels[i])) += samples.row(static_cast<Eigen::Index>(i));
      ++counts[labels[i]];
    }
    std::vector<bool> taken(n, false);
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        model.centroids.row(static_cast<Eigen::Index>(c)) = sums.row(static_cast<Eigen::Index>(c)) /
                                                            static_cast<double>(counts[c]);
        continue;
      }
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (!taken[i] && (far == n || dist[i] > dist[far])) far = i;
      }
      taken[far] = true;
      model.centroids.row(static_cast<Eigen::Index>(c)) = samples.row(static_cast<Eigen::Index>(far));
    }
    assign(next);
    if (next == labels) break;
    labels.swap(next);
  }
  result.iterations = it;

  model.inertia = 0.0;
  for (double d : dist) model.inertia += d;
  for (Eigen::Index a = 0; a < model.centroids.rows(); ++a) {
    for (Eigen::Index b = a + 1; b < model.centroids.rows(); ++b) {
      if (!(std::sqrt(squared_distance(model.centroids.row(a).data(), model.centroids.row(b).data(),
                                       model.centroids.cols())) > 1e-12)) {
        throw Error(ErrorKind::InsufficientData, "k-means produced coincident centroids");
      }
    }
  }
  return result;
}

Eigen::VectorXd normalize_pose(const Pose3D& pose, std::size_t root_joint) {
  if (root_joint >= pose.size()) {
    throw Error(ErrorKind::InvalidArgument, "root joint out of range");
  }
  if (pose.visible.size() != pose.size()) {
    throw Error(ErrorKind::InvalidArgument, "joint and visibility counts differ");
  }
  Eigen::VectorXd q(static_cast<Eigen::Index>(3 * pose.size()));
  const Vec3 root = pose.joints[root_joint];
  for (std::size_t j = 0; j < pose.size(); ++j) {
    if (!pose.visible[j] || !pose.joints[j].allFinite()) {
      throw Error(ErrorKind::DegenerateInput, "pose normalization needs every joint visible and finite");
    }
    q.segment<3>(static_cast<Eigen::Index>(3 * j)) = pose.joints[j] - root;
  }
  const double norm = q.norm();
  if (!(norm > 0.0)) {
    throw Error(ErrorKind::DegenerateInput, "pose has zero norm after centering");
  }
  return q / norm;
}

SampleMatrix normalize_poses(std::span<const Pose3D> poses, std::size_t root_joint) {
  if (poses.empty()) return {};
  const auto dim = static_cast<Eigen::Index>(3 * poses.front().size());
  SampleMatrix out(static_cast<Eigen::Index>(poses.size()), dim);
  for (std::size_t i = 0; i < poses.size(); ++i) {
    if (static_cast<Eigen::Index>(3 * poses[i].size()) != dim) {
      throw Error(ErrorKind::InvalidArgument, "poses disagree on the joint count");
    }
    out.row(static_cast<Eigen::Index>(i)) = normalize_pose(poses[i], root_joint).transpose();
  }
  return out;
}

ClusterModel fit_clusters(std::span<const Pose3D> gt_poses, std::size_t k, std::uint64_t seed) {
  if (gt_poses.size() < k) {
    throw Error(ErrorKind::InsufficientData, std::to_string(gt_poses.size()) + " poses cannot form " +
                                                 std::to_string(k) + " clusters");
  }
  return kmeans(normalize_poses(gt_poses), k, seed).model;
}

int pss(const Pose3D& pred, const Pose3D& gt, const ClusterModel& model) {
  return model.nearest(normalize_pose(pred)) == model.nearest(normalize_pose(gt)) ? 1 : 0;
}

PssReport mpss(std::span<const Pose3D> preds, std::span<const Pose3D> gts, const ClusterModel& model) {
  if (preds.size() != gts.size()) {
    throw Error(ErrorKind::LengthMismatch, "prediction and ground-truth counts differ");
  }
  if (preds.empty()) {
    throw Error(ErrorKind::EmptyInput, "no poses to score");
  }
  PssReport report;
  report.k = model.k;
  report.per_pose.reserve(preds.size());
  long total = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    report.per_pose.push_back(pss(preds[i], gts[i], model));
    total += report.per_pose.back();
  }
  report.mpss = static_cast<double>(total) / static_cast<double>(preds.size());
  return report;
}

double matched_iou(std::span<const std::size_t> a, std::span<const std::size_t> b, std::size_t k) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::LengthMismatch, "labelings differ in length");
  }
  const auto kk = static_cast<Eigen::Index>(k);
  Eigen::MatrixXd inter = Eigen::MatrixXd::Zero(kk, kk);
  Eigen::VectorXd size_a = Eigen::VectorXd::Zero(kk), size_b = Eigen::VectorXd::Zero(kk);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] >= k || b[i] >= k) throw Error(ErrorKind::InvalidArgument, "label out of range");
    inter(static_cast<Eigen::Index>(a[i]), static_cast<Eigen::Index>(b[i])) += 1.0;
    size_a(static_cast<Eigen::Index>(a[i])) += 1.0;
    size_b(static_cast<Eigen::Index>(b[i])) += 1.0;
  }
  Eigen::MatrixXd iou(kk, kk);
  for (Eigen::Index i = 0; i < kk; ++i) {
    for (Eigen::Index j = 0; j < kk; ++j) {
      const double uni = size_a(i) + size_b(j) - inter(i, j);
      iou(i, j) = uni > 0.0 ? inter(i, j) / uni : 0.0;
    }
  }
  const auto match = max_weight_assignment(iou);
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) sum += iou(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(match[i]));
  return sum / static_cast<double>(k);
}

double stability_iou(std::span<const Pose3D> gt_poses, std::size_t k, std::span<const std::uint64_t> seeds) {
  if (seeds.size() < 2) throw Error(ErrorKind::InvalidArgument, "stability needs at least 2 runs");
  if (gt_poses.size() < k) {
    throw Error(ErrorKind::InsufficientData, std::to_string(gt_poses.size()) + " poses cannot form " +
                                                 std::to_string(k) + " clusters");
  }
  const SampleMatrix x = normalize_poses(gt_poses);
  std::vector<std::vector<std::size_t>> runs;
  runs.reserve(seeds.size());
  for (std::uint64_t s : seeds) runs.push_back(kmeans(x, k, s).labels);
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < runs.size(); ++a) {
    for (std::size_t b = a + 1; b < runs.size(); ++b) {
      sum += matched_iou(runs[a], runs[b], k);
      ++pairs;
    }
  }
  return sum / static_cast<double>(pairs);
}

double stability_iou(std::span<const Pose3D> gt_poses, std::size_t k, std::size_t n_runs, std::uint64_t seed) {
  std::vector<std::uint64_t> seeds(n_runs);
  for (std::size_t r = 0; r < n_runs; ++r) seeds[r] = derive_seed(seed, r);
  return stability_iou(gt_poses, k, seeds);
}

}  // namespace epiforge
