#include "epiforge/metrics.hpp"

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/LU>
#include <Eigen/SVD>

#include "epiforge/error.hpp"

namespace epiforge {

namespace {

struct JointPairs {
  std::vector<Vec3> pred;
  std::vector<Vec3> gt;
};

JointPairs mutual_joints(const Pose3D& pred, const Pose3D& gt) {
  if (pred.size() != gt.size() || pred.visible.size() != pred.size() ||
      gt.visible.size() != gt.size()) {
    throw Error(ErrorKind::LengthMismatch, "poses have different joint counts");
  }
  JointPairs pairs;
  for (std::size_t j = 0; j < pred.size(); ++j) {
    if (!pred.visible[j] || !gt.visible[j]) continue;
    pairs.pred.push_back(pred.joints[j]);
    pairs.gt.push_back(gt.joints[j]);
  }
  if (pairs.pred.empty()) {
    throw Error(ErrorKind::EmptyOverlap, "no joint is visible in both poses");
  }
  return pairs;
}

JointPairs centered_joints(const Pose3D& pred, const Pose3D& gt, const MetricOptions& options) {
  JointPairs pairs = mutual_joints(pred, gt);
  if (!options.root_joint) return pairs;
  const std::size_t root = *options.root_joint;
  if (root >= pred.size() || !pred.visible[root] || !gt.visible[root]) {
    throw Error(ErrorKind::DegenerateInput, "root joint " + std::to_string(root) + " is not visible in both poses");
  }
  const Vec3 pr = pred.joints[root];
  const Vec3 gr = gt.joints[root];
  for (auto& p : pairs.pred) p -= pr;
  for (auto& g : pairs.gt) g -= gr;
  return pairs;
}

double mean_distance(std::span<const Vec3> a, std::span<const Vec3> b, double scale = 1.0) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += (scale * a[i] - b[i]).norm();
  return sum / static_cast<double>(a.size());
}

double fraction_within(std::span<const Vec3> a, std::span<const Vec3> b, double threshold,
                       double scale = 1.0) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < a.size(); ++i) hits += (scale * a[i] - b[i]).norm() < threshold ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(a.size());
}

double scale_for(const JointPairs& pairs) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < pairs.pred.size(); ++i) {
    num += pairs.pred[i].dot(pairs.gt[i]);
    den += pairs.pred[i].squaredNorm();
  }
  if (!(den > 0.0)) {
    throw Error(ErrorKind::DegenerateInput, "prediction has zero norm; scale is undefined");
  }
  return num / den;
}

Eigen::Matrix3Xd centered(std::span<const Vec3> pts, Vec3& mean) {
  mean = Vec3::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  Eigen::Matrix3Xd out(3, static_cast<Eigen::Index>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = pts[i] - mean;
  return out;
}

bool collinear(const Eigen::Matrix3Xd& c) {
  Eigen::JacobiSVD<Eigen::Matrix3Xd> svd(c);
  const Vec3 s = svd.singularValues();
  return !(s(0) > 0.0) || s(1) <= 1e-12 * s(0);
}

}  // namespace

SimilarityTransform procrustes_align(std::span<const Vec3> source, std::span<const Vec3> target) {
  if (source.size() != target.size()) {
    throw Error(ErrorKind::InvalidArgument, "point sets differ in size");
  }
  if (source.size() < 3) {
    throw Error(ErrorKind::DegenerateInput, "alignment needs at least 3 points");
  }
  Vec3 mu_s, mu_t;
  const Eigen::Matrix3Xd S = centered(source, mu_s);
  const Eigen::Matrix3Xd T = centered(target, mu_t);
  if (collinear(S) || collinear(T)) {
    throw Error(ErrorKind::DegenerateInput, "points are collinear");
  }
  const Mat3 cov = T * S.transpose();
  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vec3 d(1.0, 1.0, 1.0);
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(2) = -1.0;
  SimilarityTransform xf;
  xf.R = svd.matrixU() * d.asDiagonal() * svd.matrixV().transpose();
  xf.scale = svd.singularValues().dot(d) / S.squaredNorm();
  xf.t = mu_t - xf.scale * xf.R * mu_s;
  return xf;
}

double mpjpe(const Pose3D& pred, const Pose3D& gt, const MetricOptions& options) {
  const auto pairs = centered_joints(pred, gt, options);
  return mean_distance(pairs.pred, pairs.gt);
}

double optimal_scale(const Pose3D& pred, const Pose3D& gt, const MetricOptions& options) {
  return scale_for(centered_joints(pred, gt, options));
}

double nmpjpe(const Pose3D& pred, const Pose3D& gt, const MetricOptions& options) {
  const auto pairs = centered_joints(pred, gt, options);
  return mean_distance(pairs.pred, pairs.gt, scale_for(pairs));
}

double pmpjpe(const Pose3D& pred, const Pose3D& gt) {
  const auto pairs = mutual_joints(pred, gt);
  const auto xf = procrustes_align(pairs.pred, pairs.gt);
  double sum = 0.0;
  for (std::size_t i = 0; i < pairs.pred.size(); ++i) sum += (xf.apply(pairs.pred[i]) - pairs.gt[i]).norm();
  return sum / static_cast<double>(pairs.pred.size());
}

double pck(const Pose3D& pred, const Pose3D& gt, const MetricOptions& options) {
  const auto pairs = centered_joints(pred, gt, options);
  return fraction_within(pairs.pred, pairs.gt, options.pck_threshold);
}

double npck(const Pose3D& pred, const Pose3D& gt, const MetricOptions& options) {
  const auto pairs = centered_joints(pred, gt, options);
  return fraction_within(pairs.pred, pairs.gt, options.pck_threshold, scale_for(pairs));
}

MetricReport evaluate_poses(std::span<const Pose3D> preds, std::span<const Pose3D> gts,
                            const MetricOptions& options) {
  if (preds.size() != gts.size()) {
    throw Error(ErrorKind::LengthMismatch, "prediction and ground-truth counts differ");
  }
  if (preds.empty()) {
    throw Error(ErrorKind::EmptyInput, "no poses to evaluate");
  }
  MetricReport report;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i].size() != gts[i].size()) {
      throw Error(ErrorKind::LengthMismatch, "pose " + std::to_string(i) + " has a different joint count");
    }
    double m = 0.0, nm = 0.0, pm = 0.0, p = 0.0, np = 0.0;
    try {
      m = mpjpe(preds[i], gts[i], options);
      nm = nmpjpe(preds[i], gts[i], options);
      pm = pmpjpe(preds[i], gts[i]);
      p = pck(preds[i], gts[i], options);
      np = npck(preds[i], gts[i], options);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::EmptyOverlap && e.kind() != ErrorKind::DegenerateInput) throw;
      ++report.n_skipped;
      continue;
    }
    report.mpjpe += m;
    report.nmpjpe += nm;
    report.pmpjpe += pm;
    report.pck += p;
    report.npck += np;
    ++report.n_poses;
  }
  if (report.n_poses == 0) {
    throw Error(ErrorKind::EmptyOverlap, "no pose pair could be evaluated");
  }
  const double n = static_cast<double>(report.n_poses);
  report.mpjpe /= n;
  report.nmpjpe /= n;
  report.pmpjpe /= n;
  report.pck /= n;
  report.npck /= n;
  return report;
}

}  // namespace epiforge
