#include "epiforge/epipolar.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <Eigen/LU>
#include <Eigen/SVD>

#include "epiforge/error.hpp"
#include "epiforge/random.hpp"
#include "epiforge/triangulation.hpp"

namespace epiforge {

namespace {

constexpr std::size_t kMinimalSample = 8;
constexpr double kRankTolerance = 1e-10;

Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return s;
}

// Similarity taking the points to zero centroid and mean distance sqrt(2).
Mat3 conditioning_transform(std::span<const Vec2> pts) {
  Vec2 centroid = Vec2::Zero();
  for (const auto& p : pts) centroid += p;
  centroid /= static_cast<double>(pts.size());
  double mean_dist = 0.0;
  for (const auto& p : pts) mean_dist += (p - centroid).norm();
  mean_dist /= static_cast<double>(pts.size());
  if (!(mean_dist > 1e-12 * (1.0 + centroid.norm()))) {
    throw Error(ErrorKind::DegenerateConfiguration, "all points coincide in one view");
  }
  const double s = std::sqrt(2.0) / mean_dist;
  Mat3 T;
  T << s, 0.0, -s * centroid.x(),
       0.0, s, -s * centroid.y(),
       0.0, 0.0, 1.0;
  return T;
}

Mat3 enforce_rank2(const Mat3& F) {
  Eigen::JacobiSVD<Mat3> svd(F, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vec3 s = svd.singularValues();
  s(2) = 0.0;
  return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

std::size_t mark_inliers(const Mat3& F, std::span<const Correspondence> corr, double threshold,
                         std::vector<bool>& mask) {
  mask.assign(corr.size(), false);
  std::size_t n = 0;
  for (std::size_t i = 0; i < corr.size(); ++i) {
    const double d = sampson_distance(F, corr[i].first, corr[i].second);
    if (d <= threshold) {
      mask[i] = true;
      ++n;
    }
  }
  return n;
}

std::vector<Correspondence> select(std::span<const Correspondence> corr, const std::vector<bool>& mask) {
  std::vector<Correspondence> out;
  for (std::size_t i = 0; i < corr.size(); ++i) {
    if (mask[i]) out.push_back(corr[i]);
  }
  return out;
}

std::size_t required_iterations(std::size_t inliers, std::size_t total, double confidence,
                                std::size_t cap) {
  const double w = static_cast<double>(inliers) / static_cast<double>(total);
  const double all_good = std::pow(w, static_cast<double>(kMinimalSample));
  if (all_good >= 1.0 - 1e-15) return 0;
  if (all_good <= 0.0) return cap;
  const double n = std::log(1.0 - confidence) / std::log(1.0 - all_good);
  if (!std::isfinite(n) || n >= static_cast<double>(cap)) return cap;
  return static_cast<std::size_t>(std::ceil(n));
}

}  // namespace

bool RansacReport::operator==(const RansacReport& other) const {
  return F.F == other.F.F && inliers == other.inliers && num_inliers == other.num_inliers &&
         iterations == other.iterations && threshold == other.threshold;
}

Mat3 canonicalize(const Mat3& F) {
  const double norm = F.norm();
  if (!(norm > 0.0)) return F;
  Mat3 out = F / norm;
  Eigen::Index r = 0, c = 0;
  out.cwiseAbs().maxCoeff(&r, &c);
  if (out(r, c) < 0.0) out = -out;
  return out;
}

FundamentalMatrix eight_point(std::span<const Correspondence> corr) {
  const std::size_t n = corr.size();
  if (n < kMinimalSample) {
    throw Error(ErrorKind::DegenerateConfiguration,
                "eight_point needs at least 8 correspondences, got " + std::to_string(n));
  }
  std::vector<Vec2> first(n), second(n);
  for (std::size_t i = 0; i < n; ++i) {
    first[i] = corr[i].first;
    second[i] = corr[i].second;
  }
  const Mat3 T1 = conditioning_transform(first);
  const Mat3 T2 = conditioning_transform(second);

  Eigen::Matrix<double, Eigen::Dynamic, 9> A(static_cast<Eigen::Index>(n), 9);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 a = T1 * first[i].homogeneous();
    const Vec3 b = T2 * second[i].homogeneous();
    A.row(static_cast<Eigen::Index>(i)) << a.x() * b.x(), a.x() * b.y(), a.x() * b.z(),
        a.y() * b.x(), a.y() * b.y(), a.y() * b.z(),
        a.z() * b.x(), a.z() * b.y(), a.z() * b.z();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (!(sv(0) > 0.0) || sv(7) / sv(0) < kRankTolerance) {
    throw Error(ErrorKind::DegenerateConfiguration, "design matrix has rank < 8");
  }
  const Eigen::Matrix<double, 9, 1> f = svd.matrixV().col(8);
  Mat3 Fn;
  Fn << f(0), f(1), f(2),
        f(3), f(4), f(5),
        f(6), f(7), f(8);
  Fn = enforce_rank2(Fn);
  return {canonicalize(T1.transpose() * Fn * T2)};
}

double epipolar_residual(const Mat3& F, const Vec2& first, const Vec2& second) {
  return first.homogeneous().dot(F * second.homogeneous());
}

double sampson_distance(const Mat3& F, const Vec2& first, const Vec2& second) {
  const Vec3 x1 = first.homogeneous();
  const Vec3 x2 = second.homogeneous();
  const Vec3 line1 = F * x2;              // epipolar line in the first image
  const Vec3 line2 = F.transpose() * x1;  // epipolar line in the second image
  const double r = x1.dot(line1);
  const double denom = line1.head<2>().squaredNorm() + line2.head<2>().squaredNorm();
  if (!(denom > 0.0)) return r == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::abs(r) / std::sqrt(denom);
}

RansacReport ransac_fundamental(std::span<const Correspondence> corr, const RansacOptions& options) {
  const std::size_t n = corr.size();
  if (n < kMinimalSample) {
    throw Error(ErrorKind::InsufficientInliers,
                "RANSAC needs at least 8 correspondences, got " + std::to_string(n));
  }
  if (!(options.threshold > 0.0) || options.max_iterations == 0 || !(options.confidence > 0.0) ||
      !(options.confidence < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "invalid RANSAC options");
  }

  Rng rng(options.seed);
  std::vector<std::size_t> index(n);
  std::iota(index.begin(), index.end(), std::size_t{0});
  std::array<Correspondence, kMinimalSample> sample;
  std::vector<bool> mask;

  RansacReport best;
  best.threshold = options.threshold;
  std::size_t needed = options.max_iterations;
  std::size_t it = 0;
  for (; it < needed; ++it) {
    for (std::size_t k = 0; k < kMinimalSample; ++k) {
      const std::size_t pick = k + static_cast<std::size_t>(rng.below(n - k));
      std::swap(index[k], index[pick]);
      sample[k] = corr[index[k]];
    }
    FundamentalMatrix F;
    try {
      F = eight_point(sample);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DegenerateConfiguration) throw;
      continue;
    }
    const std::size_t count = mark_inliers(F.F, corr, options.threshold, mask);
    if (count > best.num_inliers) {
      best.F = F;
      best.inliers = mask;
      best.num_inliers = count;
      needed = std::min(options.max_iterations,
                        std::max(it + 1, required_iterations(count, n, options.confidence,
                                                             options.max_iterations)));
    }
  }
  best.iterations = it;
  if (best.num_inliers < kMinimalSample) {
    throw Error(ErrorKind::InsufficientInliers,
                "best hypothesis has " + std::to_string(best.num_inliers) + " inliers");
  }

  // Re-estimate on the consensus set until it stops growing.
  for (int round = 0; round < 10; ++round) {
    FundamentalMatrix refined;
    try {
      refined = eight_point(select(corr, best.inliers));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DegenerateConfiguration) throw;
      break;
    }
    const std::size_t count = mark_inliers(refined.F, corr, options.threshold, mask);
    if (count < kMinimalSample || count < best.num_inliers) break;
    const bool stable = mask == best.inliers;
    best.F = refined;
    best.inliers = mask;
    best.num_inliers = count;
    if (stable) break;
  }
  return best;
}

EssentialMatrix essential_from_fundamental(const FundamentalMatrix& F,
                                           const CameraIntrinsics& K1,
                                           const CameraIntrinsics& K2) {
  K1.validate();
  K2.validate();
  const Mat3 raw = K1.K().transpose() * F.F * K2.K();
  Eigen::JacobiSVD<Mat3> svd(raw, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 s = svd.singularValues();
  const double sigma = 0.5 * (s(0) + s(1));
  return {svd.matrixU() * Vec3(sigma, sigma, 0.0).asDiagonal() * svd.matrixV().transpose()};
}

Mat3 essential_from_pose(const RelativePose& pose) {
  return (skew(pose.t) * pose.R).transpose();
}

FundamentalMatrix fundamental_from_pose(const RelativePose& pose,
                                        const CameraIntrinsics& K1,
                                        const CameraIntrinsics& K2) {
  const Mat3 E = essential_from_pose(pose);
  return {canonicalize(K1.K().inverse().transpose() * E * K2.K().inverse())};
}

FundamentalMatrix fundamental_from_projections(const Mat34& P1, const Mat34& P2) {
  // Textbook orientation x2^T G x1 = 0, transposed into ours.
  const Mat3 M1 = P1.leftCols<3>();
  Eigen::FullPivLU<Mat3> lu(M1);
  Mat3 G;
  if (lu.isInvertible()) {
    // Finite first camera: center -M1^-1 p4, G = [e2]x M2 M1^-1.
    const Vec3 center = -lu.solve(P1.col(3));
    const Vec3 epipole2 = P2.leftCols<3>() * center + P2.col(3);
    G = skew(epipole2) * P2.leftCols<3>() * lu.inverse();
  } else {
    Eigen::JacobiSVD<Mat34> svd(P1, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec4 center = svd.matrixV().col(3);
    const Vec3 sv = svd.singularValues();
    Eigen::Matrix<double, 4, 3> pinv = Eigen::Matrix<double, 4, 3>::Zero();
    for (int i = 0; i < 3; ++i) {
      if (sv(i) > 0.0) pinv += svd.matrixV().col(i) * svd.matrixU().col(i).transpose() / sv(i);
    }
    G = skew(P2 * center) * P2 * pinv;
  }
  return {canonicalize(G.transpose())};
}

std::array<RelativePose, 4> decompose_essential(const EssentialMatrix& E) {
  // Textbook orientation: E_std = [t]x R.
  const Mat3 Estd = E.E.transpose();
  Eigen::JacobiSVD<Mat3> svd(Estd, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 U = svd.matrixU();
  Mat3 V = svd.matrixV();
  if (U.determinant() < 0.0) U.col(2) *= -1.0;
  if (V.determinant() < 0.0) V.col(2) *= -1.0;
  Mat3 W;
  W << 0.0, -1.0, 0.0,
       1.0, 0.0, 0.0,
       0.0, 0.0, 1.0;
  const Mat3 Ra = U * W * V.transpose();
  const Mat3 Rb = U * W.transpose() * V.transpose();
  const Vec3 t = U.col(2).normalized();
  return {RelativePose{Ra, t}, RelativePose{Ra, -t}, RelativePose{Rb, t}, RelativePose{Rb, -t}};
}

CheiralityResult select_by_cheirality(const std::array<RelativePose, 4>& hypotheses,
                                      std::span<const Correspondence> corr,
                                      const CameraIntrinsics& K1,
                                      const CameraIntrinsics& K2) {
  if (corr.empty()) {
    throw Error(ErrorKind::InvalidArgument, "cheirality check needs at least one correspondence");
  }
  const Mat3 K1inv = K1.K().inverse();
  const Mat3 K2inv = K2.K().inverse();
  std::vector<Vec2> n1(corr.size()), n2(corr.size());
  for (std::size_t i = 0; i < corr.size(); ++i) {
    n1[i] = (K1inv * corr[i].first.homogeneous()).hnormalized();
    n2[i] = (K2inv * corr[i].second.homogeneous()).hnormalized();
  }

  CheiralityResult result;
  Mat34 P1 = Mat34::Zero();
  P1.leftCols<3>() = Mat3::Identity();
  for (std::size_t h = 0; h < hypotheses.size(); ++h) {
    Mat34 P2;
    P2.leftCols<3>() = hypotheses[h].R;
    P2.col(3) = hypotheses[h].t;
    std::size_t count = 0;
    for (std::size_t i = 0; i < corr.size(); ++i) {
      const Vec4 X = triangulate_homogeneous(n1[i], n2[i], P1, P2);
      // Depth signs of a homogeneous point: (P X)_z * w.
      const double w = X(3);
      if (std::abs(w) <= 1e-12 * X.head<3>().norm()) continue;
      const double d1 = (P1 * X)(2) * w;
      const double d2 = (P2 * X)(2) * w;
      if (d1 > 0.0 && d2 > 0.0) ++count;
    }
    result.counts[h] = count;
  }

  std::array<std::size_t, 4> order{0, 1, 2, 3};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return result.counts[a] > result.counts[b]; });
  if (result.counts[order[0]] == result.counts[order[1]]) {
    throw Error(ErrorKind::AmbiguousCheirality,
                "hypotheses " + std::to_string(order[0]) + " and " + std::to_string(order[1]) +
                    " both place " + std::to_string(result.counts[order[0]]) +
                    " points in front of the cameras");
  }
  result.index = order[0];
  result.pose = hypotheses[order[0]];
  return result;
}

RelativePose relative_pose(const CameraExtrinsics& first, const CameraExtrinsics& second) {
  const Vec3 t = second.R * (second.T - first.T);
  if (!(t.norm() > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "cameras share a center; baseline is zero");
  }
  return {second.R * first.R.transpose(), t.normalized()};
}

CameraExtrinsics extrinsics_from_relative(const RelativePose& pose, double baseline) {
  CameraExtrinsics extr;
  extr.R = pose.R;
  extr.T = pose.R.transpose() * pose.t * baseline;
  return extr;
}

double rotation_angle(const Mat3& Ra, const Mat3& Rb) {
  const Mat3 D = Ra.transpose() * Rb;
  const Vec3 axis(D(2, 1) - D(1, 2), D(0, 2) - D(2, 0), D(1, 0) - D(0, 1));
  const double sin_angle = 0.5 * axis.norm();
  const double cos_angle = 0.5 * (D.trace() - 1.0);
  return std::atan2(sin_angle, cos_angle);
}

TwoViewGeometry estimate_two_view(std::span<const Correspondence> corr,
                                  const CameraIntrinsics& K1,
                                  const CameraIntrinsics& K2,
                                  const RansacOptions& options) {
  TwoViewGeometry g;
  g.ransac = ransac_fundamental(corr, options);
  g.E = essential_from_fundamental(g.ransac.F, K1, K2);
  const auto hypotheses = decompose_essential(g.E);
  const auto inliers = select(corr, g.ransac.inliers);
  g.selection = select_by_cheirality(hypotheses, inliers, K1, K2);
  return g;
}

}  // namespace epiforge
