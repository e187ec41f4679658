#include "epiforge/triangulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "epiforge/error.hpp"
#include "epiforge/log.hpp"

namespace epiforge {

namespace {

constexpr double kNullSpaceTolerance = 1e-12;
constexpr double kRealRootTolerance = 1e-8;

using Poly = std::vector<double>;  // ascending powers

Poly multiply(const Poly& a, const Poly& b) {
  Poly out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  }
  return out;
}

Poly add(const Poly& a, const Poly& b, double scale_b = 1.0) {
  Poly out(std::max(a.size(), b.size()), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) out[i] += a[i];
  for (std::size_t i = 0; i < b.size(); ++i) out[i] += scale_b * b[i];
  return out;
}

double evaluate(std::span<const double> p, double t) {
  double v = 0.0;
  for (std::size_t i = p.size(); i-- > 0;) v = v * t + p[i];
  return v;
}

double evaluate_derivative(std::span<const double> p, double t) {
  double v = 0.0;
  for (std::size_t i = p.size(); i-- > 1;) v = v * t + static_cast<double>(i) * p[i];
  return v;
}

// Stacked DLT rows, each scaled to unit norm.
Eigen::Matrix4d dlt_system(const Vec2& u1, const Vec2& u2, const Mat34& P1, const Mat34& P2) {
  Eigen::Matrix4d A;
  A.row(0) = u1.x() * P1.row(2) - P1.row(0);
  A.row(1) = u1.y() * P1.row(2) - P1.row(1);
  A.row(2) = u2.x() * P2.row(2) - P2.row(0);
  A.row(3) = u2.y() * P2.row(2) - P2.row(1);
  for (int r = 0; r < 4; ++r) {
    const double n = A.row(r).norm();
    if (n > 0.0) A.row(r) /= n;
  }
  return A;
}

Vec3 camera_center(const Mat34& P) {
  Eigen::JacobiSVD<Mat34> svd(P, Eigen::ComputeFullV);
  const Vec4 c = svd.matrixV().col(3);
  return c.head<3>() / c(3);
}

// Closest point to the origin on the line (a, b, c).
Vec2 foot_of_origin(const Vec3& l) {
  const double d = l.x() * l.x() + l.y() * l.y();
  return Vec2(-l.x() * l.z() / d, -l.y() * l.z() / d);
}

struct Correction {
  Vec2 first;
  Vec2 second;
};

// Optimal correction of (u1, u2) onto the epipolar variety. G is in textbook
// orientation (u2^T G u1 = 0). Returns nothing if the problem degenerates.
std::optional<Correction> optimal_correction(const Vec2& u1, const Vec2& u2, const Mat3& G0) {
  Mat3 T1 = Mat3::Identity();
  Mat3 T2 = Mat3::Identity();
  T1.col(2).head<2>() = -u1;
  T2.col(2).head<2>() = -u2;
  Mat3 T1inv = Mat3::Identity();
  Mat3 T2inv = Mat3::Identity();
  T1inv.col(2).head<2>() = u1;
  T2inv.col(2).head<2>() = u2;

  Mat3 G = T2inv.transpose() * G0 * T1inv;

  Eigen::JacobiSVD<Mat3> svd(G, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vec3 e1 = svd.matrixV().col(2);  // G e1 = 0
  Vec3 e2 = svd.matrixU().col(2);  // e2^T G = 0
  const double n1 = e1.head<2>().norm();
  const double n2 = e2.head<2>().norm();
  if (!(n1 > 1e-15) || !(n2 > 1e-15)) return std::nullopt;
  e1 /= n1;
  e2 /= n2;

  Mat3 R1, R2;
  R1 << e1.x(), e1.y(), 0.0,
        -e1.y(), e1.x(), 0.0,
        0.0, 0.0, 1.0;
  R2 << e2.x(), e2.y(), 0.0,
        -e2.y(), e2.x(), 0.0,
        0.0, 0.0, 1.0;
  G = R2 * G * R1.transpose();

  const double f1 = e1.z();
  const double f2 = e2.z();
  const double a = G(1, 1), b = G(1, 2), c = G(2, 1), d = G(2, 2);

  const Poly at_b{b, a};
  const Poly ct_d{d, c};
  const Poly A = add(multiply(at_b, at_b), multiply(ct_d, ct_d), f2 * f2);
  const Poly term1 = multiply(Poly{0.0, 1.0}, multiply(A, A));
  const Poly B{1.0, 0.0, 2.0 * f1 * f1, 0.0, f1 * f1 * f1 * f1};
  const Poly term2 = multiply(multiply(B, at_b), ct_d);
  const Poly g = add(term1, term2, -(a * d - b * c));

  auto cost = [&](double t) {
    const double p = a * t + b;
    const double q = c * t + d;
    return t * t / (1.0 + f1 * f1 * t * t) + q * q / (p * p + f2 * f2 * q * q);
  };

  double best_cost = std::numeric_limits<double>::infinity();
  Vec3 l1 = Vec3::Zero(), l2 = Vec3::Zero();
  const double inf_denom = a * a + f2 * f2 * c * c;
  if (f1 != 0.0 && inf_denom > 0.0) {
    best_cost = 1.0 / (f1 * f1) + c * c / inf_denom;
    l1 = Vec3(f1, 0.0, -1.0);
    l2 = Vec3(-f2 * c, a, c);
  }
  for (double t : real_polynomial_roots(g)) {
    const double s = cost(t);
    if (s < best_cost) {
      best_cost = s;
      l1 = Vec3(t * f1, 1.0, -t);
      l2 = Vec3(-f2 * (c * t + d), a * t + b, c * t + d);
    }
  }
  if (!std::isfinite(best_cost)) return std::nullopt;

  const Vec3 x1 = T1inv * R1.transpose() * foot_of_origin(l1).homogeneous();
  const Vec3 x2 = T2inv * R2.transpose() * foot_of_origin(l2).homogeneous();
  Correction out{x1.hnormalized(), x2.hnormalized()};
  if (!out.first.allFinite() || !out.second.allFinite()) return std::nullopt;
  return out;
}

}  // namespace

std::vector<double> real_polynomial_roots(std::span<const double> coeffs) {
  double scale = 0.0;
  for (double c : coeffs) scale = std::max(scale, std::abs(c));
  if (!(scale > 0.0)) return {};
  std::size_t degree = coeffs.size();
  while (degree > 0 && std::abs(coeffs[degree - 1]) <= 1e-14 * scale) --degree;
  if (degree <= 1) return {};
  const std::size_t n = degree - 1;
  const double lead = coeffs[n];

  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                                    static_cast<Eigen::Index>(n));
  for (std::size_t i = 1; i < n; ++i) {
    companion(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i - 1)) = 1.0;
  }
  for (std::size_t i = 0; i < n; ++i) {
    companion(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(n - 1)) = -coeffs[i] / lead;
  }
  Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
  if (solver.info() != Eigen::Success) return {};

  const auto poly = coeffs.first(degree);
  std::vector<double> roots;
  for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) {
    const auto z = solver.eigenvalues()(i);
    if (std::abs(z.imag()) >= kRealRootTolerance * (1.0 + std::abs(z.real()))) continue;
    double t = z.real();
    // A few Newton steps, kept only while they reduce the residual.
    for (int k = 0; k < 3; ++k) {
      const double dp = evaluate_derivative(poly, t);
      if (dp == 0.0) break;
      const double next = t - evaluate(poly, t) / dp;
      if (!std::isfinite(next) || std::abs(evaluate(poly, next)) >= std::abs(evaluate(poly, t))) break;
      t = next;
    }
    roots.push_back(t);
  }
  return roots;
}

Vec4 triangulate_homogeneous(const Vec2& u1, const Vec2& u2, const Mat34& P1, const Mat34& P2) {
  const Eigen::Matrix4d A = dlt_system(u1, u2, P1, P2);
  Eigen::JacobiSVD<Eigen::Matrix4d> svd(A, Eigen::ComputeFullV);
  return svd.matrixV().col(3);
}

Vec3 triangulate_dlt(const Vec2& u1, const Vec2& u2, const Mat34& P1, const Mat34& P2) {
  const Vec3 c1 = camera_center(P1);
  const Vec3 c2 = camera_center(P2);
  if (!((c1 - c2).norm() > kNullSpaceTolerance * (1.0 + c1.norm() + c2.norm()))) {
    throw Error(ErrorKind::ParallelRays, "both cameras share the same center");
  }
  const Eigen::Matrix4d A = dlt_system(u1, u2, P1, P2);
  Eigen::JacobiSVD<Eigen::Matrix4d> svd(A, Eigen::ComputeFullV);
  const Vec4 s = svd.singularValues();
  if (!(s(0) > 0.0) || s(2) / s(0) < kNullSpaceTolerance) {
    throw Error(ErrorKind::ParallelRays, "rays do not determine a unique point");
  }
  const Vec4 X = svd.matrixV().col(3);
  if (!(std::abs(X(3)) > kNullSpaceTolerance * X.head<3>().norm())) {
    throw Error(ErrorKind::ParallelRays, "rays meet at infinity");
  }
  return X.head<3>() / X(3);
}

PolynomialTriangulation triangulate_polynomial(const Vec2& u1, const Vec2& u2,
                                               const FundamentalMatrix& F,
                                               const Mat34& P1, const Mat34& P2) {
  PolynomialTriangulation out;
  const auto corrected = optimal_correction(u1, u2, F.F.transpose());
  if (!corrected) {
    log_warning("polynomial triangulation degenerated; falling back to DLT");
    out.point = triangulate_dlt(u1, u2, P1, P2);
    out.corrected_first = project_with(P1, out.point);
    out.corrected_second = project_with(P2, out.point);
    out.used_fallback = true;
  } else {
    out.corrected_first = corrected->first;
    out.corrected_second = corrected->second;
    out.point = triangulate_dlt(out.corrected_first, out.corrected_second, P1, P2);
  }
  out.image_error = (out.corrected_first - u1).squaredNorm() + (out.corrected_second - u2).squaredNorm();
  return out;
}

Vec3 vector_median(std::span<const Vec3> candidates) {
  if (candidates.empty()) {
    throw Error(ErrorKind::EmptyInput, "vector_median needs at least one candidate");
  }
  std::size_t best = 0;
  double best_sum = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < candidates.size(); ++j) sum += (candidates[i] - candidates[j]).norm();
    if (sum < best_sum) {
      best_sum = sum;
      best = i;
    }
  }
  return candidates[best];
}

Vec3 geometric_median(std::span<const Vec3> candidates, int max_iterations, double tolerance) {
  if (candidates.empty()) {
    throw Error(ErrorKind::EmptyInput, "geometric_median needs at least one candidate");
  }
  Vec3 x = Vec3::Zero();
  for (const auto& c : candidates) x += c;
  x /= static_cast<double>(candidates.size());
  for (int it = 0; it < max_iterations; ++it) {
    Vec3 num = Vec3::Zero();
    double den = 0.0;
    for (const auto& c : candidates) {
      const double d = (c - x).norm();
      if (d < 1e-15) return c;
      num += c / d;
      den += 1.0 / d;
    }
    const Vec3 next = num / den;
    const double step = (next - x).norm();
    x = next;
    if (step <= tolerance * (1.0 + x.norm())) break;
  }
  // Weiszfeld stalls near a candidate that is itself the minimizer.
  const Vec3 medoid = vector_median(candidates);
  const auto total = [&](const Vec3& c) {
    double s = 0.0;
    for (const auto& p : candidates) s += (p - c).norm();
    return s;
  };
  return total(medoid) < total(x) ? medoid : x;
}

TriangulatedPose triangulate_pose(std::span<const View> views,
                                  std::span<const FundamentalMatrix> fundamentals,
                                  const TriangulationOptions& options) {
  if (views.size() < 2) {
    throw Error(ErrorKind::InvalidArgument, "triangulation needs at least 2 views");
  }
  const std::size_t J = views.front().observation.size();
  for (const auto& v : views) {
    v.observation.validate();
    if (v.observation.size() != J) {
      throw Error(ErrorKind::InvalidArgument, "views disagree on the joint count");
    }
  }
  if (!fundamentals.empty() && fundamentals.size() != views.size() - 1) {
    throw Error(ErrorKind::InvalidArgument, "need one fundamental matrix per consecutive view pair");
  }

  std::vector<FundamentalMatrix> pair_F(views.size() - 1);
  for (std::size_t i = 0; i + 1 < views.size(); ++i) {
    pair_F[i] = fundamentals.empty() ? fundamental_from_projections(views[i].P, views[i + 1].P)
                                     : fundamentals[i];
  }

  TriangulatedPose result;
  result.pose.joints.assign(J, Vec3::Constant(std::nan("")));
  result.pose.visible.assign(J, false);
  result.per_joint_views.assign(J, 0);

  double squared_error = 0.0;
  std::size_t residuals = 0;
  for (std::size_t j = 0; j < J; ++j) {
    std::vector<Vec3> candidates;
    std::set<std::size_t> used;
    for (std::size_t i = 0; i + 1 < views.size(); ++i) {
      const auto& a = views[i].observation;
      const auto& b = views[i + 1].observation;
      if (!a.visible[j] || !b.visible[j]) continue;
      try {
        const auto tri = triangulate_polynomial(a.joints[j], b.joints[j], pair_F[i], views[i].P,
                                                views[i + 1].P);
        candidates.push_back(tri.point);
        used.insert(i);
        used.insert(i + 1);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::ParallelRays) throw;
      }
    }
    if (candidates.empty()) continue;
    const Vec3 X = options.fusion == FusionMethod::Medoid ? vector_median(candidates)
                                                          : geometric_median(candidates);
    result.pose.joints[j] = X;
    result.pose.visible[j] = true;
    result.per_joint_views[j] = used.size();
    for (std::size_t v : used) {
      squared_error += (project_with(views[v].P, X) - views[v].observation.joints[j]).squaredNorm();
      ++residuals;
    }
  }
  if (residuals == 0) {
    throw Error(ErrorKind::NoVisibleJoints, "no joint is visible in any consecutive view pair");
  }
  result.reprojection_rmse = std::sqrt(squared_error / static_cast<double>(residuals));
  return result;
}

double smooth_l1(double x) {
  const double ax = std::abs(x);
  return ax < 1.0 ? 0.5 * x * x : ax - 0.5;
}

double smooth_l1_loss(const Pose3D& pred, const Pose3D& target) {
  if (pred.size() != target.size()) {
    throw Error(ErrorKind::InvalidArgument, "poses have different joint counts");
  }
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t j = 0; j < pred.size(); ++j) {
    if (!pred.visible[j] || !target.visible[j]) continue;
    for (int k = 0; k < 3; ++k) sum += smooth_l1(pred.joints[j](k) - target.joints[j](k));
    n += 3;
  }
  if (n == 0) {
    throw Error(ErrorKind::EmptyOverlap, "no joint is visible in both poses");
  }
  return sum / static_cast<double>(n);
}

}  // namespace epiforge
