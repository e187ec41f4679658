#include <algorithm>
#include <limits>

#include "doctest.h"
#include "epiforge/error.hpp"
#include "epiforge/triangulation.hpp"
#include "support.hpp"

using namespace epiforge;

namespace {

std::pair<Camera, Camera> simple_pair() {
  Camera a, b;
  a.intrinsics = b.intrinsics = testing::default_intrinsics();
  b.extrinsics.R = Eigen::AngleAxisd(-0.35, Vec3::UnitY()).toRotationMatrix();
  b.extrinsics.T = Vec3(-1200, 30, 250);
  return {a, b};
}

double line_distance_sq(const Vec3& line, const Vec2& p) {
  const double v = line.dot(p.homogeneous());
  return v * v / line.head<2>().squaredNorm();
}

// Minimum of d(u1, l1)^2 + d(u2, l2)^2 over the pencil of epipolar lines,
// found by a dense angle scan with golden-section refinement.
double pencil_scan(const Mat3& F, const Vec2& u1, const Vec2& u2) {
  Eigen::JacobiSVD<Mat3> svd(F, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 e1 = svd.matrixU().col(2);  // e1^T F = 0
  const auto cost = [&](double theta) {
    const Vec3 dir(std::cos(theta), std::sin(theta), 0.0);
    const Vec3 l1 = e1.cross(dir);
    const Vec3 x1 = std::abs(e1.z()) > 1e-12 ? Vec3(e1 / e1.z() + dir) : Vec3(u1.homogeneous());
    const Vec3 l2 = F.transpose() * x1;
    return line_distance_sq(l1, u1) + line_distance_sq(l2, u2);
  };
  const int steps = 20000;
  double best = std::numeric_limits<double>::infinity(), best_theta = 0.0;
  for (int i = 0; i < steps; ++i) {
    const double th = M_PI * i / steps;
    const double c = cost(th);
    if (c < best) {
      best = c;
      best_theta = th;
    }
  }
  double lo = best_theta - M_PI / steps, hi = best_theta + M_PI / steps;
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int it = 0; it < 200; ++it) {
    const double m1 = hi - g * (hi - lo), m2 = lo + g * (hi - lo);
    if (cost(m1) < cost(m2)) {
      hi = m2;
    } else {
      lo = m1;
    }
  }
  return std::min(best, cost(0.5 * (lo + hi)));
}

}  // namespace

TEST_SUITE("triangulation") {

TEST_CASE("DLT recovers an exactly projected point") {
  const auto [a, b] = simple_pair();
  const Mat34 P1 = projection_matrix(a), P2 = projection_matrix(b);
  const Vec3 X(100, -50, 2000);
  const Vec3 Y = triangulate_dlt(project_with(P1, X), project_with(P2, X), P1, P2);
  CHECK((Y - X).norm() < 1e-6);
}

TEST_CASE("identical cameras give parallel rays") {
  const auto [a, b] = simple_pair();
  const Mat34 P = projection_matrix(a);
  const Vec3 X(100, -50, 2000);
  try {
    triangulate_dlt(project_with(P, X), project_with(P, X), P, P);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ParallelRays);
  }
}

TEST_CASE("point at the first camera center cannot be projected") {
  const auto [a, b] = simple_pair();
  CHECK_THROWS_AS(project(a.extrinsics.center(), a.intrinsics, a.extrinsics), Error);
}

TEST_CASE("polynomial triangulation equals DLT on exact data") {
  Rng rng(1);
  const auto rig = generate_rig(2, 1);
  const Mat34 P1 = projection_matrix(rig[0]), P2 = projection_matrix(rig[1]);
  const auto F = fundamental_from_projections(P1, P2);
  for (const auto& X : testing::random_points(rng, 100)) {
    const Vec2 u1 = project_with(P1, X), u2 = project_with(P2, X);
    const auto poly = triangulate_polynomial(u1, u2, F, P1, P2);
    CHECK_FALSE(poly.used_fallback);
    CHECK((poly.point - triangulate_dlt(u1, u2, P1, P2)).norm() < 1e-6);
    CHECK((poly.point - X).norm() < 1e-6);
  }
}

TEST_CASE("polynomial correction is optimal and epipolar-consistent under noise") {
  Rng rng(2);
  const auto rig = generate_rig(2, 2);
  const Mat34 P1 = projection_matrix(rig[0]), P2 = projection_matrix(rig[1]);
  const auto F = fundamental_from_projections(P1, P2);
  int not_worse = 0;
  const int n = 200;
  for (const auto& X : testing::random_points(rng, n)) {
    const Vec2 u1 = project_with(P1, X) + Vec2(rng.normal(), rng.normal());
    const Vec2 u2 = project_with(P2, X) + Vec2(rng.normal(), rng.normal());
    const auto poly = triangulate_polynomial(u1, u2, F, P1, P2);
    CHECK(std::abs(epipolar_residual(F.F, poly.corrected_first, poly.corrected_second)) < 1e-9);
    const Vec3 d = triangulate_dlt(u1, u2, P1, P2);
    const double dlt_err = (project_with(P1, d) - u1).squaredNorm() + (project_with(P2, d) - u2).squaredNorm();
    if (poly.image_error <= dlt_err + 1e-12) ++not_worse;
    // The corrected pair reprojects from the triangulated point.
    CHECK((project_with(P1, poly.point) - poly.corrected_first).norm() < 1e-6);
    CHECK((project_with(P2, poly.point) - poly.corrected_second).norm() < 1e-6);
  }
  CHECK(not_worse >= n * 99 / 100);
}

TEST_CASE("polynomial correction matches a pencil scan oracle") {
  Rng rng(3);
  const auto rig = generate_rig(2, 3);
  const Mat34 P1 = projection_matrix(rig[0]), P2 = projection_matrix(rig[1]);
  const auto F = fundamental_from_projections(P1, P2);
  for (const auto& X : testing::random_points(rng, 30)) {
    const Vec2 u1 = project_with(P1, X) + Vec2(rng.normal(0, 3), rng.normal(0, 3));
    const Vec2 u2 = project_with(P2, X) + Vec2(rng.normal(0, 3), rng.normal(0, 3));
    const auto poly = triangulate_polynomial(u1, u2, F, P1, P2);
    const double oracle = pencil_scan(F.F, u1, u2);
    CHECK(poly.image_error == doctest::Approx(oracle).epsilon(1e-6).scale(10.0));
  }
}

TEST_CASE("real polynomial roots") {
  // (x - 1)(x - 2)(x + 3) = 6 - 7x + x^3, constant term first.
  const std::vector<double> c{6.0, -7.0, 0.0, 1.0};
  auto roots = real_polynomial_roots(c);
  std::sort(roots.begin(), roots.end());
  REQUIRE(roots.size() == 3);
  CHECK(roots[0] == doctest::Approx(-3.0).epsilon(1e-12));
  CHECK(roots[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(roots[2] == doctest::Approx(2.0).epsilon(1e-12));
  // x^2 + 1 has no real roots.
  CHECK(real_polynomial_roots(std::vector<double>{1.0, 0.0, 1.0}).empty());
}

TEST_CASE("two views with every joint visible") {
  const auto rig = generate_rig(2, 4);
  const auto pose = generate_poses(1, 4).front();
  std::vector<View> views;
  for (const auto& c : rig) views.push_back({project_pose(pose, c.intrinsics, c.extrinsics), projection_matrix(c)});
  const auto tri = triangulate_pose(views);
  for (std::size_t j = 0; j < 17; ++j) {
    CHECK(tri.pose.visible[j]);
    CHECK(tri.per_joint_views[j] == 2);
    CHECK((tri.pose.joints[j] - pose.joints[j]).norm() < 1e-6);
  }
  CHECK(tri.reprojection_rmse < 1e-6);
}

TEST_CASE("occlusion restricts the pairs used for a joint") {
  const auto rig = generate_rig(4, 5);
  const auto pose = generate_poses(1, 5).front();
  std::vector<View> views;
  for (const auto& c : rig) views.push_back({project_pose(pose, c.intrinsics, c.extrinsics), projection_matrix(c)});
  views[1].observation.visible[5] = false;
  const auto tri = triangulate_pose(views);
  for (std::size_t j = 0; j < 17; ++j) CHECK(tri.per_joint_views[j] == (j == 5 ? 2u : 4u));
  const std::vector<View> last{views[2], views[3]};
  const auto only = triangulate_pose(last);
  CHECK((tri.pose.joints[5] - only.pose.joints[5]).norm() == 0.0);
}

TEST_CASE("fully occluded joints stay invisible") {
  const auto rig = generate_rig(3, 6);
  const auto pose = generate_poses(1, 6).front();
  std::vector<View> views;
  for (const auto& c : rig) views.push_back({project_pose(pose, c.intrinsics, c.extrinsics), projection_matrix(c)});
  for (auto& v : views) v.observation.visible[3] = false;
  const auto tri = triangulate_pose(views);
  CHECK_FALSE(tri.pose.visible[3]);
  CHECK(tri.per_joint_views[3] < 2);
  CHECK(tri.pose.visible_count() == 16);

  for (auto& v : views) std::fill(v.observation.visible.begin(), v.observation.visible.end(), false);
  try {
    triangulate_pose(views);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NoVisibleJoints);
  }
}

TEST_CASE("vector median") {
  const std::vector<Vec3> one{Vec3(1, 2, 3)};
  CHECK(vector_median(one) == Vec3(1, 2, 3));
  const std::vector<Vec3> line{Vec3(0, 0, 0), Vec3(0, 0, 1), Vec3(0, 0, 10)};
  CHECK(vector_median(line) == Vec3(0, 0, 1));
  const std::vector<Vec3> same(5, Vec3(4, 4, 4));
  CHECK(vector_median(same) == Vec3(4, 4, 4));
  const std::vector<Vec3> tie{Vec3(0, 0, 0), Vec3(1, 0, 0)};
  CHECK(vector_median(tie) == Vec3(0, 0, 0));
  CHECK_THROWS_AS(vector_median(std::vector<Vec3>{}), Error);
}

TEST_CASE("vector median is the brute-force minimizer and an input element") {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const auto pts = testing::random_points(rng, 2 + rng.below(8));
    const Vec3 m = vector_median(pts);
    CHECK(std::find(pts.begin(), pts.end(), m) != pts.end());
    const auto sum = [&](const Vec3& c) {
      double s = 0.0;
      for (const auto& p : pts) s += (p - c).norm();
      return s;
    };
    for (const auto& p : pts) CHECK(sum(m) <= sum(p));
  }
}

TEST_CASE("geometric median is no worse than the medoid") {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const auto pts = testing::random_points(rng, 3 + rng.below(6));
    const auto sum = [&](const Vec3& c) {
      double s = 0.0;
      for (const auto& p : pts) s += (p - c).norm();
      return s;
    };
    CHECK(sum(geometric_median(pts)) <= sum(vector_median(pts)) + 1e-9);
  }
}

TEST_CASE("smooth L1 values") {
  CHECK(smooth_l1(0.5) == 0.125);
  CHECK(smooth_l1(2.0) == 1.5);
  CHECK(smooth_l1(-2.0) == 1.5);
  CHECK(smooth_l1(0.0) == 0.0);
}

TEST_CASE("smooth L1 is C1 at the knee") {
  const double h = 1e-7;
  CHECK(smooth_l1(1.0) == 0.5);
  CHECK(smooth_l1(1.0 - 1e-12) == doctest::Approx(0.5).epsilon(1e-11));
  const double left = (smooth_l1(1.0) - smooth_l1(1.0 - h)) / h;
  const double right = (smooth_l1(1.0 + h) - smooth_l1(1.0)) / h;
  CHECK(left == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(right == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(smooth_l1(-1.0) == 0.5);
}

TEST_CASE("smooth L1 loss averages over visible coordinates") {
  Pose3D a({Vec3(0, 0, 0), Vec3(1, 1, 1)});
  Pose3D b = a;
  CHECK(smooth_l1_loss(a, b) == 0.0);
  b.joints[0].x() = 0.5;
  CHECK(smooth_l1_loss(a, b) == doctest::Approx(0.125 / 6.0));
  b.joints[1].y() = 3.0;
  b.visible[1] = false;
  CHECK(smooth_l1_loss(a, b) == doctest::Approx(0.125 / 3.0));
  b.visible[0] = false;
  try {
    smooth_l1_loss(a, b);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyOverlap);
  }
}

}
