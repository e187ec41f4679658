#pragma once

#include <cmath>
#include <vector>

#include "epiforge/camera.hpp"
#include "epiforge/epipolar.hpp"
#include "epiforge/random.hpp"
#include "epiforge/synth.hpp"

namespace epiforge::testing {

inline CameraIntrinsics default_intrinsics() { return {1146.0, 1146.0, 512.0, 512.0}; }

inline Mat3 random_rotation(Rng& rng) {
  const Vec3 axis = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
  return Eigen::AngleAxisd(rng.uniform(0.0, 3.14159), axis).toRotationMatrix();
}

// Points inside a 1 m ball around the origin.
inline std::vector<Vec3> random_points(Rng& rng, std::size_t n, double radius = 1000.0) {
  std::vector<Vec3> pts;
  while (pts.size() < n) {
    const Vec3 p(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
    if (p.norm() <= 1.0) pts.push_back(radius * p);
  }
  return pts;
}

inline std::vector<Correspondence> correspondences(const std::vector<Vec3>& pts, const Camera& a, const Camera& b) {
  std::vector<Correspondence> out;
  for (const auto& p : pts) {
    out.push_back({project(p, a.intrinsics, a.extrinsics).pixel, project(p, b.intrinsics, b.extrinsics).pixel});
  }
  return out;
}

inline double mean_distance(const Pose3D& a, const Pose3D& b) {
  double sum = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) sum += (a.joints[j] - b.joints[j]).norm();
  return sum / static_cast<double>(a.size());
}

}  // namespace epiforge::testing
