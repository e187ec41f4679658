#include <numbers>

#include "doctest.h"
#include "epiforge/error.hpp"
#include "epiforge/synth.hpp"
#include "support.hpp"

using namespace epiforge;

TEST_SUITE("synth") {

TEST_CASE("two-camera rigs have a proper relative rotation") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto rig = generate_rig(2, seed);
    REQUIRE(rig.size() == 2);
    const double angle = rotation_angle(rig[0].extrinsics.R, rig[1].extrinsics.R);
    CHECK(angle > 0.0);
    CHECK(angle < std::numbers::pi);
  }
}

TEST_CASE("rigs are deterministic and face the origin") {
  for (std::size_t n : {2u, 4u, 7u}) {
    const auto a = generate_rig(n, 11), b = generate_rig(n, 11);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(a[i].extrinsics.R == b[i].extrinsics.R);
      CHECK(a[i].extrinsics.T == b[i].extrinsics.T);
      CHECK_NOTHROW(a[i].extrinsics.validate());
      const auto p = project(Vec3::Zero(), a[i].intrinsics, a[i].extrinsics);
      CHECK(p.depth > 0.0);
      CHECK((p.pixel - Vec2(a[i].intrinsics.cx, a[i].intrinsics.cy)).norm() < 1e-6);
      const Vec3 c = a[i].extrinsics.center();
      const double radius = c.head<2>().norm();
      CHECK(radius >= 3000.0);
      CHECK(radius <= 5000.0);
    }
  }
}

TEST_CASE("consecutive cameras are spaced within the sector bound") {
  for (std::size_t n : {2u, 3u, 4u, 8u}) {
    const auto rig = generate_rig(n, 5);
    const double bound = std::min(2.0 * std::numbers::pi / double(n), 0.5 * std::numbers::pi);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const Vec2 a = rig[i].extrinsics.center().head<2>(), b = rig[i + 1].extrinsics.center().head<2>();
      const double gap = std::acos(std::clamp(a.normalized().dot(b.normalized()), -1.0, 1.0));
      CHECK(gap <= bound + 1e-12);
      CHECK(gap > 0.0);
    }
  }
}

TEST_CASE("a rig needs two cameras") {
  try {
    generate_rig(1, 0);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("n >= 2") != std::string::npos);
  }
}

TEST_CASE("poses keep the template bone lengths and stay compact") {
  const auto poses = generate_poses(100, 3);
  const auto parents = skeleton_parents();
  const auto lengths = skeleton_bone_lengths();
  for (const auto& p : poses) {
    REQUIRE(p.size() == kSkeletonJoints);
    CHECK(p.joints[0].norm() == 0.0);
    for (std::size_t j = 1; j < kSkeletonJoints; ++j) {
      const double len = (p.joints[j] - p.joints[std::size_t(parents[j])]).norm();
      CHECK(std::abs(len - lengths[j]) < 1e-9);
    }
    for (const auto& x : p.joints) CHECK(x.norm() < 2000.0);
  }
  const auto again = generate_poses(2, 3);
  CHECK(again[0].joints == poses[0].joints);
  CHECK(again[1].joints == poses[1].joints);
}

TEST_CASE("noiseless observations are exact projections") {
  const auto rig = generate_rig(3, 4);
  const auto poses = generate_poses(10, 4);
  const auto obs = observe(poses, rig, {}, 1);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t f = 0; f < 10; ++f) {
      const auto exact = project_pose(poses[f], rig[c].intrinsics, rig[c].extrinsics);
      CHECK(obs[c][f].joints == exact.joints);
      CHECK(obs[c][f].visible == exact.visible);
    }
  }
}

TEST_CASE("occlusion rate matches a binomial count") {
  SceneOptions o;
  o.n_cameras = 4;
  o.n_frames = 100;
  o.observation.occlusion_rate = 0.1;
  o.seed = 6;
  const auto scene = generate_scene(o);
  std::size_t hidden = 0, total = 0;
  for (const auto& cam : scene.observations) {
    for (const auto& p : cam) {
      total += p.size();
      hidden += p.size() - p.visible_count();
    }
  }
  CHECK(total == 6800);
  CHECK(double(hidden) / double(total) == doctest::Approx(0.1).epsilon(0.2));
}

TEST_CASE("noise and outliers move the observations") {
  SceneOptions o;
  o.n_frames = 50;
  o.observation.noise_sigma = 2.0;
  o.seed = 7;
  const auto noisy = generate_scene(o);
  double sq = 0.0;
  std::size_t n = 0;
  for (std::size_t c = 0; c < noisy.cameras.size(); ++c) {
    for (std::size_t f = 0; f < 50; ++f) {
      const auto exact = project_pose(noisy.poses_3d[f], noisy.cameras[c].intrinsics, noisy.cameras[c].extrinsics);
      for (std::size_t j = 0; j < 17; ++j) {
        sq += (noisy.observations[c][f].joints[j] - exact.joints[j]).squaredNorm();
        n += 2;
      }
    }
  }
  CHECK(std::sqrt(sq / double(n)) == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("scenes are reproducible from the seed") {
  SceneOptions o;
  o.n_frames = 10;
  o.observation = {1.0, 0.1, 0.05};
  o.seed = 8;
  const auto a = generate_scene(o), b = generate_scene(o);
  for (std::size_t c = 0; c < a.cameras.size(); ++c) {
    for (std::size_t f = 0; f < 10; ++f) {
      CHECK(a.observations[c][f].joints == b.observations[c][f].joints);
      CHECK(a.observations[c][f].visible == b.observations[c][f].visible);
    }
  }
  o.seed = 9;
  const auto c = generate_scene(o);
  CHECK(c.observations[0][0].joints != a.observations[0][0].joints);
}

TEST_CASE("invalid observation rates are rejected") {
  SceneOptions o;
  o.observation.occlusion_rate = 1.0;
  CHECK_THROWS_AS(generate_scene(o), Error);
  o.observation.occlusion_rate = 0.0;
  o.observation.noise_sigma = -1.0;
  CHECK_THROWS_AS(generate_scene(o), Error);
}

}
