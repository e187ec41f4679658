#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "epiforge/epipolar.hpp"
#include "epiforge/io.hpp"
#include "epiforge/triangulation.hpp"

namespace epiforge {

// Worker count for frame-parallel loops: EPIFORGE_THREADS if set to a
// positive integer, otherwise the hardware concurrency.
std::size_t worker_count();

// Runs fn(0 .. n-1) on up to worker_count() threads. If any call throws, the
// exception of the lowest failing index is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

struct CalibrationOptions {
  RansacOptions ransac;
  bool pool_frames = false;
};

struct PairCalibration {
  std::size_t first = 0;
  std::size_t second = 1;
  std::optional<std::size_t> frame;  // empty when frames are pooled
  std::size_t correspondences = 0;
  TwoViewGeometry geometry;
  // Angle between the recovered rotation and the one implied by the scene's
  // own extrinsics, radians.
  double rotation_error = 0.0;
};

// Correspondences between cameras a and b for the given frames, from joints
// visible in both.
std::vector<Correspondence> pair_correspondences(const io::SceneFile& scene, std::size_t a, std::size_t b,
                                                 std::span<const std::size_t> frames);

// One calibration per consecutive camera pair, either pooled over all frames
// or per frame. RANSAC seeds are derived from the base seed, the frame and the
// pair index, so results do not depend on the thread count.
std::vector<PairCalibration> calibrate_scene(const io::SceneFile& scene, const CalibrationOptions& options);

// Cameras expressed in the frame of camera 0 with unit first baseline. Later
// baselines are scaled to agree with the points triangulated by the previous
// pair (median depth ratio over joints seen by three consecutive cameras).
std::vector<Camera> chain_cameras(const io::SceneFile& scene, std::span<const PairCalibration> pairs,
                                  std::span<const std::size_t> frames);

enum class ExtrinsicsSource { Given, Estimated };

struct TriangulateSceneOptions {
  ExtrinsicsSource extrinsics = ExtrinsicsSource::Given;
  CalibrationOptions calibration;
  TriangulationOptions triangulation;
  bool skip_bad_frames = false;
};

// Triangulates every frame. Estimated-extrinsics output is root-centered and
// scaled to unit norm, since the absolute scale is unrecoverable. Bad frames
// become all-invisible records when skip_bad_frames is set and rethrow
// otherwise.
io::PoseFile triangulate_scene(const io::SceneFile& scene, const TriangulateSceneOptions& options);

// Root-center (or centroid-center when the root is hidden) and scale the
// visible joints to unit Euclidean norm.
Pose3D normalize_scale(const Pose3D& pose, std::size_t root_joint = 0);

}  // namespace epiforge
