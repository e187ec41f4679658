#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "epiforge/camera.hpp"
#include "epiforge/pss.hpp"
#include "epiforge/synth.hpp"
#include "epiforge/triangulation.hpp"

namespace epiforge::io {

using nlohmann::json;

inline constexpr const char* kSceneVersion = "epiforge.scene/1";
inline constexpr const char* kPoseVersion = "epiforge.poses/1";
inline constexpr const char* kClusterVersion = "epiforge.clusters/1";

// {"fx":..,"fy":..,"cx":..,"cy":..,"R":[[..],[..],[..]],"T":[..,..,..]}, row-major R.
json camera_to_json(const Camera& camera);
Camera camera_from_json(const json& j);

json pose2d_to_json(const Pose2D& pose);
Pose2D pose2d_from_json(const json& j);
json pose3d_to_json(const Pose3D& pose);
Pose3D pose3d_from_json(const json& j);

struct SceneFile {
  std::size_t joints = 0;
  std::vector<Camera> cameras;
  std::vector<std::vector<Pose2D>> frames;  // [frame][camera]
  std::optional<std::vector<Pose3D>> gt_poses;
};

SceneFile scene_from_synthetic(const SyntheticScene& scene);
json scene_to_json(const SceneFile& scene);
// Validates: >= 2 cameras, one observation per camera in every frame,
// constant joint count.
SceneFile scene_from_json(const json& j);

struct PoseRecord {
  Pose3D pose;
  std::vector<std::size_t> views;
  double reprojection_rmse = 0.0;
};

struct PoseFile {
  std::size_t joints = 0;
  std::vector<PoseRecord> poses;

  std::vector<Pose3D> poses_3d() const;
};

PoseFile pose_file_from_poses(const std::vector<Pose3D>& poses);
json pose_file_to_json(const PoseFile& file);
PoseFile pose_file_from_json(const json& j);

// {"k":..,"seed":..,"D":..,"inertia":..,"centroids":[[..],..]}
json cluster_model_to_json(const ClusterModel& model);
ClusterModel cluster_model_from_json(const json& j);

// Serialized text, two-space indent, trailing newline. Non-finite numbers are
// written as null and read back as NaN.
std::string to_text(const json& j);
json read_json(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace epiforge::io
