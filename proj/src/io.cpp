#include "epiforge/io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "epiforge/error.hpp"

namespace epiforge::io {

namespace {

[[noreturn]] void parse_error(const std::string& what) { throw Error(ErrorKind::ParseError, what); }

double number(const json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (!j.is_number()) parse_error("expected a number, got " + j.dump());
  return j.get<double>();
}

json number_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

template <int N>
Eigen::Matrix<double, N, 1> vector_from(const json& j) {
  if (!j.is_array() || j.size() != N) parse_error("expected an array of " + std::to_string(N) + " numbers");
  Eigen::Matrix<double, N, 1> v;
  for (int i = 0; i < N; ++i) v(i) = number(j[static_cast<std::size_t>(i)]);
  return v;
}

template <typename Derived>
json vector_json(const Eigen::MatrixBase<Derived>& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(number_json(v(i)));
  return out;
}

std::vector<bool> flags_from(const json& j, std::size_t expected) {
  if (!j.is_array() || j.size() != expected) parse_error("visibility array has the wrong length");
  std::vector<bool> out;
  out.reserve(expected);
  for (const auto& v : j) {
    if (!v.is_boolean()) parse_error("visibility entries must be booleans");
    out.push_back(v.get<bool>());
  }
  return out;
}

void expect_version(const json& j, const char* version) {
  if (!j.is_object() || !j.contains("version") || j.at("version") != version) {
    parse_error(std::string("expected a document with version ") + version);
  }
}

template <typename F>
auto guarded(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const json::exception& e) {
    parse_error(e.what());
  }
}

}  // namespace

json camera_to_json(const Camera& camera) {
  json R = json::array();
  for (int r = 0; r < 3; ++r) R.push_back(vector_json(camera.extrinsics.R.row(r)));
  return {{"fx", camera.intrinsics.fx},
          {"fy", camera.intrinsics.fy},
          {"cx", camera.intrinsics.cx},
          {"cy", camera.intrinsics.cy},
          {"R", R},
          {"T", vector_json(camera.extrinsics.T)}};
}

Camera camera_from_json(const json& j) {
  return guarded([&] {
    Camera cam;
    cam.intrinsics.fx = number(j.at("fx"));
    cam.intrinsics.fy = number(j.at("fy"));
    cam.intrinsics.cx = number(j.at("cx"));
    cam.intrinsics.cy = number(j.at("cy"));
    const auto& R = j.at("R");
    if (!R.is_array() || R.size() != 3) parse_error("R must be a 3x3 nested array");
    for (int r = 0; r < 3; ++r) cam.extrinsics.R.row(r) = vector_from<3>(R[static_cast<std::size_t>(r)]).transpose();
    cam.extrinsics.T = vector_from<3>(j.at("T"));
    try {
      cam.intrinsics.validate();
      cam.extrinsics.validate();
    } catch (const Error& e) {
      parse_error(std::string("invalid camera: ") + e.what());
    }
    return cam;
  });
}

json pose2d_to_json(const Pose2D& pose) {
  json joints = json::array();
  for (const auto& p : pose.joints) joints.push_back(vector_json(p));
  return {{"joints", joints}, {"visible", pose.visible}};
}

Pose2D pose2d_from_json(const json& j) {
  return guarded([&] {
    Pose2D pose;
    for (const auto& p : j.at("joints")) pose.joints.push_back(vector_from<2>(p));
    pose.visible = flags_from(j.at("visible"), pose.joints.size());
    return pose;
  });
}

json pose3d_to_json(const Pose3D& pose) {
  json joints = json::array();
  for (const auto& p : pose.joints) joints.push_back(vector_json(p));
  return {{"joints", joints}, {"visible", pose.visible}};
}

Pose3D pose3d_from_json(const json& j) {
  return guarded([&] {
    Pose3D pose;
    for (const auto& p : j.at("joints")) pose.joints.push_back(vector_from<3>(p));
    pose.visible = flags_from(j.at("visible"), pose.joints.size());
    return pose;
  });
}

SceneFile scene_from_synthetic(const SyntheticScene& scene) {
  SceneFile file;
  file.cameras = scene.cameras;
  file.joints = scene.poses_3d.empty() ? 0 : scene.poses_3d.front().size();
  const std::size_t frames = scene.poses_3d.size();
  file.frames.assign(frames, {});
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t c = 0; c < scene.cameras.size(); ++c) file.frames[f].push_back(scene.observations[c][f]);
  }
  file.gt_poses = scene.poses_3d;
  return file;
}

json scene_to_json(const SceneFile& scene) {
  json cameras = json::array();
  for (const auto& c : scene.cameras) cameras.push_back(camera_to_json(c));
  json frames = json::array();
  for (const auto& frame : scene.frames) {
    json obs = json::array();
    for (const auto& p : frame) obs.push_back(pose2d_to_json(p));
    frames.push_back({{"observations", obs}});
  }
  json out = {{"version", kSceneVersion}, {"joints", scene.joints}, {"cameras", cameras}, {"frames", frames}};
  if (scene.gt_poses) {
    json gt = json::array();
    for (const auto& p : *scene.gt_poses) gt.push_back(pose3d_to_json(p));
    out["gt_poses_3d"] = gt;
  }
  return out;
}

SceneFile scene_from_json(const json& j) {
  expect_version(j, kSceneVersion);
  return guarded([&] {
    SceneFile scene;
    scene.joints = j.at("joints").get<std::size_t>();
    for (const auto& c : j.at("cameras")) scene.cameras.push_back(camera_from_json(c));
    if (scene.cameras.size() < 2) parse_error("a scene needs at least 2 cameras");
    for (const auto& frame : j.at("frames")) {
      std::vector<Pose2D> obs;
      for (const auto& p : frame.at("observations")) {
        obs.push_back(pose2d_from_json(p));
        if (obs.back().size() != scene.joints) parse_error("observation joint count differs from the header");
      }
      if (obs.size() != scene.cameras.size()) parse_error("every frame needs one observation per camera");
      scene.frames.push_back(std::move(obs));
    }
    if (j.contains("gt_poses_3d")) {
      std::vector<Pose3D> gt;
      for (const auto& p : j.at("gt_poses_3d")) {
        gt.push_back(pose3d_from_json(p));
        if (gt.back().size() != scene.joints) parse_error("ground-truth joint count differs from the header");
      }
      if (gt.size() != scene.frames.size()) parse_error("ground truth must have one pose per frame");
      scene.gt_poses = std::move(gt);
    }
    return scene;
  });
}

std::vector<Pose3D> PoseFile::poses_3d() const {
  std::vector<Pose3D> out;
  out.reserve(poses.size());
  for (const auto& r : poses) out.push_back(r.pose);
  return out;
}

PoseFile pose_file_from_poses(const std::vector<Pose3D>& poses) {
  PoseFile file;
  file.joints = poses.empty() ? 0 : poses.front().size();
  for (const auto& p : poses) {
    PoseRecord r;
    r.pose = p;
    r.views.assign(p.size(), 0);
    file.poses.push_back(std::move(r));
  }
  return file;
}

json pose_file_to_json(const PoseFile& file) {
  json poses = json::array();
  for (const auto& r : file.poses) {
    json p = pose3d_to_json(r.pose);
    p["views"] = r.views;
    p["reprojection_rmse"] = number_json(r.reprojection_rmse);
    poses.push_back(std::move(p));
  }
  return {{"version", kPoseVersion}, {"joints", file.joints}, {"poses", poses}};
}

PoseFile pose_file_from_json(const json& j) {
  expect_version(j, kPoseVersion);
  return guarded([&] {
    PoseFile file;
    file.joints = j.at("joints").get<std::size_t>();
    for (const auto& p : j.at("poses")) {
      PoseRecord r;
      r.pose = pose3d_from_json(p);
      if (r.pose.size() != file.joints) parse_error("pose joint count differs from the header");
      r.views = p.at("views").get<std::vector<std::size_t>>();
      if (r.views.size() != file.joints) parse_error("views array has the wrong length");
      r.reprojection_rmse = number(p.at("reprojection_rmse"));
      file.poses.push_back(std::move(r));
    }
    return file;
  });
}

json cluster_model_to_json(const ClusterModel& model) {
  json centroids = json::array();
  for (Eigen::Index r = 0; r < model.centroids.rows(); ++r) centroids.push_back(vector_json(model.centroids.row(r)));
  return {{"version", kClusterVersion},
          {"k", model.k},
          {"seed", model.seed},
          {"D", model.dim()},
          {"inertia", model.inertia},
          {"centroids", centroids}};
}

ClusterModel cluster_model_from_json(const json& j) {
  return guarded([&] {
    ClusterModel model;
    model.k = j.at("k").get<std::size_t>();
    model.seed = j.at("seed").get<std::uint64_t>();
    const auto dim = j.at("D").get<std::size_t>();
    model.inertia = j.contains("inertia") ? number(j.at("inertia")) : 0.0;
    const auto& rows = j.at("centroids");
    if (!rows.is_array() || rows.size() != model.k) parse_error("centroid count differs from k");
    model.centroids.resize(static_cast<Eigen::Index>(model.k), static_cast<Eigen::Index>(dim));
    for (std::size_t r = 0; r < model.k; ++r) {
      const auto& row = rows[r];
      if (!row.is_array() || row.size() != dim) parse_error("centroid dimension differs from D");
      for (std::size_t c = 0; c < dim; ++c) {
        model.centroids(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = number(row[c]);
      }
    }
    if (!model.centroids.allFinite()) parse_error("centroids must be finite");
    return model;
  });
}

std::string to_text(const json& j) { return j.dump(2) + "\n"; }

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::ParseError, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return json::parse(buf.str());
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error(ErrorKind::ParseError, "cannot write " + path.string());
}

}  // namespace epiforge::io
