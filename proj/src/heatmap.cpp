#include "epiforge/heatmap.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>

#include "json.hpp"

#include "epiforge/error.hpp"

namespace epiforge {

namespace {

void check_temperature(double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw Error(ErrorKind::InvalidArgument, "temperature must be positive and finite");
  }
}

// Unnormalized softmax weights for one joint, max-shifted for stability.
std::vector<double> softmax_weights(const HeatmapVolume& v, std::size_t j, double temperature,
                                    double& total) {
  const std::size_t n = v.voxels();
  const double* s = v.scores().data() + j * n;
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) peak = std::max(peak, s[i] / temperature);
  std::vector<double> w(n);
  total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = std::exp(s[i] / temperature - peak);
    total += w[i];
  }
  return w;
}

std::uint32_t to_little_endian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
}

}  // namespace

HeatmapVolume::HeatmapVolume(std::size_t joints, std::size_t width, std::size_t height,
                             std::size_t depth)
    : HeatmapVolume(joints, width, height, depth,
                    std::vector<double>(joints * width * height * depth, 0.0)) {}

HeatmapVolume::HeatmapVolume(std::size_t joints, std::size_t width, std::size_t height,
                             std::size_t depth, std::vector<double> scores)
    : joints_(joints), width_(width), height_(height), depth_(depth), scores_(std::move(scores)) {
  if (joints_ == 0 || width_ == 0 || height_ == 0 || depth_ == 0) {
    throw Error(ErrorKind::InvalidArgument, "heatmap dimensions must be at least 1");
  }
  if (scores_.size() != joints_ * voxels()) {
    throw Error(ErrorKind::InvalidArgument, "score count does not match the dimensions");
  }
}

void HeatmapVolume::validate() const {
  for (double s : scores_) {
    if (!std::isfinite(s)) throw Error(ErrorKind::InvalidArgument, "heatmap contains a non-finite score");
  }
}

Pose3D soft_argmax_3d(const HeatmapVolume& volume, double temperature) {
  check_temperature(temperature);
  volume.validate();
  Pose3D pose;
  pose.joints.reserve(volume.joints());
  for (std::size_t j = 0; j < volume.joints(); ++j) {
    double total = 0.0;
    const auto w = softmax_weights(volume, j, temperature, total);
    Vec3 acc = Vec3::Zero();
    std::size_t i = 0;
    for (std::size_t z = 0; z < volume.depth(); ++z) {
      for (std::size_t y = 0; y < volume.height(); ++y) {
        for (std::size_t x = 0; x < volume.width(); ++x, ++i) {
          acc += w[i] * Vec3(static_cast<double>(x), static_cast<double>(y), static_cast<double>(z));
        }
      }
    }
    pose.joints.push_back(acc / total);
  }
  pose.visible.assign(volume.joints(), true);
  return pose;
}

Pose2D soft_argmax_2d(const HeatmapVolume& volume, double temperature) {
  check_temperature(temperature);
  volume.validate();
  const std::size_t plane = volume.width() * volume.height();
  Pose2D pose;
  pose.joints.reserve(volume.joints());
  for (std::size_t j = 0; j < volume.joints(); ++j) {
    double total = 0.0;
    const auto w = softmax_weights(volume, j, temperature, total);
    std::vector<double> marginal(plane, 0.0);
    for (std::size_t z = 0; z < volume.depth(); ++z) {
      for (std::size_t p = 0; p < plane; ++p) marginal[p] += w[z * plane + p];
    }
    Vec2 acc = Vec2::Zero();
    for (std::size_t y = 0; y < volume.height(); ++y) {
      for (std::size_t x = 0; x < volume.width(); ++x) {
        acc += marginal[y * volume.width() + x] * Vec2(static_cast<double>(x), static_cast<double>(y));
      }
    }
    pose.joints.push_back(acc / total);
  }
  pose.visible.assign(volume.joints(), true);
  return pose;
}

void write_volume(std::ostream& out, const HeatmapVolume& volume) {
  const nlohmann::json header = {{"J", volume.joints()},
                                 {"w", volume.width()},
                                 {"h", volume.height()},
                                 {"d", volume.depth()}};
  out << header.dump() << '\n';
  for (double s : volume.scores()) {
    const auto f = static_cast<float>(s);
    const std::uint32_t bits = to_little_endian(std::bit_cast<std::uint32_t>(f));
    char buf[4];
    std::memcpy(buf, &bits, 4);
    out.write(buf, 4);
  }
  if (!out) throw Error(ErrorKind::ParseError, "failed to write heatmap volume");
}

HeatmapVolume read_volume(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorKind::ParseError, "missing heatmap header line");
  }
  std::size_t J = 0, w = 0, h = 0, d = 0;
  try {
    const auto header = nlohmann::json::parse(line);
    J = header.at("J").get<std::size_t>();
    w = header.at("w").get<std::size_t>();
    h = header.at("h").get<std::size_t>();
    d = header.at("d").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("bad heatmap header: ") + e.what());
  }
  if (J == 0 || w == 0 || h == 0 || d == 0) {
    throw Error(ErrorKind::ParseError, "heatmap dimensions must be at least 1");
  }
  const std::size_t count = J * w * h * d;
  std::vector<double> scores(count);
  char buf[4];
  for (std::size_t i = 0; i < count; ++i) {
    if (!in.read(buf, 4)) {
      throw Error(ErrorKind::ParseError, "heatmap payload is truncated");
    }
    std::uint32_t bits = 0;
    std::memcpy(&bits, buf, 4);
    scores[i] = static_cast<double>(std::bit_cast<float>(to_little_endian(bits)));
  }
  HeatmapVolume volume(J, w, h, d, std::move(scores));
  volume.validate();
  return volume;
}

}  // namespace epiforge
