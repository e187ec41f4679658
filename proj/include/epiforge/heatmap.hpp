#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "epiforge/camera.hpp"

namespace epiforge {

// Per-joint score volumes. Layout is joint-major with x varying fastest:
// index = ((j * depth + z) * height + y) * width + x.
class HeatmapVolume {
 public:
  HeatmapVolume(std::size_t joints, std::size_t width, std::size_t height, std::size_t depth);
  HeatmapVolume(std::size_t joints, std::size_t width, std::size_t height, std::size_t depth,
                std::vector<double> scores);

  std::size_t joints() const { return joints_; }
  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t depth() const { return depth_; }
  std::size_t voxels() const { return width_ * height_ * depth_; }

  double& at(std::size_t j, std::size_t x, std::size_t y, std::size_t z) {
    return scores_[index(j, x, y, z)];
  }
  double at(std::size_t j, std::size_t x, std::size_t y, std::size_t z) const {
    return scores_[index(j, x, y, z)];
  }

  const std::vector<double>& scores() const { return scores_; }
  std::vector<double>& scores() { return scores_; }

  // Throws InvalidArgument on a zero dimension or a non-finite score.
  void validate() const;

 private:
  std::size_t index(std::size_t j, std::size_t x, std::size_t y, std::size_t z) const {
    return ((j * depth_ + z) * height_ + y) * width_ + x;
  }

  std::size_t joints_, width_, height_, depth_;
  std::vector<double> scores_;
};

// Softmax over every voxel of each joint (logits = score / temperature), then
// the expected voxel-center coordinate. Voxel centers sit at integer indices.
Pose3D soft_argmax_3d(const HeatmapVolume& volume, double temperature = 1.0);

// Same softmax, marginalized over depth, then the expected (x, y).
Pose2D soft_argmax_2d(const HeatmapVolume& volume, double temperature = 1.0);

// Volume file: one JSON header line {"J":..,"w":..,"h":..,"d":..} terminated by
// '\n', followed by J*w*h*d little-endian float32 scores in the layout above.
void write_volume(std::ostream& out, const HeatmapVolume& volume);
HeatmapVolume read_volume(std::istream& in);

}  // namespace epiforge
