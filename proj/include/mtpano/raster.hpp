#pragma once

#include <Eigen/Core>

#include <string>
#include <string_view>
#include <vector>

#include "mtpano/sphere.hpp"

namespace mtpano {

using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class ChannelKind { Rgb8, Depth, Normal, Semantic, PointMap, Scalar };

int channel_count(ChannelKind kind);
std::string_view to_string(ChannelKind kind);

/// Planar multi-channel raster. Values are stored as doubles regardless of kind: RGB8 in
/// [0, 255], depth in meters (<= 0 means invalid), normals as unit vectors, semantic
/// labels as exact integers, point maps in meters.
struct Raster {
  ChannelKind kind = ChannelKind::Scalar;
  std::vector<Plane<double>> planes;

  Raster() = default;
  Raster(ChannelKind k, int width, int height, double fill = 0.0);

  int width() const { return planes.empty() ? 0 : static_cast<int>(planes.front().cols()); }
  int height() const { return planes.empty() ? 0 : static_cast<int>(planes.front().rows()); }
  int channels() const { return static_cast<int>(planes.size()); }

  Vec3<double> vec3(int row, int col) const {
    return {planes[0](row, col), planes[1](row, col), planes[2](row, col)};
  }
  void set_vec3(int row, int col, const Vec3<double>& v) {
    planes[0](row, col) = v.x();
    planes[1](row, col) = v.y();
    planes[2](row, col) = v.z();
  }
};

/// Raster in equirectangular layout; width = 2 * height is enforced on construction.
class ErpImage : public Raster {
 public:
  ErpImage() = default;
  ErpImage(ChannelKind k, int width, int height, double fill = 0.0);
  explicit ErpImage(Raster raster);
};

/// Perspective supervision tasks. Rgb is plain bilinear resampling used to produce the
/// crops that are handed to the external perspective models.
enum class Task { Semantic, Depth, Normal, Rgb };

std::string_view to_string(Task task);
Task task_from_string(std::string_view name);
ChannelKind channel_kind_for(Task task);

inline bool valid_depth(double d) { return std::isfinite(d) && d > 0; }

}  // namespace mtpano
