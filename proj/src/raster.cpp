#include "mtpano/raster.hpp"

#include <sstream>

namespace mtpano {

int channel_count(ChannelKind kind) {
  switch (kind) {
    case ChannelKind::Rgb8:
    case ChannelKind::Normal:
    case ChannelKind::PointMap:
      return 3;
    case ChannelKind::Depth:
    case ChannelKind::Semantic:
    case ChannelKind::Scalar:
      return 1;
  }
  return 1;
}

std::string_view to_string(ChannelKind kind) {
  switch (kind) {
    case ChannelKind::Rgb8: return "rgb8";
    case ChannelKind::Depth: return "depth";
    case ChannelKind::Normal: return "normal";
    case ChannelKind::Semantic: return "semantic";
    case ChannelKind::PointMap: return "pointmap";
    case ChannelKind::Scalar: return "scalar";
  }
  return "scalar";
}

Raster::Raster(ChannelKind k, int width, int height, double fill) : kind(k) {
  if (width <= 0 || height <= 0) throw ContractError("raster dimensions must be positive");
  planes.assign(channel_count(k), Plane<double>::Constant(height, width, fill));
}

ErpImage::ErpImage(ChannelKind k, int width, int height, double fill)
    : ErpImage(Raster(k, width, height, fill)) {}

ErpImage::ErpImage(Raster raster) : Raster(std::move(raster)) {
  if (width() != 2 * height() || height() == 0) {
    std::ostringstream msg;
    msg << "equirectangular raster must be 2:1, got " << width() << "x" << height();
    throw ContractError(msg.str());
  }
}

std::string_view to_string(Task task) {
  switch (task) {
    case Task::Semantic: return "semantic";
    case Task::Depth: return "depth";
    case Task::Normal: return "normal";
    case Task::Rgb: return "rgb";
  }
  return "rgb";
}

Task task_from_string(std::string_view name) {
  if (name == "semantic" || name == "semseg") return Task::Semantic;
  if (name == "depth") return Task::Depth;
  if (name == "normal" || name == "normals") return Task::Normal;
  if (name == "rgb") return Task::Rgb;
  throw ConfigError("unknown task '" + std::string(name) + "'");
}

ChannelKind channel_kind_for(Task task) {
  switch (task) {
    case Task::Semantic: return ChannelKind::Semantic;
    case Task::Depth: return ChannelKind::Depth;
    case Task::Normal: return ChannelKind::Normal;
    case Task::Rgb: return ChannelKind::Rgb8;
  }
  return ChannelKind::Rgb8;
}

}  // namespace mtpano
