#include "mtpano/reproject.hpp"

#include <cmath>

namespace mtpano {
namespace {

// Top row taps (y0; x0, x1) and bottom row taps (y1; bx0, bx1). They differ only when a
// row lies beyond a pole, where the neighbour is the same row half a turn away.
struct BilinearTaps {
  int x0, x1, y0, y1;
  int bx0, bx1;
  double fx, fy;
};

int wrap_column(int x, int width) {
  x %= width;
  return x < 0 ? x + width : x;
}

BilinearTaps erp_taps(const Eigen::Vector2d& p, int width, int height) {
  const double xf = std::floor(p.x());
  const double yf = std::floor(p.y());
  BilinearTaps t;
  t.fx = p.x() - xf;
  t.fy = p.y() - yf;
  const int xi = static_cast<int>(xf), yi = static_cast<int>(yf);
  const int half = width / 2;
  t.x0 = t.bx0 = wrap_column(xi, width);
  t.x1 = t.bx1 = wrap_column(xi + 1, width);
  t.y0 = yi;
  t.y1 = yi + 1;
  if (t.y0 < 0) {
    t.y0 = 0;
    if (width % 2 == 0) {
      t.x0 = wrap_column(xi + half, width);
      t.x1 = wrap_column(xi + 1 + half, width);
    }
  }
  if (t.y1 > height - 1) {
    t.y1 = height - 1;
    if (width % 2 == 0) {
      t.bx0 = wrap_column(xi + half, width);
      t.bx1 = wrap_column(xi + 1 + half, width);
    }
  }
  t.y0 = std::min(t.y0, height - 1);
  t.y1 = std::max(t.y1, 0);
  return t;
}

double blend(const Plane<double>& plane, const BilinearTaps& t) {
  const double top = (1.0 - t.fx) * plane(t.y0, t.x0) + t.fx * plane(t.y0, t.x1);
  const double bottom = (1.0 - t.fx) * plane(t.y1, t.bx0) + t.fx * plane(t.y1, t.bx1);
  return (1.0 - t.fy) * top + t.fy * bottom;
}

bool taps_valid_depth(const Plane<double>& plane, const BilinearTaps& t) {
  return valid_depth(plane(t.y0, t.x0)) && valid_depth(plane(t.y0, t.x1)) &&
         valid_depth(plane(t.y1, t.bx0)) && valid_depth(plane(t.y1, t.bx1));
}

void check_task_channel(const Raster& r, Task task) {
  if (r.kind != channel_kind_for(task)) {
    throw ContractError("raster channel '" + std::string(to_string(r.kind)) +
                        "' does not match task '" + std::string(to_string(task)) + "'");
  }
}

}  // namespace

namespace {

// At most three channels, so samples stay off the heap.
using SampleVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 3, 1>;

SampleVec sample_small(const ErpImage& image, const SphericalCoord<double>& coord, SampleMode mode) {
  const int w = image.width(), h = image.height();
  const SphericalCoord<double> c(coord.theta, coord.phi);
  const Eigen::Vector2d p = spherical_to_pixel(c, w, h);
  SampleVec out(image.channels());
  if (mode == SampleMode::Nearest) {
    const int x = wrap_column(static_cast<int>(std::floor(p.x() + 0.5)), w);
    const int y = std::clamp(static_cast<int>(std::floor(p.y() + 0.5)), 0, h - 1);
    for (int ch = 0; ch < image.channels(); ++ch) out[ch] = image.planes[ch](y, x);
    return out;
  }
  const BilinearTaps t = erp_taps(p, w, h);
  for (int ch = 0; ch < image.channels(); ++ch) out[ch] = blend(image.planes[ch], t);
  if (image.kind == ChannelKind::Normal) {
    const double n = out.norm();
    if (n > 0) out /= n;
  }
  return out;
}

}  // namespace

Eigen::VectorXd sample_erp(const ErpImage& image, const SphericalCoord<double>& coord,
                           SampleMode mode) {
  if (mode == SampleMode::Bilinear && image.kind == ChannelKind::Semantic) {
    throw ContractError("semantic labels can only be sampled with nearest mode");
  }
  if (image.channels() > 3) throw ContractError("sample_erp supports at most three channels");
  return sample_small(image, coord, mode);
}

PatchSample extract_patch(const ErpImage& pano, const CameraPose& pose, Task task,
                          std::string pano_id) {
  check_task_channel(pano, task);
  const PerspectiveGrid grid = perspective_grid(pose);
  const Mat3<double> to_camera = grid.rotation.transpose();

  PatchSample sample;
  sample.pose = pose;
  sample.task = task;
  sample.pano_id = std::move(pano_id);
  sample.payload = Raster(pano.kind, pose.width, pose.height);
  sample.valid = Mask::Constant(pose.height, pose.width, true);

  const int w = pano.width(), h = pano.height();
  for (int row = 0; row < pose.height; ++row) {
    for (int col = 0; col < pose.width; ++col) {
      const SphericalCoord<double> c = grid.coord(row, col);
      switch (task) {
        case Task::Semantic:
        case Task::Rgb: {
          const SampleVec v =
              sample_small(pano, c, task == Task::Semantic ? SampleMode::Nearest : SampleMode::Bilinear);
          for (int ch = 0; ch < v.size(); ++ch) sample.payload.planes[ch](row, col) = v[ch];
          break;
        }
        case Task::Depth: {
          const BilinearTaps t = erp_taps(spherical_to_pixel(c, w, h), w, h);
          if (!taps_valid_depth(pano.planes[0], t)) {
            sample.valid(row, col) = false;
            break;
          }
          sample.payload.planes[0](row, col) = blend(pano.planes[0], t) * grid.axis_cos(row, col);
          break;
        }
        case Task::Normal: {
          const SampleVec v = sample_small(pano, c, SampleMode::Bilinear);
          const Vec3<double> world(v[0], v[1], v[2]);
          if (!(world.norm() > 0.5)) {
            sample.valid(row, col) = false;
            break;
          }
          sample.payload.set_vec3(row, col, (to_camera * world).normalized());
          break;
        }
      }
    }
  }
  return sample;
}

ErpPatchLabel reproject_labels(const PatchSample& patch, int erp_width, int erp_height) {
  check_task_channel(patch.payload, patch.task);
  const CameraPose& pose = patch.pose;
  pose.validate();
  if (patch.payload.width() != pose.width || patch.payload.height() != pose.height) {
    throw ContractError("patch payload dimensions differ from its pose");
  }
  const bool has_mask = patch.valid.size() != 0;
  const Mat3<double> rotation = rotation_matrix(pose);
  const Mat3<double> to_camera = rotation.transpose();
  const double focal = pose.focal();

  ErpPatchLabel label;
  label.task = patch.task;
  label.pose = pose;
  label.payload = ErpImage(patch.payload.kind, erp_width, erp_height);
  label.valid = Mask::Constant(erp_height, erp_width, false);

  const Raster& src = patch.payload;
  auto tap_ok = [&](int y, int x) { return !has_mask || patch.valid(y, x); };

  // Camera-frame rays separate into per-row and per-column factors.
  Eigen::ArrayXd cos_t(erp_width), sin_t(erp_width), cos_p(erp_height), sin_p(erp_height);
  for (int x = 0; x < erp_width; ++x) {
    const double theta = pixel_to_spherical<double>(x, 0, erp_width, erp_height).theta;
    cos_t[x] = std::cos(theta);
    sin_t[x] = std::sin(theta);
  }
  for (int y = 0; y < erp_height; ++y) {
    const double phi = pixel_to_spherical<double>(0, y, erp_width, erp_height).phi;
    cos_p[y] = std::cos(phi);
    sin_p[y] = std::sin(phi);
  }

  for (int y = 0; y < erp_height; ++y) {
    for (int x = 0; x < erp_width; ++x) {
      const Vec3<double> ray(cos_p[y] * sin_t[x], -sin_p[y], cos_p[y] * cos_t[x]);
      const Vec3<double> d_cam = to_camera * ray;
      if (!(d_cam.z() > 0)) continue;
      const Eigen::Vector2d plane(focal * d_cam.x() / d_cam.z() + 0.5 * pose.width,
                                  focal * d_cam.y() / d_cam.z() + 0.5 * pose.height);
      // Pixel-center coordinates inside the patch.
      const double sx = plane.x() - 0.5, sy = plane.y() - 0.5;
      if (!(sx >= 0 && sx <= pose.width - 1 && sy >= 0 && sy <= pose.height - 1)) continue;

      if (patch.task == Task::Semantic) {
        const int nx = std::min(static_cast<int>(std::floor(sx + 0.5)), pose.width - 1);
        const int ny = std::min(static_cast<int>(std::floor(sy + 0.5)), pose.height - 1);
        if (!tap_ok(ny, nx)) continue;
        label.payload.planes[0](y, x) = src.planes[0](ny, nx);
        label.valid(y, x) = true;
        continue;
      }

      BilinearTaps t;
      t.x0 = static_cast<int>(std::floor(sx));
      t.y0 = static_cast<int>(std::floor(sy));
      t.x1 = std::min(t.x0 + 1, pose.width - 1);
      t.y1 = std::min(t.y0 + 1, pose.height - 1);
      t.bx0 = t.x0;
      t.bx1 = t.x1;
      t.fx = sx - t.x0;
      t.fy = sy - t.y0;
      if (!tap_ok(t.y0, t.x0) || !tap_ok(t.y0, t.x1) || !tap_ok(t.y1, t.x0) || !tap_ok(t.y1, t.x1)) {
        continue;
      }

      switch (patch.task) {
        case Task::Depth: {
          if (!taps_valid_depth(src.planes[0], t)) break;
          label.payload.planes[0](y, x) = blend(src.planes[0], t) / d_cam.normalized().z();
          label.valid(y, x) = true;
          break;
        }
        case Task::Normal: {
          const Vec3<double> n(blend(src.planes[0], t), blend(src.planes[1], t),
                               blend(src.planes[2], t));
          if (!(n.norm() > 0.5)) break;
          label.payload.set_vec3(y, x, (rotation * n).normalized());
          label.valid(y, x) = true;
          break;
        }
        case Task::Rgb: {
          for (int ch = 0; ch < src.channels(); ++ch) label.payload.planes[ch](y, x) = blend(src.planes[ch], t);
          label.valid(y, x) = true;
          break;
        }
        case Task::Semantic:
          break;
      }
    }
  }
  return label;
}

}  // namespace mtpano
